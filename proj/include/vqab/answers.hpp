#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vqab {

/// Lowercase (ASCII), trim, and collapse internal whitespace runs to one space.
/// No article stripping and no number-word unification.
std::string normalize_answer(std::string_view raw);

/// Most common of exactly ten answers; ties go to the lexicographically smallest.
/// Throws ValidationError on a wrong count.
std::string consensus_answer(std::span<const std::string> answers);

/// Mode of an arbitrary non-empty list with the same tie-break.
std::string mode_answer(std::span<const std::string> answers);

/// Lowercases and splits on whitespace, dropping a trailing '?'.
std::vector<std::string> tokenize_question(std::string_view text);

/// Longest prefix of `tokens` found in the shipped question-type list, or "other".
std::string question_type_of(std::span<const std::string> tokens);

const std::vector<std::string>& question_type_prefixes();

}  // namespace vqab
