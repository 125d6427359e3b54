#include "vqab/answers.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "vqab/errors.hpp"
#include "vqab/types.hpp"

namespace vqab {

std::string normalize_answer(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::string mode_answer(std::span<const std::string> answers) {
    if (answers.empty()) throw ValidationError("mode of an empty answer list");
    // std::map iterates keys in ascending order, so the first maximum wins ties.
    std::map<std::string, int> counts;
    for (const auto& a : answers) ++counts[a];
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

std::string consensus_answer(std::span<const std::string> answers) {
    if (answers.size() != kAnswersPerSet) {
        throw ValidationError("consensus needs exactly " + std::to_string(kAnswersPerSet) +
                              " answers, got " + std::to_string(answers.size()));
    }
    return mode_answer(answers);
}

std::vector<std::string> tokenize_question(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || ch == '?') {
            flush();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return tokens;
}

const std::vector<std::string>& question_type_prefixes() {
    // Leading n-gram categories of the original VQA question-type breakdown.
    static const std::vector<std::string> kTypes = {
        "how many",          "is the",            "what",             "what color is the",
        "what is the",       "none of the above", "is this",          "is this a",
        "what is",           "what kind of",      "are the",          "is there a",
        "what type of",      "is it",             "what are the",     "where is the",
        "is there",          "does the",          "what color are the", "are these",
        "are there",         "which",             "is",               "what is the man",
        "are",               "how",               "does this",        "what is on the",
        "what does the",     "how many people are", "what is in the", "what is this",
        "do",                "what are",          "are they",         "what time",
        "what sport is",     "are there any",     "is he",            "what color is",
        "why",               "where are the",     "what color",       "who is",
        "what animal is",    "is the woman",      "is this an",       "do you",
        "how many people are in", "what room is", "has",              "is the man",
        "can you",           "why is the",        "what is the woman", "what number is",
        "what is the person", "is the person",    "what is the color of the", "what brand",
        "could",             "was",               "is that a",        "what is the name",
        "what does",         "where",             "who",
    };
    return kTypes;
}

std::string question_type_of(std::span<const std::string> tokens) {
    std::size_t best_len = 0;
    const std::string* best = nullptr;
    for (const auto& prefix : question_type_prefixes()) {
        // Split the prefix into words and compare against leading tokens.
        std::size_t n = 0;
        std::size_t pos = 0;
        bool ok = true;
        while (pos < prefix.size()) {
            auto end = prefix.find(' ', pos);
            if (end == std::string::npos) end = prefix.size();
            std::string_view word(prefix.data() + pos, end - pos);
            if (n >= tokens.size() || tokens[n] != word) {
                ok = false;
                break;
            }
            ++n;
            pos = end + 1;
        }
        if (ok && n > best_len) {
            best_len = n;
            best = &prefix;
        }
    }
    return best ? *best : std::string("other");
}

}  // namespace vqab
