#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace vqab {

/// Word <-> id map. Ids follow the order of `words`; with `reserve_unknown`,
/// id 0 is the out-of-vocabulary token.
class Vocabulary {
public:
    static constexpr const char* kUnknown = "<unk>";

    Vocabulary() = default;
    Vocabulary(std::vector<std::string> words, bool reserve_unknown);

    /// Sorted unique words from `corpus`.
    static Vocabulary from_words(const std::vector<std::string>& corpus, bool reserve_unknown);

    std::optional<int> find(const std::string& word) const;
    /// Falls back to the unknown id; throws ValidationError without one.
    int id_or_unknown(const std::string& word) const;

    const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& words() const { return words_; }
    int size() const { return static_cast<int>(words_.size()); }
    bool has_unknown() const { return has_unknown_; }

    bool operator==(const Vocabulary& o) const { return words_ == o.words_ && has_unknown_ == o.has_unknown_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> ids_;
    bool has_unknown_ = false;
};

}  // namespace vqab
