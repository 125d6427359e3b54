#include "vqab/vocabulary.hpp"

#include <algorithm>
#include <set>

#include "vqab/errors.hpp"

namespace vqab {

Vocabulary::Vocabulary(std::vector<std::string> words, bool reserve_unknown) : has_unknown_(reserve_unknown) {
    if (reserve_unknown) {
        std::erase(words, std::string(kUnknown));
        words.insert(words.begin(), kUnknown);
    }
    words_ = std::move(words);
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!ids_.emplace(words_[i], static_cast<int>(i)).second) {
            throw ValidationError("duplicate vocabulary word '" + words_[i] + "'");
        }
    }
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& corpus, bool reserve_unknown) {
    std::set<std::string> uniq(corpus.begin(), corpus.end());
    return Vocabulary(std::vector<std::string>(uniq.begin(), uniq.end()), reserve_unknown);
}

std::optional<int> Vocabulary::find(const std::string& word) const {
    const auto it = ids_.find(word);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::id_or_unknown(const std::string& word) const {
    if (auto id = find(word)) return *id;
    if (!has_unknown_) throw ValidationError("'" + word + "' is not in the vocabulary");
    return 0;
}

}  // namespace vqab
