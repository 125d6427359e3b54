#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vqab/json_io.hpp"
#include "vqab/model.hpp"
#include "vqab/vocabulary.hpp"

namespace vqab {

/// A trained model of any kind together with the vocabularies it was trained with.
struct Model {
    ModelKind kind = ModelKind::prior;
    ModelDims dims;
    Vocabulary question_vocab;
    Vocabulary answer_vocab;
    ModelParams params;
    std::string prior_answer;  // prior kind only

    std::vector<int> token_ids(std::span<const std::string> tokens) const;

    /// Answer distribution over answer_vocab; not available for the prior kind.
    AnswerDistribution distribution(std::span<const std::string> tokens, std::span<const double> features) const;

    /// Arg-max answer (lowest id wins ties); the prior kind returns prior_answer.
    std::string predict(std::span<const std::string> tokens, std::span<const double> features) const;

    bool has_answer_head() const { return kind != ModelKind::prior; }
    bool has_explain_head() const { return kind == ModelKind::counterexample; }
};

/// JSON tensor dump: format tag, version, dims, vocabularies, and one
/// {shape, data} entry per parameter block.
json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const json& j);

void save_checkpoint(const Model& model, const std::filesystem::path& file);
Model load_checkpoint(const std::filesystem::path& file);

/// SHA-256 of the serialized checkpoint.
std::string checkpoint_hash(const Model& model);

}  // namespace vqab
