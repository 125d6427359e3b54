#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqab/balancing.hpp"
#include "vqab/checkpoint.hpp"
#include "vqab/json_io.hpp"
#include "vqab/optimizer.hpp"
#include "vqab/store.hpp"

namespace vqab {

/// Hyperparameters of one training run. None of the defaults come from published
/// settings; they are desk-scale choices and are always written to the manifest.
struct TrainConfig {
    double learning_rate = 0.01;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int batch_size = 32;
    int epochs = 20;
    std::uint64_t seed = 1;
    double lambda = 1.0;
    double margin = 0.1;
    double init_scale = 0.1;
    int word_dim = 32;
    int hidden = 64;
    int explain_dim = 32;
    int answer_embed_dim = 32;
    MixMode mix = MixMode::full;
    bool normalize_image = false;

    void validate() const;
    OptimizerConfig optimizer_config() const;
    bool operator==(const TrainConfig&) const = default;
};

json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const json& j);

struct EpochRecord {
    int epoch = 0;  // 0 = before the first update
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
};

struct RunManifest {
    json config;
    std::string model_kind;
    std::map<std::string, std::string> dataset_fingerprints;
    std::vector<EpochRecord> epochs;
    std::string checkpoint_hash;
};

json to_json(const RunManifest& m);

class TrainingDivergedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Most common consensus answer of a split; ties go to the lexicographically smallest.
std::string predict_prior(const DatasetSplit& split);

/// SHA-256 over the split's instances and the features of the images they use.
std::string fingerprint(const DataStore& store, const DatasetSplit& split);

/// Vocabularies from the training split and freshly initialized parameters.
Model init_model(ModelKind kind, const DataStore& store, const DatasetSplit& train, const TrainConfig& config,
                 int candidates = static_cast<int>(kDefaultCandidates));

/// Examples with token ids resolved and, optionally, explanation targets attached to
/// original instances whose task carries a human pick. Feature spans point into `store`.
class PreparedSet {
public:
    PreparedSet(const Model& model, const DataStore& store, const DatasetSplit& split, bool with_explain);

    PreparedSet(const PreparedSet&) = delete;
    PreparedSet& operator=(const PreparedSet&) = delete;

    const std::vector<Example>& examples() const { return examples_; }
    std::size_t explain_targets() const { return targets_.size(); }

private:
    std::vector<std::vector<int>> tokens_;
    std::vector<ExplainTarget> targets_;
    std::vector<Example> examples_;
};

struct LossSummary {
    double loss = 0.0;
    double accuracy = 0.0;  // exact match of arg-max against the consensus answer
};

LossSummary evaluate_loss(const Model& model, const PreparedSet& set, double lambda, double margin);

struct TrainHooks {
    /// Called after every optimizer step with the updated parameters.
    std::function<void(long step, const ModelParams&)> on_step;
};

struct TrainResult {
    Model model;
    RunManifest manifest;
};

/// Trains `model` in place on `train` (and reports `val` per epoch when given).
/// Deterministic for a fixed config. Throws TrainingDivergedError on NaN/Inf.
TrainResult train_model(Model model, const DataStore& store, const DatasetSplit& train, const TrainConfig& config,
                        const DatasetSplit* val = nullptr, const TrainHooks& hooks = {});

/// init_model + train_model. Throws ValidationError for an empty split, or for the
/// counterexample kind when the split has no picked explanation tasks.
TrainResult train(const DataStore& store, const DatasetSplit& train, const TrainConfig& config, ModelKind kind,
                  const DatasetSplit* val = nullptr, const TrainHooks& hooks = {});

}  // namespace vqab
