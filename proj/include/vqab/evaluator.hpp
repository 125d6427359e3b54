#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "vqab/balancing.hpp"
#include "vqab/checkpoint.hpp"
#include "vqab/json_io.hpp"
#include "vqab/metrics.hpp"

namespace vqab {

struct EvalReport {
    AccuracyMode mode = AccuracyMode::consensus;
    std::string model_kind;
    std::size_t instances = 0;
    double overall = 0.0;
    std::map<std::string, double> per_answer_type;         // yes/no, number, other
    std::map<std::string, std::size_t> answer_type_counts;
    std::optional<PairMetrics> pairs;                      // absent when the split has no eval pairs
    std::size_t explain_tasks = 0;
    std::map<std::string, double> recall_at_5;             // by explanation method
};

struct ExplainOptions {
    bool enabled = true;
    const Model* vqa_model = nullptr;  // vqa_prob ranking; falls back to the evaluated model
    std::uint64_t seed = 0;
};

/// Accuracy, answer-type breakdown, pair metrics, and Recall@5 on the split's picked
/// explanation tasks (random, distance, vqa_prob when an answer model exists,
/// trained when `model` has an explaining head).
EvalReport evaluate(const Model& model, const DataStore& store, const DatasetSplit& split, AccuracyMode mode,
                    const ExplainOptions& explain = {});

/// Picked tasks whose question's image lies in the split, sorted by task id.
std::vector<const AnnotationTask*> picked_tasks(const DataStore& store, const DatasetSplit& split);

/// Mean Recall@5 of a method over tasks.
double mean_recall_at_5(ExplainMethod method, const std::vector<const AnnotationTask*>& tasks,
                        const ExplainContext& ctx);

json to_json(const EvalReport& r);

}  // namespace vqab
