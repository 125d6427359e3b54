#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqab/balancing.hpp"
#include "vqab/checkpoint.hpp"
#include "vqab/store.hpp"

namespace vqab {

/// simple: min(#matches / 3, 1) over all ten answers.
/// consensus: mean over the ten leave-one-out nine-answer subsets of min(#matches / 3, 1),
/// as the released VQA evaluation script computes it.
enum class AccuracyMode { simple, consensus };

std::string_view to_string(AccuracyMode m);
AccuracyMode accuracy_mode_from_string(std::string_view s);

double vqa_accuracy(const std::string& prediction, std::span<const std::string> answers, AccuracyMode mode);
double vqa_accuracy(const std::string& prediction, const AnswerSet& answers, AccuracyMode mode);

enum class AnswerType { yes_no, number, other };

std::string_view to_string(AnswerType t);

/// "yes"/"no" -> yes/no; base-10 integer or decimal numeral -> number; else other.
AnswerType answer_type_of(const std::string& consensus);

struct PairMetrics {
    double both_correct = 0.0;
    double identical = 0.0;
    double different = 0.0;
    std::size_t pairs = 0;
};

/// Fractions over split.eval_pairs. `predictions` maps instance_id to the predicted answer.
/// Throws ValidationError when there are no pairs or a member lacks a prediction.
PairMetrics pair_metrics(const std::map<std::string, std::string>& predictions, const DatasetSplit& split);

/// 1 iff `human_pick` sits in the first five positions of `ranking`.
int recall_at_5(std::span<const std::string> ranking, const std::string& human_pick);

enum class ExplainMethod { random, distance, vqa_prob, trained };

std::string_view to_string(ExplainMethod m);

struct ExplainContext {
    const DataStore* store = nullptr;
    const Model* answer_model = nullptr;   // vqa_prob
    const Model* explain_model = nullptr;  // trained
    std::uint64_t seed = 0;                // random
};

/// Candidate ids from most to least likely counter-example.
/// random: seeded shuffle per task; distance: stored ascending-distance order;
/// vqa_prob: ascending P(A | Q, I_i); trained: descending explaining-head score.
/// Ties keep candidate order.
std::vector<std::string> rank_candidates(ExplainMethod method, const AnnotationTask& task, const ExplainContext& ctx);

}  // namespace vqab
