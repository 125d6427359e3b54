#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqab/errors.hpp"
#include "vqab/json_io.hpp"
#include "vqab/knn_index.hpp"
#include "vqab/store.hpp"

namespace vqab {

/// Raised by generate_tasks when some questions' images lack k same-split neighbours.
class InsufficientNeighborsError : public ValidationError {
public:
    InsufficientNeighborsError(std::vector<std::string> question_ids, std::size_t k);
    const std::vector<std::string>& question_ids() const noexcept { return question_ids_; }

private:
    std::vector<std::string> question_ids_;
};

std::string task_id_for(const std::string& question_id);

/// One open task per (question, image, consensus answer) with the image's top-k
/// neighbours as candidates, in neighbour-list order.
std::vector<AnnotationTask> generate_tasks(const DataStore& store, std::span<const NeighborList> neighbors,
                                           std::size_t k = kDefaultCandidates);

/// Inserts tasks whose id is not yet present; returns the number inserted.
std::size_t insert_tasks(DataStore& store, std::span<const AnnotationTask> tasks);

/// Closes an open task. A pick opens a second-round answer job for (Q, I').
/// Throws NotFoundError (unknown task), ConflictError (task closed),
/// ValidationError (pick target not a candidate).
void ingest_result(DataStore& store, const AnnotationResult& result);

/// Builds the complementary pair from ten second-round answers (normalized here).
/// A' is their consensus and the pair is a mismatch when A' equals A.
ComplementaryPair aggregate_round(DataStore& store, const std::string& task_id,
                                  std::span<const std::string> answers);

/// Adds one second-round answer; the tenth answer triggers aggregate_round.
std::optional<ComplementaryPair> append_round_answer(DataStore& store, const std::string& task_id,
                                                     const std::string& answer);

struct QAInstance {
    std::string instance_id;
    std::string question_id;
    std::string image_id;
    std::vector<std::string> tokens;
    std::string question_type;
    AnswerSet answers;
    bool complement = false;

    bool operator==(const QAInstance&) const = default;
};

/// Indices into DatasetSplit::instances of the two members of a non-mismatch pair.
struct EvalPair {
    std::string question_id;
    std::size_t original = 0;
    std::size_t complement = 0;

    bool operator==(const EvalPair&) const = default;
};

struct CollectionStats {
    std::size_t picked = 0;
    std::size_t not_possible = 0;
    std::size_t pairs = 0;
    std::size_t mismatched = 0;

    bool operator==(const CollectionStats&) const = default;
};

struct DatasetSplit {
    std::optional<Split> split;  // nullopt: all splits
    std::vector<QAInstance> instances;
    std::vector<EvalPair> eval_pairs;
    CollectionStats stats;

    bool operator==(const DatasetSplit&) const = default;
};

/// Original (unbalanced) instances of a split.
DatasetSplit original_split(const DataStore& store, std::optional<Split> split);

/// Originals plus the complement of every aggregated pick. Mismatched pairs stay as
/// instances but are left out of `eval_pairs`. Throws ConflictError while tasks of the
/// split are open or awaiting second-round answers, unless `allow_pending`.
DatasetSplit assemble_balanced(const DataStore& store, std::optional<Split> split, bool allow_pending = false);

struct TypeStats {
    std::map<std::string, std::size_t> histogram;
    std::size_t count = 0;
    double entropy_bits = 0.0;
};

struct BalanceReport {
    std::map<std::string, TypeStats> per_question_type;
    std::size_t instances = 0;
    double weighted_entropy = 0.0;
    double not_possible_rate = 0.0;
    double mismatch_rate = 0.0;
};

/// Shannon entropy in bits with 0 log 0 = 0.
double entropy_bits(const std::map<std::string, std::size_t>& histogram);

/// Per-question-type consensus-answer histograms and their frequency-weighted mean entropy.
/// An empty split gives a zeroed report.
BalanceReport balance_report(const DatasetSplit& split);

json to_json(const BalanceReport& report);
std::string to_markdown(const BalanceReport& report);

}  // namespace vqab
