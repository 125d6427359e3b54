#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vqab {

inline constexpr std::size_t kAnswersPerSet = 10;
inline constexpr std::size_t kDefaultCandidates = 24;
inline constexpr int kSchemaVersion = 1;

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

/// Fixed-dimension image representation (stand-in for penultimate CNN activations).
struct FeatureVector {
    std::vector<double> values;
    bool normalized = false;

    std::size_t dim() const { return values.size(); }
    bool operator==(const FeatureVector&) const = default;
};

struct ImageRecord {
    std::string image_id;
    FeatureVector features;
    Split split = Split::train;
    std::optional<std::string> display_uri;

    bool operator==(const ImageRecord&) const = default;
};

struct QuestionRecord {
    std::string question_id;
    std::string image_id;
    std::vector<std::string> tokens;
    std::string question_type;

    bool operator==(const QuestionRecord&) const = default;
};

/// Ten normalized free-form answers and their majority (consensus) answer.
struct AnswerSet {
    std::string question_id;
    std::vector<std::string> answers;
    std::string consensus;

    bool operator==(const AnswerSet&) const = default;
};

/// (Q, I, A, I', A'): one question asked on two similar images.
/// `mismatch` is set when the second round reproduced the original answer.
struct ComplementaryPair {
    std::string question_id;
    std::string original_image_id;
    std::string complement_image_id;
    AnswerSet original_answers;
    AnswerSet complement_answers;
    bool mismatch = false;

    bool operator==(const ComplementaryPair&) const = default;
};

enum class TaskStatus { open, picked, not_possible };

std::string_view to_string(TaskStatus s);
TaskStatus task_status_from_string(std::string_view s);

/// A complementary-image picking task. Candidates are the original image's
/// nearest neighbours in ascending distance order (ties by image id).
struct AnnotationTask {
    std::string task_id;
    std::string question_id;
    std::string shown_answer;
    std::vector<std::string> candidate_image_ids;
    TaskStatus status = TaskStatus::open;

    bool operator==(const AnnotationTask&) const = default;
};

enum class OutcomeKind { pick, not_possible };

struct AnnotationOutcome {
    OutcomeKind kind = OutcomeKind::not_possible;
    std::string image_id;  // set iff kind == pick

    static AnnotationOutcome pick(std::string id) { return {OutcomeKind::pick, std::move(id)}; }
    static AnnotationOutcome not_possible() { return {OutcomeKind::not_possible, {}}; }
    bool operator==(const AnnotationOutcome&) const = default;
};

struct AnnotationResult {
    std::string task_id;
    AnnotationOutcome outcome;
    std::string annotator_id;
    std::int64_t timestamp_ms = 0;

    bool operator==(const AnnotationResult&) const = default;
};

/// Second-round answer collection for (Q, I') after a pick.
struct AnswerJob {
    std::string task_id;
    std::string question_id;
    std::string image_id;
    std::vector<std::string> answers;

    bool complete() const { return answers.size() >= kAnswersPerSet; }
    bool operator==(const AnswerJob&) const = default;
};

}  // namespace vqab
