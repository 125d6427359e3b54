#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <utility>

#include "vqab/types.hpp"

namespace vqab {

/// In-memory record sets, keyed by id. Pairs, tasks, results, and answer jobs
/// are keyed by question id / task id respectively (one task per question).
struct DataStore {
    std::map<std::string, ImageRecord> images;
    std::map<std::string, QuestionRecord> questions;
    std::map<std::string, AnswerSet> answers;           // by question_id
    std::map<std::string, ComplementaryPair> pairs;     // by question_id
    std::map<std::string, AnnotationTask> tasks;        // by task_id
    std::map<std::string, AnnotationResult> results;    // by task_id
    std::map<std::string, AnswerJob> jobs;              // by task_id

    bool operator==(const DataStore&) const = default;

    const ImageRecord& image(const std::string& id) const;
    const QuestionRecord& question(const std::string& id) const;
    const AnswerSet& answer_set(const std::string& question_id) const;
    const AnnotationTask& task(const std::string& id) const;
    AnnotationTask& task(const std::string& id);

    /// Common feature dimension, 0 when there are no images.
    std::size_t feature_dim() const;
};

/// Checks every record-type invariant; throws ValidationError naming the offending id.
void validate_store(const DataStore& store);

/// Reads images.jsonl, questions.jsonl, answers.jsonl, pairs.jsonl, tasks.jsonl,
/// results.jsonl and jobs.jsonl from `dir`. Missing files are treated as empty.
DataStore load_store(const std::filesystem::path& dir);

enum StoreParts : unsigned {
    kImages = 1u << 0,
    kQuestions = 1u << 1,
    kAnswers = 1u << 2,
    kPairs = 1u << 3,
    kTasks = 1u << 4,
    kResults = 1u << 5,
    kJobs = 1u << 6,
    kAnnotationParts = kPairs | kTasks | kResults | kJobs,
    kAllParts = 0x7f,
};

/// Writes the selected record files, sorted by id, through a temp file + rename.
void save_store(const DataStore& store, const std::filesystem::path& dir,
                unsigned parts = kAllParts);

/// Many readers, one serialized writer.
class SharedStore {
public:
    explicit SharedStore(DataStore store) : store_(std::move(store)) {}

    template <class Fn>
    decltype(auto) read(Fn&& fn) const {
        std::shared_lock lock(mutex_);
        return std::forward<Fn>(fn)(static_cast<const DataStore&>(store_));
    }

    template <class Fn>
    decltype(auto) write(Fn&& fn) {
        std::unique_lock lock(mutex_);
        return std::forward<Fn>(fn)(store_);
    }

    DataStore snapshot() const {
        std::shared_lock lock(mutex_);
        return store_;
    }

private:
    mutable std::shared_mutex mutex_;
    DataStore store_;
};

}  // namespace vqab
