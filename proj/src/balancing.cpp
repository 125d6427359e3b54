#include "vqab/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "vqab/answers.hpp"

namespace vqab {

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    const std::size_t shown = std::min<std::size_t>(ids.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    if (ids.size() > shown) out += ", ...";
    return out;
}

}  // namespace

InsufficientNeighborsError::InsufficientNeighborsError(std::vector<std::string> question_ids, std::size_t k)
    : ValidationError(std::to_string(question_ids.size()) + " question(s) lack " + std::to_string(k) +
                      " same-split neighbours: " + join_ids(question_ids)),
      question_ids_(std::move(question_ids)) {}

std::string task_id_for(const std::string& question_id) { return "task_" + question_id; }

std::vector<AnnotationTask> generate_tasks(const DataStore& store, std::span<const NeighborList> neighbors,
                                           std::size_t k) {
    std::unordered_map<std::string, const NeighborList*> by_image;
    for (const auto& l : neighbors) by_image[l.query_image_id] = &l;

    std::vector<AnnotationTask> tasks;
    std::vector<std::string> short_of_neighbors;
    for (const auto& [qid, q] : store.questions) {
        const auto& answers = store.answer_set(qid);
        const auto it = by_image.find(q.image_id);
        if (it == by_image.end() || it->second->neighbors.size() < k) {
            short_of_neighbors.push_back(qid);
            continue;
        }
        AnnotationTask t;
        t.task_id = task_id_for(qid);
        t.question_id = qid;
        t.shown_answer = answers.consensus;
        t.candidate_image_ids.reserve(k);
        for (std::size_t i = 0; i < k; ++i) t.candidate_image_ids.push_back(it->second->neighbors[i].image_id);
        t.status = TaskStatus::open;
        tasks.push_back(std::move(t));
    }
    if (!short_of_neighbors.empty()) throw InsufficientNeighborsError(std::move(short_of_neighbors), k);
    return tasks;
}

std::size_t insert_tasks(DataStore& store, std::span<const AnnotationTask> tasks) {
    std::size_t inserted = 0;
    for (const auto& t : tasks) inserted += store.tasks.emplace(t.task_id, t).second ? 1 : 0;
    return inserted;
}

void ingest_result(DataStore& store, const AnnotationResult& result) {
    auto& task = store.task(result.task_id);
    if (task.status != TaskStatus::open) {
        throw ConflictError("task '" + task.task_id + "' is already " + std::string(to_string(task.status)));
    }
    if (result.outcome.kind == OutcomeKind::pick) {
        const auto& c = task.candidate_image_ids;
        if (std::find(c.begin(), c.end(), result.outcome.image_id) == c.end()) {
            throw ValidationError("image '" + result.outcome.image_id + "' is not a candidate of task '" +
                                  task.task_id + "'");
        }
        task.status = TaskStatus::picked;
        store.jobs[task.task_id] = AnswerJob{task.task_id, task.question_id, result.outcome.image_id, {}};
    } else {
        task.status = TaskStatus::not_possible;
    }
    store.results[task.task_id] = result;
}

ComplementaryPair aggregate_round(DataStore& store, const std::string& task_id,
                                  std::span<const std::string> answers) {
    const auto& task = store.task(task_id);
    if (task.status != TaskStatus::picked) {
        throw ConflictError("task '" + task_id + "' is " + std::string(to_string(task.status)) + ", not picked");
    }
    if (store.pairs.count(task.question_id)) {
        throw ConflictError("task '" + task_id + "' already has its ten second-round answers");
    }
    if (answers.size() != kAnswersPerSet) {
        throw ValidationError("second round needs exactly 10 answers, got " + std::to_string(answers.size()));
    }
    const auto& question = store.question(task.question_id);
    const auto& result = store.results.at(task_id);

    AnswerSet complement;
    complement.question_id = task.question_id;
    for (const auto& a : answers) complement.answers.push_back(normalize_answer(a));
    complement.consensus = consensus_answer(complement.answers);

    ComplementaryPair pair;
    pair.question_id = task.question_id;
    pair.original_image_id = question.image_id;
    pair.complement_image_id = result.outcome.image_id;
    pair.original_answers = store.answer_set(task.question_id);
    pair.complement_answers = std::move(complement);
    pair.mismatch = pair.original_answers.consensus == pair.complement_answers.consensus;

    store.pairs[pair.question_id] = pair;
    store.jobs.erase(task_id);
    return pair;
}

std::optional<ComplementaryPair> append_round_answer(DataStore& store, const std::string& task_id,
                                                     const std::string& answer) {
    const auto& task = store.task(task_id);
    if (task.status != TaskStatus::picked) {
        throw ConflictError("task '" + task_id + "' is not awaiting second-round answers");
    }
    const auto it = store.jobs.find(task_id);
    if (it == store.jobs.end()) {
        throw ConflictError("task '" + task_id + "' already has its ten second-round answers");
    }
    auto normalized = normalize_answer(answer);
    if (normalized.empty()) throw ValidationError("empty answer");
    it->second.answers.push_back(std::move(normalized));
    if (!it->second.complete()) return std::nullopt;
    const auto collected = it->second.answers;
    return aggregate_round(store, task_id, collected);
}

namespace {

QAInstance make_original(const QuestionRecord& q, const AnswerSet& a) {
    return {q.question_id, q.question_id, q.image_id, q.tokens, q.question_type, a, false};
}

bool in_split(const DataStore& store, const std::string& image_id, std::optional<Split> split) {
    return !split || store.image(image_id).split == *split;
}

CollectionStats collect_stats(const DataStore& store, std::optional<Split> split) {
    CollectionStats st;
    for (const auto& [tid, t] : store.tasks) {
        if (!in_split(store, store.question(t.question_id).image_id, split)) continue;
        if (t.status == TaskStatus::picked) ++st.picked;
        if (t.status == TaskStatus::not_possible) ++st.not_possible;
    }
    for (const auto& [qid, p] : store.pairs) {
        if (!in_split(store, p.original_image_id, split)) continue;
        ++st.pairs;
        if (p.mismatch) ++st.mismatched;
    }
    return st;
}

}  // namespace

DatasetSplit original_split(const DataStore& store, std::optional<Split> split) {
    DatasetSplit out;
    out.split = split;
    for (const auto& [qid, q] : store.questions) {
        if (!in_split(store, q.image_id, split)) continue;
        out.instances.push_back(make_original(q, store.answer_set(qid)));
    }
    out.stats = collect_stats(store, split);
    return out;
}

DatasetSplit assemble_balanced(const DataStore& store, std::optional<Split> split, bool allow_pending) {
    if (!allow_pending) {
        std::vector<std::string> pending;
        for (const auto& [tid, t] : store.tasks) {
            if (!in_split(store, store.question(t.question_id).image_id, split)) continue;
            const bool waiting = t.status == TaskStatus::open ||
                                 (t.status == TaskStatus::picked && !store.pairs.count(t.question_id));
            if (waiting) pending.push_back(tid);
        }
        if (!pending.empty()) {
            throw ConflictError(std::to_string(pending.size()) + " task(s) still pending: " + join_ids(pending));
        }
    }

    DatasetSplit out;
    out.split = split;
    for (const auto& [qid, q] : store.questions) {
        if (!in_split(store, q.image_id, split)) continue;
        out.instances.push_back(make_original(q, store.answer_set(qid)));
        const auto pit = store.pairs.find(qid);
        if (pit == store.pairs.end()) continue;
        const auto& p = pit->second;
        QAInstance c{qid + "#c", qid, p.complement_image_id, q.tokens, q.question_type, p.complement_answers, true};
        out.instances.push_back(std::move(c));
        if (!p.mismatch) {
            out.eval_pairs.push_back({qid, out.instances.size() - 2, out.instances.size() - 1});
        }
    }
    out.stats = collect_stats(store, split);
    return out;
}

double entropy_bits(const std::map<std::string, std::size_t>& histogram) {
    std::size_t total = 0;
    for (const auto& [a, n] : histogram) total += n;
    if (total == 0) return 0.0;
    double h = 0.0;
    for (const auto& [a, n] : histogram) {
        if (n == 0) continue;
        const double p = static_cast<double>(n) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

BalanceReport balance_report(const DatasetSplit& split) {
    BalanceReport r;
    for (const auto& inst : split.instances) {
        auto& t = r.per_question_type[inst.question_type];
        ++t.histogram[inst.answers.consensus];
        ++t.count;
    }
    r.instances = split.instances.size();
    for (auto& [type, t] : r.per_question_type) {
        t.entropy_bits = entropy_bits(t.histogram);
        r.weighted_entropy += static_cast<double>(t.count) / static_cast<double>(r.instances) * t.entropy_bits;
    }
    const auto& st = split.stats;
    const std::size_t closed = st.picked + st.not_possible;
    r.not_possible_rate = closed ? static_cast<double>(st.not_possible) / static_cast<double>(closed) : 0.0;
    r.mismatch_rate = st.pairs ? static_cast<double>(st.mismatched) / static_cast<double>(st.pairs) : 0.0;
    return r;
}

json to_json(const BalanceReport& r) {
    json types = json::object();
    for (const auto& [type, t] : r.per_question_type) {
        types[type] = {{"count", t.count}, {"entropy_bits", t.entropy_bits}, {"histogram", t.histogram}};
    }
    return json{{"instances", r.instances},
                {"weighted_entropy", r.weighted_entropy},
                {"not_possible_rate", r.not_possible_rate},
                {"mismatch_rate", r.mismatch_rate},
                {"per_question_type", types}};
}

std::string to_markdown(const BalanceReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "| question type | count | entropy (bits) | top answers |\n";
    os << "|---|---:|---:|---|\n";
    for (const auto& [type, t] : r.per_question_type) {
        std::vector<std::pair<std::size_t, std::string>> top;
        for (const auto& [a, n] : t.histogram) top.emplace_back(n, a);
        std::stable_sort(top.begin(), top.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
        os << "| " << type << " | " << t.count << " | " << t.entropy_bits << " | ";
        for (std::size_t i = 0; i < std::min<std::size_t>(3, top.size()); ++i) {
            if (i) os << ", ";
            os << top[i].second << " (" << top[i].first << ")";
        }
        os << " |\n";
    }
    os << "\nWeighted entropy: " << r.weighted_entropy << " bits over " << r.instances << " instances\n";
    os << "Not-possible rate: " << r.not_possible_rate << "\n";
    os << "Mismatch rate: " << r.mismatch_rate << "\n";
    return os.str();
}

}  // namespace vqab
