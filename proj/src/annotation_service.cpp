#include "vqab/annotation_service.hpp"

#include <httplib.h>

#include "vqab/balancing.hpp"
#include "vqab/errors.hpp"

namespace vqab {

std::int64_t system_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

Response error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

std::string question_text(const QuestionRecord& q) {
    std::string text;
    for (const auto& t : q.tokens) text += (text.empty() ? "" : " ") + t;
    return text;
}

json display_uri(const ImageRecord& img) { return img.display_uri ? json(*img.display_uri) : json(nullptr); }

// Backups of the records one request may touch, restored when persisting fails.
struct Undo {
    std::string task_id, question_id;
    AnnotationTask task;
    std::optional<AnnotationResult> result;
    std::optional<AnswerJob> job;
    std::optional<ComplementaryPair> pair;

    Undo(const DataStore& s, const std::string& tid) : task_id(tid), task(s.task(tid)) {
        question_id = task.question_id;
        if (auto it = s.results.find(tid); it != s.results.end()) result = it->second;
        if (auto it = s.jobs.find(tid); it != s.jobs.end()) job = it->second;
        if (auto it = s.pairs.find(question_id); it != s.pairs.end()) pair = it->second;
    }

    void restore(DataStore& s) const {
        s.task(task_id) = task;
        s.results.erase(task_id);
        s.jobs.erase(task_id);
        s.pairs.erase(question_id);
        if (result) s.results.emplace(task_id, *result);
        if (job) s.jobs.emplace(task_id, *job);
        if (pair) s.pairs.emplace(question_id, *pair);
    }
};

}  // namespace

AnnotationService::AnnotationService(DataStore store, ServiceConfig config, ClockFn clock)
    : store_(std::move(store)), config_(std::move(config)), clock_(std::move(clock)) {}

void AnnotationService::persist(const DataStore& store) const {
    if (config_.store_dir) save_store(store, *config_.store_dir, kAnnotationParts);
}

json AnnotationService::task_view(const DataStore& store, const AnnotationTask& task, std::int64_t expires_ms) const {
    json candidates = json::array();
    for (const auto& id : task.candidate_image_ids) {
        candidates.push_back({{"image_id", id}, {"display_uri", display_uri(store.image(id))}});
    }
    const auto& q = store.question(task.question_id);
    return json{{"task_id", task.task_id},
                {"question_id", q.question_id},
                {"question", question_text(q)},
                {"image_id", q.image_id},
                {"image_display_uri", display_uri(store.image(q.image_id))},
                {"shown_answer", task.shown_answer},
                {"candidates", candidates},
                {"allows_not_possible", true},
                {"lease_expires_ms", expires_ms}};
}

Response AnnotationService::next_task(const std::string& annotator_id) {
    try {
        std::lock_guard lock(lease_mutex_);
        const auto now = clock_();
        return store_.read([&](const DataStore& s) -> Response {
            for (const auto& [tid, lease] : leases_) {
                if (lease.annotator_id == annotator_id && lease.expires_ms > now &&
                    s.task(tid).status == TaskStatus::open) {
                    return {200, task_view(s, s.task(tid), lease.expires_ms)};
                }
            }
            for (const auto& [tid, task] : s.tasks) {
                if (task.status != TaskStatus::open) continue;
                const auto it = leases_.find(tid);
                if (it != leases_.end() && it->second.expires_ms > now) continue;
                const auto expires = now + config_.lease_ttl.count();
                leases_[tid] = Lease{annotator_id, expires};
                return {200, task_view(s, task, expires)};
            }
            return {204, nullptr};
        });
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

Response AnnotationService::submit_result(const std::string& task_id, const std::string& annotator_id,
                                          const std::string& body) {
    AnnotationResult result;
    result.task_id = task_id;
    result.annotator_id = annotator_id;
    try {
        const auto j = json::parse(body);
        const auto outcome = j.at("outcome").get<std::string>();
        if (outcome == "Pick") {
            result.outcome = AnnotationOutcome::pick(j.at("image_id").get<std::string>());
        } else if (outcome == "NotPossible") {
            result.outcome = AnnotationOutcome::not_possible();
        } else {
            return error(400, "outcome must be \"Pick\" or \"NotPossible\"");
        }
    } catch (const json::exception& e) {
        return error(400, std::string("malformed body: ") + e.what());
    }

    std::lock_guard lock(lease_mutex_);
    const auto now = clock_();
    return store_.write([&](DataStore& s) -> Response {
        const auto task_it = s.tasks.find(task_id);
        if (task_it == s.tasks.end()) return error(404, "unknown task '" + task_id + "'");
        if (task_it->second.status != TaskStatus::open) {
            const auto& prev = s.results.at(task_id);
            if (prev.annotator_id == annotator_id && prev.outcome == result.outcome) {
                return {200, json{{"task_id", task_id}, {"status", to_string(task_it->second.status)}}};
            }
            return error(409, "task '" + task_id + "' is already closed");
        }
        if (const auto it = leases_.find(task_id);
            it != leases_.end() && it->second.expires_ms > now && it->second.annotator_id != annotator_id) {
            return error(409, "task '" + task_id + "' is leased to another annotator");
        }
        result.timestamp_ms = now;
        const Undo undo(s, task_id);
        try {
            ingest_result(s, result);
        } catch (const ValidationError& e) {
            return error(422, e.what());
        }
        try {
            persist(s);
        } catch (const std::exception& e) {
            undo.restore(s);
            return error(500, e.what());
        }
        leases_.erase(task_id);
        return {200, json{{"task_id", task_id}, {"status", to_string(s.task(task_id).status)}}};
    });
}

Response AnnotationService::next_answer_job() const {
    return store_.read([&](const DataStore& s) -> Response {
        for (const auto& [tid, job] : s.jobs) {
            if (job.complete()) continue;
            const auto& q = s.question(job.question_id);
            return {200, json{{"task_id", tid},
                              {"question_id", q.question_id},
                              {"question", question_text(q)},
                              {"image_id", job.image_id},
                              {"display_uri", display_uri(s.image(job.image_id))},
                              {"answers_collected", job.answers.size()},
                              {"answers_needed", kAnswersPerSet}}};
        }
        return {204, nullptr};
    });
}

Response AnnotationService::post_answer(const std::string& body) {
    std::string task_id, answer;
    try {
        const auto j = json::parse(body);
        task_id = j.at("task_id").get<std::string>();
        answer = j.at("answer").get<std::string>();
    } catch (const json::exception& e) {
        return error(400, std::string("malformed body: ") + e.what());
    }
    return store_.write([&](DataStore& s) -> Response {
        if (!s.tasks.count(task_id)) return error(404, "unknown task '" + task_id + "'");
        const Undo undo(s, task_id);
        std::optional<ComplementaryPair> pair;
        try {
            pair = append_round_answer(s, task_id, answer);
        } catch (const ConflictError& e) {
            return error(409, e.what());
        } catch (const ValidationError& e) {
            return error(422, e.what());
        }
        try {
            persist(s);
        } catch (const std::exception& e) {
            undo.restore(s);
            return error(500, e.what());
        }
        const auto job = s.jobs.find(task_id);
        return {200, json{{"task_id", task_id},
                          {"answers_collected", job == s.jobs.end() ? kAnswersPerSet : job->second.answers.size()},
                          {"pair_created", pair.has_value()}}};
    });
}

Response AnnotationService::stats() const {
    try {
        return store_.read([](const DataStore& s) -> Response {
            return {200, to_json(balance_report(assemble_balanced(s, std::nullopt, true)))};
        });
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

void AnnotationService::bind(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        if (r.status != 204) res.set_content(r.body.dump(), "application/json");
    };
    auto annotator = [](const httplib::Request& req) {
        const auto id = req.get_header_value("X-Annotator-Id");
        return id.empty() ? std::string("anonymous") : id;
    };
    server.Get("/api/tasks/next", [this, send, annotator](const httplib::Request& req, httplib::Response& res) {
        send(res, next_task(annotator(req)));
    });
    server.Post(R"(/api/tasks/([^/]+)/result)",
                [this, send, annotator](const httplib::Request& req, httplib::Response& res) {
                    send(res, submit_result(req.matches[1].str(), annotator(req), req.body));
                });
    server.Get("/api/answers/next",
               [this, send](const httplib::Request&, httplib::Response& res) { send(res, next_answer_job()); });
    server.Post("/api/answers", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, post_answer(req.body));
    });
    server.Get("/api/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, stats()); });
    if (config_.static_dir) server.set_mount_point("/", config_.static_dir->string());
}

}  // namespace vqab
