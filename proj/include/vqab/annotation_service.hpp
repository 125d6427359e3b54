#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "vqab/json_io.hpp"
#include "vqab/store.hpp"

namespace httplib {
class Server;
}

namespace vqab {

struct ServiceConfig {
    std::optional<std::filesystem::path> store_dir;  // write-ahead target; in-memory only when unset
    std::chrono::milliseconds lease_ttl{std::chrono::minutes(10)};
    std::optional<std::filesystem::path> static_dir;  // served at "/"
};

/// Status code plus JSON body; 204 responses carry a null body.
struct Response {
    int status = 200;
    json body;
};

/// Milliseconds since some epoch; injectable for lease tests.
using ClockFn = std::function<std::int64_t()>;

std::int64_t system_clock_ms();

/// Task handout and result ingestion over a store. Each handler is callable without a
/// socket; bind() attaches them to an HTTP server. Mutations go through the store's
/// single writer and are persisted before a handler returns 200.
class AnnotationService {
public:
    explicit AnnotationService(DataStore store, ServiceConfig config = {}, ClockFn clock = system_clock_ms);

    /// GET /api/tasks/next. Returns the caller's live lease if it has one, else leases
    /// the first open task (by id) that nobody else holds; 204 when none is available.
    Response next_task(const std::string& annotator_id);

    /// POST /api/tasks/{id}/result with {"outcome":"Pick","image_id":...} or {"outcome":"NotPossible"}.
    Response submit_result(const std::string& task_id, const std::string& annotator_id, const std::string& body);

    /// GET /api/answers/next: a picked task still collecting second-round answers, or 204.
    Response next_answer_job() const;

    /// POST /api/answers with {"task_id":..., "answer":...}.
    Response post_answer(const std::string& body);

    /// GET /api/stats: balance report over everything collected so far.
    Response stats() const;

    DataStore snapshot() const { return store_.snapshot(); }

    void bind(httplib::Server& server);

private:
    struct Lease {
        std::string annotator_id;
        std::int64_t expires_ms = 0;
    };

    json task_view(const DataStore& store, const AnnotationTask& task, std::int64_t expires_ms) const;
    void persist(const DataStore& store) const;

    SharedStore store_;
    ServiceConfig config_;
    ClockFn clock_;
    std::mutex lease_mutex_;
    std::map<std::string, Lease> leases_;  // by task id
};

}  // namespace vqab
