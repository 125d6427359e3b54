#include "vqab/store.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vqab/answers.hpp"
#include "vqab/distance.hpp"
#include "vqab/errors.hpp"
#include "vqab/json_io.hpp"

namespace fs = std::filesystem;

namespace vqab {

// ---------------------------------------------------------------------------
// JSON conversions

void to_json(json& j, const FeatureVector& v) {
    j = json{{"values", v.values}, {"normalized", v.normalized}};
}

void to_json(json& j, const ImageRecord& r) {
    j = json{{"schema_version", kSchemaVersion},
             {"image_id", r.image_id},
             {"split", to_string(r.split)},
             {"features", r.features.values},
             {"normalized", r.features.normalized}};
    if (r.display_uri) j["display_uri"] = *r.display_uri;
}

void from_json(const json& j, ImageRecord& r) {
    r.image_id = j.at("image_id").get<std::string>();
    r.split = split_from_string(j.at("split").get<std::string>());
    r.features.values = j.at("features").get<std::vector<double>>();
    r.features.normalized = j.value("normalized", false);
    if (j.contains("display_uri") && !j["display_uri"].is_null()) {
        r.display_uri = j["display_uri"].get<std::string>();
    } else {
        r.display_uri.reset();
    }
}

void to_json(json& j, const QuestionRecord& r) {
    j = json{{"schema_version", kSchemaVersion},
             {"question_id", r.question_id},
             {"image_id", r.image_id},
             {"tokens", r.tokens},
             {"question_type", r.question_type}};
}

void from_json(const json& j, QuestionRecord& r) {
    r.question_id = j.at("question_id").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.question_type = j.contains("question_type") ? j["question_type"].get<std::string>()
                                                   : question_type_of(r.tokens);
}

void to_json(json& j, const AnswerSet& r) {
    j = json{{"schema_version", kSchemaVersion},
             {"question_id", r.question_id},
             {"answers", r.answers},
             {"consensus", r.consensus}};
}

void from_json(const json& j, AnswerSet& r) {
    r.question_id = j.at("question_id").get<std::string>();
    r.answers = j.at("answers").get<std::vector<std::string>>();
    r.consensus = j.at("consensus").get<std::string>();
}

void to_json(json& j, const ComplementaryPair& r) {
    auto strip = [](const AnswerSet& a) {
        return json{{"answers", a.answers}, {"consensus", a.consensus}};
    };
    j = json{{"schema_version", kSchemaVersion},
             {"question_id", r.question_id},
             {"original_image_id", r.original_image_id},
             {"complement_image_id", r.complement_image_id},
             {"original_answers", strip(r.original_answers)},
             {"complement_answers", strip(r.complement_answers)},
             {"mismatch", r.mismatch}};
}

void from_json(const json& j, ComplementaryPair& r) {
    r.question_id = j.at("question_id").get<std::string>();
    r.original_image_id = j.at("original_image_id").get<std::string>();
    r.complement_image_id = j.at("complement_image_id").get<std::string>();
    auto read_set = [&](const json& s) {
        AnswerSet a;
        a.question_id = r.question_id;
        a.answers = s.at("answers").get<std::vector<std::string>>();
        a.consensus = s.at("consensus").get<std::string>();
        return a;
    };
    r.original_answers = read_set(j.at("original_answers"));
    r.complement_answers = read_set(j.at("complement_answers"));
    r.mismatch = j.at("mismatch").get<bool>();
}

void to_json(json& j, const AnnotationTask& r) {
    j = json{{"schema_version", kSchemaVersion},
             {"task_id", r.task_id},
             {"question_id", r.question_id},
             {"shown_answer", r.shown_answer},
             {"candidate_image_ids", r.candidate_image_ids},
             {"status", to_string(r.status)}};
}

void from_json(const json& j, AnnotationTask& r) {
    r.task_id = j.at("task_id").get<std::string>();
    r.question_id = j.at("question_id").get<std::string>();
    r.shown_answer = j.at("shown_answer").get<std::string>();
    r.candidate_image_ids = j.at("candidate_image_ids").get<std::vector<std::string>>();
    r.status = task_status_from_string(j.at("status").get<std::string>());
}

void to_json(json& j, const AnnotationOutcome& r) {
    if (r.kind == OutcomeKind::pick) {
        j = json{{"outcome", "Pick"}, {"image_id", r.image_id}};
    } else {
        j = json{{"outcome", "NotPossible"}};
    }
}

void from_json(const json& j, AnnotationOutcome& r) {
    const auto kind = j.at("outcome").get<std::string>();
    if (kind == "Pick") {
        r = AnnotationOutcome::pick(j.at("image_id").get<std::string>());
    } else if (kind == "NotPossible") {
        r = AnnotationOutcome::not_possible();
    } else {
        throw ValidationError("unknown outcome '" + kind + "'");
    }
}

void to_json(json& j, const AnnotationResult& r) {
    j = json(r.outcome);
    j["schema_version"] = kSchemaVersion;
    j["task_id"] = r.task_id;
    j["annotator_id"] = r.annotator_id;
    j["timestamp_ms"] = r.timestamp_ms;
}

void from_json(const json& j, AnnotationResult& r) {
    r.task_id = j.at("task_id").get<std::string>();
    r.outcome = j.get<AnnotationOutcome>();
    r.annotator_id = j.value("annotator_id", std::string{});
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
}

void to_json(json& j, const AnswerJob& r) {
    j = json{{"schema_version", kSchemaVersion},
             {"task_id", r.task_id},
             {"question_id", r.question_id},
             {"image_id", r.image_id},
             {"answers", r.answers}};
}

void from_json(const json& j, AnswerJob& r) {
    r.task_id = j.at("task_id").get<std::string>();
    r.question_id = j.at("question_id").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.answers = j.at("answers").get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------
// Lookups

namespace {

template <class Map>
auto& find_or_throw(Map& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw NotFoundError(std::string("unknown ") + what + " '" + id + "'");
    return it->second;
}

}  // namespace

const ImageRecord& DataStore::image(const std::string& id) const {
    return find_or_throw(images, id, "image");
}
const QuestionRecord& DataStore::question(const std::string& id) const {
    return find_or_throw(questions, id, "question");
}
const AnswerSet& DataStore::answer_set(const std::string& question_id) const {
    return find_or_throw(answers, question_id, "answer set for question");
}
const AnnotationTask& DataStore::task(const std::string& id) const {
    return find_or_throw(tasks, id, "task");
}
AnnotationTask& DataStore::task(const std::string& id) { return find_or_throw(tasks, id, "task"); }

std::size_t DataStore::feature_dim() const {
    return images.empty() ? 0 : images.begin()->second.features.dim();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void fail(const std::string& msg) { throw ValidationError(msg); }

void validate_answer_set(const AnswerSet& a, const std::string& where) {
    if (a.answers.size() != kAnswersPerSet) {
        fail(where + ": expected " + std::to_string(kAnswersPerSet) + " answers, got " +
             std::to_string(a.answers.size()));
    }
    for (const auto& s : a.answers) {
        if (s != normalize_answer(s)) fail(where + ": answer '" + s + "' is not normalized");
    }
    if (consensus_answer(a.answers) != a.consensus) {
        fail(where + ": consensus '" + a.consensus + "' is not the mode of its answers");
    }
}

}  // namespace

void validate_store(const DataStore& s) {
    std::size_t dim = 0;
    for (const auto& [id, img] : s.images) {
        if (id.empty() || id != img.image_id) fail("image key/id mismatch for '" + id + "'");
        const auto& v = img.features.values;
        if (v.empty()) fail("image '" + id + "': empty feature vector");
        if (dim == 0) dim = v.size();
        if (v.size() != dim) {
            fail("image '" + id + "': feature dimension " + std::to_string(v.size()) +
                 " differs from dataset dimension " + std::to_string(dim));
        }
        double sq = 0.0;
        for (double x : v) {
            if (!std::isfinite(x)) fail("image '" + id + "': non-finite feature value");
            sq += x * x;
        }
        if (img.features.normalized && std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
            fail("image '" + id + "': flagged normalized but norm is " + std::to_string(std::sqrt(sq)));
        }
    }

    for (const auto& [id, q] : s.questions) {
        if (id != q.question_id) fail("question key/id mismatch for '" + id + "'");
        if (!s.images.count(q.image_id)) fail("question '" + id + "' references unknown image '" + q.image_id + "'");
        if (q.tokens.empty()) fail("question '" + id + "' has no tokens");
        if (q.question_type != question_type_of(q.tokens)) {
            fail("question '" + id + "': question_type '" + q.question_type + "' is not derivable from tokens");
        }
    }

    for (const auto& [qid, a] : s.answers) {
        if (qid != a.question_id) fail("answer set key/id mismatch for '" + qid + "'");
        if (!s.questions.count(qid)) fail("answer set references unknown question '" + qid + "'");
        validate_answer_set(a, "answers of question '" + qid + "'");
    }

    for (const auto& [qid, p] : s.pairs) {
        const std::string where = "pair for question '" + qid + "'";
        if (qid != p.question_id) fail(where + ": key/id mismatch");
        const auto qit = s.questions.find(qid);
        if (qit == s.questions.end()) fail(where + ": unknown question");
        if (p.original_image_id != qit->second.image_id) fail(where + ": original image is not the question's image");
        if (p.original_image_id == p.complement_image_id) fail(where + ": original and complement images coincide");
        const auto ci = s.images.find(p.complement_image_id);
        if (ci == s.images.end()) fail(where + ": unknown complement image '" + p.complement_image_id + "'");
        if (ci->second.split != s.images.at(p.original_image_id).split) fail(where + ": images in different splits");
        validate_answer_set(p.original_answers, where + " (original)");
        validate_answer_set(p.complement_answers, where + " (complement)");
        if (p.mismatch != (p.original_answers.consensus == p.complement_answers.consensus)) {
            fail(where + ": mismatch flag disagrees with consensus answers");
        }
    }

    for (const auto& [tid, t] : s.tasks) {
        const std::string where = "task '" + tid + "'";
        if (tid != t.task_id) fail(where + ": key/id mismatch");
        const auto qit = s.questions.find(t.question_id);
        if (qit == s.questions.end()) fail(where + ": unknown question '" + t.question_id + "'");
        const auto& original = s.images.at(qit->second.image_id);
        if (t.candidate_image_ids.empty()) fail(where + ": no candidates");
        std::set<std::string> seen;
        double prev = -1.0;
        const std::string* prev_id = nullptr;
        for (const auto& cid : t.candidate_image_ids) {
            if (cid == original.image_id) fail(where + ": candidates include the original image");
            if (!seen.insert(cid).second) fail(where + ": duplicate candidate '" + cid + "'");
            const auto cit = s.images.find(cid);
            if (cit == s.images.end()) fail(where + ": unknown candidate '" + cid + "'");
            if (cit->second.split != original.split) fail(where + ": candidate '" + cid + "' in another split");
            const double d = squared_l2(original.features.values, cit->second.features.values);
            if (d < prev || (d == prev && prev_id && cid < *prev_id)) {
                fail(where + ": candidates not in ascending (distance, id) order");
            }
            prev = d;
            prev_id = &cid;
        }
        if (t.status == TaskStatus::open && s.results.count(tid)) fail(where + ": open task has a result");
        if (t.status != TaskStatus::open && !s.results.count(tid)) fail(where + ": closed task has no result");
    }

    for (const auto& [tid, r] : s.results) {
        const std::string where = "result for task '" + tid + "'";
        const auto tit = s.tasks.find(tid);
        if (tit == s.tasks.end()) fail(where + ": unknown task");
        const auto& t = tit->second;
        if (r.outcome.kind == OutcomeKind::pick) {
            const auto& c = t.candidate_image_ids;
            if (std::find(c.begin(), c.end(), r.outcome.image_id) == c.end()) {
                fail(where + ": pick '" + r.outcome.image_id + "' is not a candidate");
            }
            if (t.status != TaskStatus::picked) fail(where + ": task status disagrees with pick");
        } else if (t.status != TaskStatus::not_possible) {
            fail(where + ": task status disagrees with NotPossible");
        }
    }

    for (const auto& [tid, j] : s.jobs) {
        const std::string where = "answer job for task '" + tid + "'";
        const auto rit = s.results.find(tid);
        if (rit == s.results.end() || rit->second.outcome.kind != OutcomeKind::pick) {
            fail(where + ": task has no pick");
        }
        if (rit->second.outcome.image_id != j.image_id) fail(where + ": image differs from pick");
        if (j.answers.size() > kAnswersPerSet) fail(where + ": more than 10 answers");
    }
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

template <class Record, class Map>
void read_jsonl(const fs::path& file, Map& out, std::string Record::*key) {
    std::ifstream in(file);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    const std::string name = file.filename().string();
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Record rec;
        try {
            const auto j = json::parse(line);
            if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) {
                throw ValidationError("unsupported schema_version");
            }
            rec = j.get<Record>();
        } catch (const json::exception& e) {
            throw ParseError(name, lineno, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(name, lineno, e.what());
        }
        const std::string id = rec.*key;
        if (!out.emplace(id, std::move(rec)).second) {
            throw ParseError(name, lineno, "duplicate id '" + id + "'");
        }
    }
}

template <class Map>
void write_jsonl(const fs::path& file, const Map& records) {
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        for (const auto& [id, rec] : records) out << json(rec).dump() << '\n';
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

}  // namespace

DataStore load_store(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("store directory '" + dir.string() + "' does not exist");
    DataStore s;
    read_jsonl<ImageRecord>(dir / "images.jsonl", s.images, &ImageRecord::image_id);
    read_jsonl<QuestionRecord>(dir / "questions.jsonl", s.questions, &QuestionRecord::question_id);
    read_jsonl<AnswerSet>(dir / "answers.jsonl", s.answers, &AnswerSet::question_id);
    read_jsonl<ComplementaryPair>(dir / "pairs.jsonl", s.pairs, &ComplementaryPair::question_id);
    read_jsonl<AnnotationTask>(dir / "tasks.jsonl", s.tasks, &AnnotationTask::task_id);
    read_jsonl<AnnotationResult>(dir / "results.jsonl", s.results, &AnnotationResult::task_id);
    read_jsonl<AnswerJob>(dir / "jobs.jsonl", s.jobs, &AnswerJob::task_id);
    validate_store(s);
    return s;
}

void save_store(const DataStore& s, const fs::path& dir, unsigned parts) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create store directory '" + dir.string() + "'");
    }
    if (parts & kImages) write_jsonl(dir / "images.jsonl", s.images);
    if (parts & kQuestions) write_jsonl(dir / "questions.jsonl", s.questions);
    if (parts & kAnswers) write_jsonl(dir / "answers.jsonl", s.answers);
    if (parts & kPairs) write_jsonl(dir / "pairs.jsonl", s.pairs);
    if (parts & kTasks) write_jsonl(dir / "tasks.jsonl", s.tasks);
    if (parts & kResults) write_jsonl(dir / "results.jsonl", s.results);
    if (parts & kJobs) write_jsonl(dir / "jobs.jsonl", s.jobs);
}

}  // namespace vqab
