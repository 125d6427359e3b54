#include "vqab/synth_world.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "vqab/answers.hpp"
#include "vqab/balancing.hpp"
#include "vqab/errors.hpp"

namespace vqab {

void WorldConfig::validate() const {
    if (n_images < 2) throw ValidationError("n_images must be >= 2");
    if (n_attributes < 1) throw ValidationError("n_attributes must be >= 1");
    if (values_per_attribute < 2) throw ValidationError("values_per_attribute must be >= 2");
    if (feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
    if (!(prior_strength >= 0.0)) throw ValidationError("prior_strength must be >= 0");
    if (questions_per_image < 1) throw ValidationError("questions_per_image must be >= 1");
    auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!unit(presence_prob) || !unit(binary_fraction) || !unit(answer_noise)) {
        throw ValidationError("probabilities must lie in [0, 1]");
    }
    if (!unit(train_fraction) || !unit(val_fraction) || train_fraction + val_fraction > 1.0) {
        throw ValidationError("split fractions must lie in [0, 1] and sum to at most 1");
    }
}

json to_json(const WorldConfig& c) {
    return json{{"n_images", c.n_images},
                {"n_attributes", c.n_attributes},
                {"values_per_attribute", c.values_per_attribute},
                {"feature_dim", c.feature_dim},
                {"noise_sigma", c.noise_sigma},
                {"prior_strength", c.prior_strength},
                {"questions_per_image", c.questions_per_image},
                {"seed", c.seed},
                {"presence_prob", c.presence_prob},
                {"binary_fraction", c.binary_fraction},
                {"answer_noise", c.answer_noise},
                {"train_fraction", c.train_fraction},
                {"val_fraction", c.val_fraction}};
}

WorldConfig world_config_from_json(const json& j) {
    WorldConfig c;
    const json defaults = to_json(c);
    for (const auto& [k, v] : j.items()) {
        if (!defaults.contains(k)) throw ValidationError("unknown world config key '" + k + "'");
    }
    c.n_images = j.value("n_images", c.n_images);
    c.n_attributes = j.value("n_attributes", c.n_attributes);
    c.values_per_attribute = j.value("values_per_attribute", c.values_per_attribute);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.prior_strength = j.value("prior_strength", c.prior_strength);
    c.questions_per_image = j.value("questions_per_image", c.questions_per_image);
    c.seed = j.value("seed", c.seed);
    c.presence_prob = j.value("presence_prob", c.presence_prob);
    c.binary_fraction = j.value("binary_fraction", c.binary_fraction);
    c.answer_noise = j.value("answer_noise", c.answer_noise);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.validate();
    return c;
}

std::vector<double> value_distribution(const WorldConfig& c) {
    std::vector<double> p(static_cast<std::size_t>(c.values_per_attribute), 1.0);
    p[0] = std::exp(c.prior_strength);
    double z = 0.0;
    for (double v : p) z += v;
    for (double& v : p) v /= z;
    return p;
}

namespace {

std::string attribute_word(int k) { return "attribute_" + std::to_string(k); }
std::string value_word(int v) { return "value_" + std::to_string(v); }

std::string padded(const char* prefix, int i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
    return buf;
}

int parse_suffix(const std::string& token, const std::string& prefix) {
    if (!token.starts_with(prefix) || token.size() == prefix.size()) {
        throw ValidationError("expected '" + prefix + "N', got '" + token + "'");
    }
    int v = 0;
    for (std::size_t i = prefix.size(); i < token.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(token[i]))) {
            throw ValidationError("expected '" + prefix + "N', got '" + token + "'");
        }
        v = v * 10 + (token[i] - '0');
    }
    return v;
}

}  // namespace

World generate_world(const WorldConfig& config) {
    config.validate();
    World w;
    w.config = config;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int A = config.n_attributes;
    const int V = config.values_per_attribute;
    const int d = config.feature_dim;

    // Columns of the attribute embedding have expected unit norm.
    std::vector<double> embed(static_cast<std::size_t>(d * A * V));
    const double col_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& x : embed) x = normal(rng) * col_scale;

    const auto probs = value_distribution(config);
    std::discrete_distribution<int> value_dist(probs.begin(), probs.end());
    const int width = static_cast<int>(std::to_string(config.n_images).size());

    for (int i = 0; i < config.n_images; ++i) {
        LatentScene scene;
        scene.image_id = padded("img", i, width);
        scene.attributes.resize(static_cast<std::size_t>(A));
        for (int k = 0; k < A; ++k) {
            scene.attributes[static_cast<std::size_t>(k)] = unit(rng) < config.presence_prob ? value_dist(rng) : -1;
        }

        ImageRecord img;
        img.image_id = scene.image_id;
        img.features.values.assign(static_cast<std::size_t>(d), 0.0);
        for (int k = 0; k < A; ++k) {
            const int v = scene.attributes[static_cast<std::size_t>(k)];
            if (v < 0) continue;
            const std::size_t col = static_cast<std::size_t>(k * V + v);
            for (int r = 0; r < d; ++r) img.features.values[static_cast<std::size_t>(r)] += embed[col * d + r];
        }
        for (double& x : img.features.values) x += config.noise_sigma * normal(rng);
        const double u = unit(rng);
        img.split = u < config.train_fraction                          ? Split::train
                    : u < config.train_fraction + config.val_fraction ? Split::val
                                                                       : Split::test;

        // Questions about distinct present attributes.
        std::vector<int> present;
        for (int k = 0; k < A; ++k) {
            if (scene.attributes[static_cast<std::size_t>(k)] >= 0) present.push_back(k);
        }
        std::shuffle(present.begin(), present.end(), rng);
        const int nq = std::min<int>(config.questions_per_image, static_cast<int>(present.size()));
        for (int j = 0; j < nq; ++j) {
            const int k = present[static_cast<std::size_t>(j)];
            QuestionRecord q;
            q.question_id = padded("q", i, width) + "_" + std::to_string(j);
            q.image_id = img.image_id;
            if (unit(rng) < config.binary_fraction) {
                q.tokens = {"is", attribute_word(k), value_word(value_dist(rng))};
            } else {
                q.tokens = {"what", "is", attribute_word(k)};
            }
            q.question_type = question_type_of(q.tokens);
            AnswerSet a;
            a.question_id = q.question_id;
            a.answers = simulated_answers(scene, q.tokens, config, rng);
            a.consensus = consensus_answer(a.answers);
            w.store.answers.emplace(q.question_id, std::move(a));
            w.store.questions.emplace(q.question_id, std::move(q));
        }
        w.store.images.emplace(img.image_id, std::move(img));
        w.latents.emplace(scene.image_id, std::move(scene));
    }
    return w;
}

ParsedQuestion parse_question(std::span<const std::string> tokens) {
    ParsedQuestion p;
    if (tokens.size() == 3 && tokens[0] == "what" && tokens[1] == "is") {
        p.attribute = parse_suffix(tokens[2], "attribute_");
    } else if (tokens.size() == 3 && tokens[0] == "is") {
        p.attribute = parse_suffix(tokens[1], "attribute_");
        p.value = parse_suffix(tokens[2], "value_");
    } else {
        std::string text;
        for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
        throw ValidationError("question '" + text + "' matches no world template");
    }
    return p;
}

namespace {

int latent_value(const LatentScene& scene, const ParsedQuestion& q) {
    if (q.attribute < 0 || q.attribute >= static_cast<int>(scene.attributes.size())) {
        throw ValidationError("unknown attribute index " + std::to_string(q.attribute));
    }
    return scene.attributes[static_cast<std::size_t>(q.attribute)];
}

}  // namespace

std::string oracle_answer(const LatentScene& scene, std::span<const std::string> tokens) {
    const auto q = parse_question(tokens);
    const int v = latent_value(scene, q);
    if (q.value) return v == *q.value ? "yes" : "no";
    return v < 0 ? "none" : value_word(v);
}

bool premise_holds(const LatentScene& scene, std::span<const std::string> tokens) {
    return latent_value(scene, parse_question(tokens)) >= 0;
}

std::vector<std::string> simulated_answers(const LatentScene& scene, std::span<const std::string> tokens,
                                           const WorldConfig& config, std::mt19937_64& rng) {
    const auto q = parse_question(tokens);
    const std::string truth = oracle_answer(scene, tokens);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> value(0, config.values_per_attribute - 1);
    std::vector<std::string> out;
    out.reserve(kAnswersPerSet);
    for (std::size_t i = 0; i < kAnswersPerSet; ++i) {
        if (unit(rng) >= config.answer_noise) {
            out.push_back(truth);
        } else if (q.value) {
            out.push_back(unit(rng) < 0.5 ? "yes" : "no");
        } else {
            out.push_back(value_word(value(rng)));
        }
    }
    return out;
}

AnnotationResult simulated_annotator(const DataStore& store, const Latents& latents, const AnnotationTask& task,
                                     std::mt19937_64& rng, std::int64_t timestamp_ms) {
    const auto& tokens = store.question(task.question_id).tokens;
    std::vector<const std::string*> qualifying;
    for (const auto& cid : task.candidate_image_ids) {
        const auto& scene = latents.at(cid);
        if (premise_holds(scene, tokens) && oracle_answer(scene, tokens) != task.shown_answer) {
            qualifying.push_back(&cid);
        }
    }
    AnnotationResult r;
    r.task_id = task.task_id;
    r.annotator_id = "simulated";
    r.timestamp_ms = timestamp_ms;
    if (qualifying.empty()) {
        r.outcome = AnnotationOutcome::not_possible();
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, qualifying.size() - 1);
        r.outcome = AnnotationOutcome::pick(*qualifying[pick(rng)]);
    }
    return r;
}

CollectionSummary simulate_collection(DataStore& store, const Latents& latents, const WorldConfig& config,
                                      std::uint64_t seed) {
    CollectionSummary s;
    std::mt19937_64 rng(seed);
    std::vector<std::string> open;
    for (const auto& [tid, t] : store.tasks) {
        if (t.status == TaskStatus::open) open.push_back(tid);
    }
    std::int64_t clock = 0;
    for (const auto& tid : open) {
        const auto result = simulated_annotator(store, latents, store.task(tid), rng, clock++);
        ingest_result(store, result);
        if (result.outcome.kind == OutcomeKind::not_possible) {
            ++s.not_possible;
            continue;
        }
        ++s.picked;
        const auto& tokens = store.question(store.task(tid).question_id).tokens;
        const auto answers = simulated_answers(latents.at(result.outcome.image_id), tokens, config, rng);
        aggregate_round(store, tid, answers);
        ++s.pairs;
    }
    return s;
}

void write_latents(const std::filesystem::path& file, const Latents& latents) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    for (const auto& [id, s] : latents) {
        out << json{{"schema_version", kSchemaVersion}, {"image_id", id}, {"attributes", s.attributes}}.dump() << '\n';
    }
    if (!out) throw IoError("write failed for '" + file.string() + "'");
}

Latents read_latents(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read '" + file.string() + "'");
    Latents out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            LatentScene s{j.at("image_id").get<std::string>(), j.at("attributes").get<std::vector<int>>()};
            out.emplace(s.image_id, std::move(s));
        } catch (const json::exception& e) {
            throw ParseError(file.filename().string(), lineno, e.what());
        }
    }
    return out;
}

void save_world(const World& world, const std::filesystem::path& dir) {
    save_store(world.store, dir);
    write_latents(dir / "latents.jsonl", world.latents);
    std::ofstream out(dir / "world.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write world.json in '" + dir.string() + "'");
    out << to_json(world.config).dump(2) << '\n';
}

}  // namespace vqab
