#include "vqab/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "vqab/balancing.hpp"
#include "vqab/checkpoint.hpp"
#include "vqab/errors.hpp"
#include "vqab/evaluator.hpp"
#include "vqab/hashing.hpp"
#include "vqab/knn_index.hpp"

namespace vqab {

namespace {

const ModelKind kKinds[] = {ModelKind::prior, ModelKind::language_only, ModelKind::joint, ModelKind::counterexample};

}  // namespace

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig c;
    for (ModelKind k : kKinds) c.train.emplace(k, TrainConfig{});
    return c;
}

void PipelineConfig::validate() const {
    world.validate();
    if (k == 0) throw ValidationError("k must be positive");
    for (ModelKind kind : kKinds) {
        if (!train.contains(kind)) {
            throw ValidationError("missing train config for model '" + std::string(to_string(kind)) + "'");
        }
    }
    for (const auto& [kind, tc] : train) tc.validate();
    if (eval_modes.empty()) throw ValidationError("eval_modes must not be empty");
}

json to_json(const PipelineConfig& c) {
    json train = json::object();
    for (const auto& [kind, tc] : c.train) train[std::string(to_string(kind))] = to_json(tc);
    json modes = json::array();
    for (auto m : c.eval_modes) modes.push_back(std::string(to_string(m)));
    return json{{"world", to_json(c.world)},
                {"k", c.k},
                {"train", train},
                {"eval_modes", modes},
                {"annotation_seed", c.annotation_seed},
                {"explain_seed", c.explain_seed}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
    static const char* known[] = {"world", "k", "train", "eval_modes", "annotation_seed", "explain_seed"};
    for (const auto& [key, v] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ValidationError("unknown pipeline config key '" + key + "'");
        }
    }
    PipelineConfig c = PipelineConfig::defaults();
    if (j.contains("world")) c.world = world_config_from_json(j.at("world"));
    c.k = j.value("k", c.k);
    if (j.contains("train")) {
        for (const auto& [name, tc] : j.at("train").items()) {
            c.train[model_kind_from_string(name)] = train_config_from_json(tc);
        }
    }
    if (j.contains("eval_modes")) {
        c.eval_modes.clear();
        for (const auto& m : j.at("eval_modes")) c.eval_modes.push_back(accuracy_mode_from_string(m.get<std::string>()));
    }
    c.annotation_seed = j.value("annotation_seed", c.annotation_seed);
    c.explain_seed = j.value("explain_seed", c.explain_seed);
    c.validate();
    return c;
}

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::string pct(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
    return buf;
}

struct Trained {
    Model unbalanced;
    Model balanced;
};

}  // namespace

ReportBundle run_experiment(const PipelineConfig& config, const std::optional<std::filesystem::path>& work_dir) {
    config.validate();
    const auto store_dir = work_dir ? std::optional(*work_dir / "store") : std::nullopt;
    if (store_dir) std::filesystem::create_directories(*store_dir);

    World world = stage("synth", [&] {
        auto w = generate_world(config.world);
        if (store_dir) save_world(w, *store_dir);
        return w;
    });
    DataStore& store = world.store;

    auto persist = [&] {
        if (store_dir) save_store(store, *store_dir);
    };

    const auto neighbors = stage("index", [&] {
        auto lists = compute_all_neighbors(store, config.k);
        if (work_dir) write_neighbors(*work_dir / "neighbors.jsonl", lists);
        return lists;
    });

    stage("tasks", [&] {
        insert_tasks(store, generate_tasks(store, neighbors, config.k));
        persist();
        return 0;
    });

    const CollectionSummary collected = stage("annotate", [&] {
        try {
            auto s = simulate_collection(store, world.latents, config.world, config.annotation_seed);
            persist();
            return s;
        } catch (...) {
            persist();
            throw;
        }
    });

    struct Splits {
        DatasetSplit u_train, b_train, u_test, b_test;
    };
    const Splits splits = stage("assemble", [&] {
        return Splits{original_split(store, Split::train), assemble_balanced(store, Split::train),
                      original_split(store, Split::test), assemble_balanced(store, Split::test)};
    });

    std::map<ModelKind, Trained> models;
    json training = json::object();
    for (ModelKind kind : kKinds) {
        const std::string name(to_string(kind));
        stage(("train " + name).c_str(), [&] {
            const auto& tc = config.train.at(kind);
            auto u = train(store, splits.u_train, tc, kind);
            auto b = train(store, splits.b_train, tc, kind);
            if (work_dir) {
                std::filesystem::create_directories(*work_dir / "checkpoints");
                save_checkpoint(u.model, *work_dir / "checkpoints" / (name + "_unbalanced.json"));
                save_checkpoint(b.model, *work_dir / "checkpoints" / (name + "_balanced.json"));
            }
            auto summary = [](const TrainResult& r) {
                json j{{"checkpoint_hash", r.manifest.checkpoint_hash}};
                if (!r.manifest.epochs.empty()) {
                    const auto& last = r.manifest.epochs.back();
                    j["epochs"] = static_cast<int>(r.manifest.epochs.size()) - 1;
                    j["final_train_loss"] = last.train_loss;
                    j["final_train_accuracy"] = last.train_accuracy;
                }
                return j;
            };
            training[name] = {{"unbalanced", summary(u)}, {"balanced", summary(b)}};
            models.emplace(kind, Trained{std::move(u.model), std::move(b.model)});
            return 0;
        });
    }

    json report;
    report["tool"] = "vqab";
    report["tool_version"] = kToolVersion;
    report["config"] = to_json(config);
    report["config_hash"] = sha256_hex(to_json(config).dump());
    report["dataset_fingerprints"] = {{"train_unbalanced", fingerprint(store, splits.u_train)},
                                      {"train_balanced", fingerprint(store, splits.b_train)},
                                      {"test_unbalanced", fingerprint(store, splits.u_test)},
                                      {"test_balanced", fingerprint(store, splits.b_test)}};
    report["collection"] = {{"tasks", store.tasks.size()},
                            {"picked", collected.picked},
                            {"not_possible", collected.not_possible},
                            {"pairs", collected.pairs},
                            {"mismatched", splits.b_train.stats.mismatched + splits.b_test.stats.mismatched}};
    report["training"] = training;

    std::ostringstream md;
    md << "# Experiment report\n\n";
    md << "- tool version: " << kToolVersion << "\n";
    md << "- config hash: `" << report["config_hash"].get<std::string>() << "`\n";
    md << "- world seed: " << config.world.seed << ", prior strength: " << config.world.prior_strength
       << ", images: " << config.world.n_images << "\n";
    md << "- tasks: " << store.tasks.size() << ", picked: " << collected.picked
       << ", not possible: " << collected.not_possible << "\n\n";

    // Accuracy grid: train variant x test variant, per model and accuracy mode.
    json grid = json::object();
    json pairs = json::object();
    stage("evaluate", [&] {
        for (AccuracyMode mode : config.eval_modes) {
            const std::string mode_name(to_string(mode));
            md << "## Accuracy (" << mode_name << ", %)\n\n";
            md << "| model | UU | UB | BU | BB |\n|---|---|---|---|---|\n";
            for (ModelKind kind : kKinds) {
                const std::string name(to_string(kind));
                const auto& t = models.at(kind);
                ExplainOptions off;
                off.enabled = false;
                const auto uu = evaluate(t.unbalanced, store, splits.u_test, mode, off);
                const auto ub = evaluate(t.unbalanced, store, splits.b_test, mode, off);
                const auto bu = evaluate(t.balanced, store, splits.u_test, mode, off);
                const auto bb = evaluate(t.balanced, store, splits.b_test, mode, off);
                grid[mode_name][name] = {{"UU", uu.overall}, {"UB", ub.overall}, {"BU", bu.overall}, {"BB", bb.overall}};
                grid[mode_name + "_per_answer_type"][name] = {{"UU", uu.per_answer_type},
                                                              {"UB", ub.per_answer_type},
                                                              {"BU", bu.per_answer_type},
                                                              {"BB", bb.per_answer_type}};
                md << "| " << name << " | " << pct(uu.overall) << " | " << pct(ub.overall) << " | " << pct(bu.overall)
                   << " | " << pct(bb.overall) << " |\n";
                if (mode == config.eval_modes.front() && ub.pairs && bb.pairs) {
                    auto pj = [](const PairMetrics& p) {
                        return json{{"pairs", p.pairs},
                                    {"both_correct", p.both_correct},
                                    {"identical_preds", p.identical},
                                    {"different_preds", p.different}};
                    };
                    pairs[name] = {{"unbalanced_trained", pj(*ub.pairs)}, {"balanced_trained", pj(*bb.pairs)}};
                }
            }
            md << "\n";
        }
        return 0;
    });
    report["accuracy"] = grid;
    report["pair_metrics"] = pairs;

    md << "## Pair metrics on the balanced test split (%)\n\n";
    md << "| model | trained on | both correct | identical | different |\n|---|---|---|---|---|\n";
    for (const auto& [name, v] : pairs.items()) {
        for (const char* variant : {"unbalanced_trained", "balanced_trained"}) {
            const auto& p = v.at(variant);
            md << "| " << name << " | " << (variant[0] == 'u' ? "U" : "B") << " | "
               << pct(p.at("both_correct").get<double>()) << " | " << pct(p.at("identical_preds").get<double>())
               << " | " << pct(p.at("different_preds").get<double>()) << " |\n";
        }
    }
    md << "\n";

    // Counter-example ranking on the balanced test split.
    const EvalReport explain = stage("explain", [&] {
        ExplainOptions opt;
        opt.vqa_model = &models.at(ModelKind::joint).balanced;
        opt.seed = config.explain_seed;
        return evaluate(models.at(ModelKind::counterexample).balanced, store, splits.b_test,
                        config.eval_modes.front(), opt);
    });
    report["recall_at_5"] = {{"tasks", explain.explain_tasks}, {"methods", explain.recall_at_5}};
    md << "## Counter-example Recall@5 (%, " << explain.explain_tasks << " tasks)\n\n| method | recall@5 |\n|---|---|\n";
    for (const char* m : {"random", "distance", "vqa_prob", "trained"}) {
        const auto it = explain.recall_at_5.find(m);
        md << "| " << m << " | " << (it == explain.recall_at_5.end() ? std::string("n/a") : pct(it->second)) << " |\n";
    }
    md << "\n";

    const auto ru = balance_report(splits.u_train);
    const auto rb = balance_report(splits.b_train);
    report["balance"] = {{"train_unbalanced", to_json(ru)}, {"train_balanced", to_json(rb)}};
    md << "## Answer balance (train)\n\n";
    md << "- weighted entropy, unbalanced: " << ru.weighted_entropy << " bits\n";
    md << "- weighted entropy, balanced: " << rb.weighted_entropy << " bits\n\n";
    md << "### Balanced\n\n" << to_markdown(rb);

    return ReportBundle{std::move(report), md.str()};
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::filesystem::path& file, const std::string& text) {
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + file.string() + "'");
        out << text;
        if (!out) throw IoError("write failed for '" + file.string() + "'");
    };
    write(dir / "report.json", bundle.report.dump(2) + "\n");
    write(dir / "report.md", bundle.markdown);
}

}  // namespace vqab
