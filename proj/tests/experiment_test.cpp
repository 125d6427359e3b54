#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "vqab/evaluator.hpp"
#include "vqab/experiment.hpp"
#include "vqab/knn_index.hpp"

namespace vqab {
namespace {

PipelineConfig small(int epochs) {
    auto c = PipelineConfig::defaults();
    c.world.n_images = 400;
    c.world.seed = 3;
    for (auto& [kind, tc] : c.train) {
        tc.epochs = epochs;
        tc.hidden = 16;
        tc.word_dim = 8;
        tc.explain_dim = 8;
        tc.answer_embed_dim = 8;
    }
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

TEST(Experiment, SameSeedGivesIdenticalBundles) {
    testing::TempDir a("exp_a"), b("exp_b");
    const auto cfg = small(2);
    write_bundle(run_experiment(cfg), a.path());
    write_bundle(run_experiment(cfg), b.path());
    EXPECT_EQ(slurp(a.path() / "report.json"), slurp(b.path() / "report.json"));
    EXPECT_EQ(slurp(a.path() / "report.md"), slurp(b.path() / "report.md"));
    EXPECT_FALSE(slurp(a.path() / "report.md").empty());
}

TEST(Experiment, ReportIsStructurallyComplete) {
    const auto bundle = run_experiment(small(2));
    const auto& r = bundle.report;
    EXPECT_EQ(r.at("tool_version"), kToolVersion);
    EXPECT_EQ(r.at("config_hash").get<std::string>().size(), 64u);
    EXPECT_EQ(r.at("dataset_fingerprints").size(), 4u);
    for (const char* kind : {"prior", "lang", "joint", "counterexample"}) {
        const auto& cell = r.at("accuracy").at("consensus").at(kind);
        for (const char* k : {"UU", "UB", "BU", "BB"}) {
            const double v = cell.at(k);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    for (const char* m : {"random", "distance", "vqa_prob", "trained"}) {
        EXPECT_TRUE(r.at("recall_at_5").at("methods").contains(m)) << m;
    }
    EXPECT_TRUE(r.at("pair_metrics").contains("joint"));
    EXPECT_NE(bundle.markdown.find("| joint |"), std::string::npos);
    EXPECT_NE(bundle.markdown.find("| trained |"), std::string::npos);
}

TEST(Experiment, ZeroEpochsReportsUntrainedAccuracy) {
    const auto cfg = small(0);
    const auto report = run_experiment(cfg).report;

    // Rebuild the same data independently and score freshly initialized models.
    auto w = generate_world(cfg.world);
    insert_tasks(w.store, generate_tasks(w.store, compute_all_neighbors(w.store, cfg.k), cfg.k));
    simulate_collection(w.store, w.latents, cfg.world, cfg.annotation_seed);
    const auto u_train = original_split(w.store, Split::train);
    const auto u_test = original_split(w.store, Split::test);
    ExplainOptions off;
    off.enabled = false;
    for (ModelKind kind : {ModelKind::prior, ModelKind::language_only, ModelKind::joint}) {
        const auto m = init_model(kind, w.store, u_train, cfg.train.at(kind));
        const double expected = evaluate(m, w.store, u_test, AccuracyMode::consensus, off).overall;
        EXPECT_DOUBLE_EQ(report.at("accuracy").at("consensus").at(std::string(to_string(kind))).at("UU").get<double>(),
                         expected);
    }
}

TEST(Experiment, ConfigJsonRoundTrip) {
    auto c = small(4);
    c.eval_modes = {AccuracyMode::simple, AccuracyMode::consensus};
    const auto back = pipeline_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_THROW(pipeline_config_from_json(json{{"wrld", json::object()}}), ValidationError);
}

TEST(Experiment, StageFailureNamesStageAndKeepsState) {
    testing::TempDir dir("exp_fail");
    auto cfg = small(1);
    cfg.world.n_images = 40;  // too few same-split neighbours for 24 candidates
    try {
        run_experiment(cfg, dir.path());
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "tasks");
    }
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "store" / "images.jsonl"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "neighbors.jsonl"));
}

}  // namespace
}  // namespace vqab
