#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "vqab/checkpoint.hpp"
#include "vqab/errors.hpp"
#include "vqab/knn_index.hpp"
#include "vqab/synth_world.hpp"
#include "vqab/trainer.hpp"

namespace vqab {
namespace {

// A small world taken through simulated collection once and shared by the tests.
struct Collected {
    World world;
    DatasetSplit train_u, train_b;

    Collected() {
        WorldConfig c;
        c.n_images = 600;
        c.seed = 5;
        world = generate_world(c);
        insert_tasks(world.store, generate_tasks(world.store, compute_all_neighbors(world.store, kDefaultCandidates)));
        simulate_collection(world.store, world.latents, c, 1);
        train_u = original_split(world.store, Split::train);
        train_b = assemble_balanced(world.store, Split::train);
    }
};

const Collected& collected() {
    static const Collected c;
    return c;
}

TrainConfig quick(int epochs = 3) {
    TrainConfig c;
    c.epochs = epochs;
    c.word_dim = 8;
    c.hidden = 16;
    c.explain_dim = 8;
    c.answer_embed_dim = 8;
    return c;
}

DatasetSplit answers_only(const std::vector<std::string>& consensus) {
    DatasetSplit s;
    for (const auto& a : consensus) {
        QAInstance i;
        i.answers.consensus = a;
        s.instances.push_back(i);
    }
    return s;
}

TEST(Prior, MostCommonWithLexicographicTies) {
    EXPECT_EQ(predict_prior(answers_only({"yes", "no", "yes", "2"})), "yes");
    EXPECT_EQ(predict_prior(answers_only({"red"})), "red");
    EXPECT_EQ(predict_prior(answers_only({"yes", "no"})), "no");
    EXPECT_THROW(predict_prior(DatasetSplit{}), ValidationError);
}

TEST(Train, DeterministicForFixedSeed) {
    const auto& c = collected();
    const auto a = train(c.world.store, c.train_b, quick(), ModelKind::counterexample);
    const auto b = train(c.world.store, c.train_b, quick(), ModelKind::counterexample);
    EXPECT_EQ(a.manifest.checkpoint_hash, b.manifest.checkpoint_hash);
    EXPECT_TRUE(a.model.params == b.model.params);
    auto other = quick();
    other.seed = 2;
    EXPECT_NE(train(c.world.store, c.train_b, other, ModelKind::counterexample).manifest.checkpoint_hash,
              a.manifest.checkpoint_hash);
}

TEST(Train, ZeroEpochsKeepsInitialization) {
    const auto& c = collected();
    const auto init = init_model(ModelKind::joint, c.world.store, c.train_u, quick(0));
    const auto r = train(c.world.store, c.train_u, quick(0), ModelKind::joint);
    EXPECT_TRUE(r.model.params == init.params);
    ASSERT_EQ(r.manifest.epochs.size(), 1u);
    EXPECT_EQ(r.manifest.epochs[0].epoch, 0);
}

TEST(Train, LossDecreasesOnToyData) {
    const auto& c = collected();
    ASSERT_GE(c.train_u.instances.size(), 250u);
    for (ModelKind kind : {ModelKind::language_only, ModelKind::joint, ModelKind::counterexample}) {
        const auto r = train(c.world.store, c.train_b, quick(20), kind);
        ASSERT_EQ(r.manifest.epochs.size(), 21u);
        EXPECT_LT(r.manifest.epochs.back().train_loss, r.manifest.epochs.front().train_loss) << to_string(kind);
    }
}

TEST(Train, LambdaZeroFreezesExplainHeadAndTracksJoint) {
    const auto& c = collected();
    auto cfg = quick(2);
    cfg.lambda = 0.0;
    const auto ce_init = init_model(ModelKind::counterexample, c.world.store, c.train_b, cfg);
    auto joint_init = ce_init;
    joint_init.kind = ModelKind::joint;

    std::vector<ModelParams> ce_steps, joint_steps;
    TrainHooks ce_hooks{[&](long, const ModelParams& p) { ce_steps.push_back(p); }};
    TrainHooks joint_hooks{[&](long, const ModelParams& p) { joint_steps.push_back(p); }};
    train_model(ce_init, c.world.store, c.train_b, cfg, nullptr, ce_hooks);
    train_model(joint_init, c.world.store, c.train_b, cfg, nullptr, joint_hooks);
    ASSERT_EQ(ce_steps.size(), joint_steps.size());
    ASSERT_FALSE(ce_steps.empty());
    const auto init_blocks = ce_init.params.blocks();
    for (std::size_t s = 0; s < ce_steps.size(); ++s) {
        const auto cb = ce_steps[s].blocks();
        const auto jb = joint_steps[s].blocks();
        for (std::size_t b = 0; b < cb.size(); ++b) {
            const std::vector<double> cv(cb[b].values.begin(), cb[b].values.end());
            if (is_explain_block(cb[b].name)) {
                const std::vector<double> iv(init_blocks[b].values.begin(), init_blocks[b].values.end());
                EXPECT_EQ(cv, iv) << cb[b].name << " step " << s;
            } else {
                const std::vector<double> jv(jb[b].values.begin(), jb[b].values.end());
                EXPECT_EQ(cv, jv) << cb[b].name << " step " << s;
            }
        }
    }
}

TEST(Train, AdamAndSgdHalveLossOnSeparableTask) {
    WorldConfig wc;
    wc.n_images = 200;
    wc.n_attributes = 1;
    wc.values_per_attribute = 2;
    wc.feature_dim = 8;
    wc.noise_sigma = 0.05;
    wc.prior_strength = 0.0;
    wc.questions_per_image = 1;
    wc.presence_prob = 1.0;
    wc.binary_fraction = 0.0;
    wc.answer_noise = 0.0;
    const auto w = generate_world(wc);
    const auto split = original_split(w.store, Split::train);
    for (OptimizerKind opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
        auto cfg = quick(100);
        cfg.optimizer = opt;
        cfg.learning_rate = opt == OptimizerKind::sgd ? 0.5 : 0.01;
        const auto r = train(w.store, split, cfg, ModelKind::joint);
        EXPECT_LT(r.manifest.epochs.back().train_loss, 0.5 * r.manifest.epochs.front().train_loss)
            << to_string(opt);
    }
}

TEST(Train, Errors) {
    const auto& c = collected();
    EXPECT_THROW(train(c.world.store, DatasetSplit{}, quick(), ModelKind::joint), ValidationError);
    // The test split has no tasks picked in the training data sense: strip picks.
    DataStore no_picks = c.world.store;
    no_picks.tasks.clear();
    no_picks.results.clear();
    no_picks.pairs.clear();
    no_picks.jobs.clear();
    EXPECT_THROW(train(no_picks, original_split(no_picks, Split::train), quick(), ModelKind::counterexample),
                 ValidationError);
    auto bad = quick();
    bad.learning_rate = 0.0;
    EXPECT_THROW(train(c.world.store, c.train_u, bad, ModelKind::joint), ValidationError);
}

TEST(Train, NonFiniteLossAborts) {
    const auto& c = collected();
    DataStore broken = c.world.store;
    const auto& victim = c.train_u.instances.front().image_id;
    broken.images.at(victim).features.values[0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(train(broken, c.train_u, quick(1), ModelKind::joint), TrainingDivergedError);
}

TEST(Train, FingerprintsAreStableAndSensitive) {
    const auto& c = collected();
    const auto f = fingerprint(c.world.store, c.train_u);
    EXPECT_EQ(f, fingerprint(c.world.store, original_split(c.world.store, Split::train)));
    EXPECT_NE(f, fingerprint(c.world.store, c.train_b));
    EXPECT_EQ(f.size(), 64u);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
    const auto& c = collected();
    testing::TempDir dir("ckpt");
    for (ModelKind kind : {ModelKind::prior, ModelKind::counterexample}) {
        const auto r = train(c.world.store, c.train_b, quick(1), kind);
        save_checkpoint(r.model, dir.path() / "m.json");
        const auto loaded = load_checkpoint(dir.path() / "m.json");
        EXPECT_EQ(checkpoint_hash(loaded), r.manifest.checkpoint_hash);
        EXPECT_TRUE(loaded.params == r.model.params);
        for (const auto& inst : c.train_b.instances) {
            const auto& f = c.world.store.image(inst.image_id).features.values;
            ASSERT_EQ(loaded.predict(inst.tokens, f), r.model.predict(inst.tokens, f));
        }
    }
}

TEST(Checkpoint, RejectsWrongFormat) {
    testing::TempDir dir("ckpt_bad");
    EXPECT_THROW(checkpoint_from_json(json{{"format", "other"}}), ValidationError);
    EXPECT_THROW(load_checkpoint(dir.path() / "missing.json"), IoError);
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
    auto c = quick(7);
    c.mix = MixMode::shared;
    c.optimizer = OptimizerKind::sgd;
    EXPECT_EQ(train_config_from_json(to_json(c)), c);
    EXPECT_EQ(train_config_from_json(json::object()), TrainConfig{});
    EXPECT_THROW(train_config_from_json(json{{"learning_rat", 0.1}}), ValidationError);
}

}  // namespace
}  // namespace vqab
