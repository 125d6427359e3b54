#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "test_util.hpp"
#include "vqab/balancing.hpp"
#include "vqab/errors.hpp"
#include "vqab/knn_index.hpp"
#include "vqab/synth_world.hpp"

namespace vqab {
namespace {

std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

std::map<std::string, std::map<std::string, std::size_t>> consensus_by_type(const DataStore& s) {
    std::map<std::string, std::map<std::string, std::size_t>> out;
    for (const auto& [qid, q] : s.questions) ++out[q.question_type][s.answer_set(qid).consensus];
    return out;
}

TEST(SynthWorld, BalancedBinaryQuestionsAreUniform) {
    WorldConfig c;
    c.n_images = 2000;
    c.values_per_attribute = 2;
    c.prior_strength = 0.0;
    c.binary_fraction = 1.0;
    c.answer_noise = 0.0;
    const auto w = generate_world(c);
    const auto hist = consensus_by_type(w.store);
    ASSERT_EQ(hist.size(), 1u);
    const auto& h = hist.begin()->second;
    double n = 0;
    for (const auto& [a, k] : h) n += static_cast<double>(k);
    const double sigma = std::sqrt(n * 0.25);
    EXPECT_NEAR(static_cast<double>(h.at("yes")), n / 2, 3 * sigma);
    EXPECT_NEAR(static_cast<double>(h.at("no")), n / 2, 3 * sigma);
}

TEST(SynthWorld, ZeroNoiseIdenticalAttributesIdenticalFeatures) {
    WorldConfig c;
    c.n_images = 400;
    c.n_attributes = 2;
    c.values_per_attribute = 2;
    c.noise_sigma = 0.0;
    const auto w = generate_world(c);
    std::map<std::vector<int>, const ImageRecord*> seen;
    int matched = 0;
    for (const auto& [id, scene] : w.latents) {
        const auto& img = w.store.image(id);
        const auto [it, fresh] = seen.emplace(scene.attributes, &img);
        if (!fresh) {
            EXPECT_EQ(img.features.values, it->second->features.values);
            ++matched;
        } else {
            for (const auto& [attrs, other] : seen) {
                if (attrs != scene.attributes) EXPECT_NE(img.features.values, other->features.values);
            }
        }
    }
    EXPECT_GT(matched, 100);
}

TEST(SynthWorld, StrongPriorSkewsEveryType) {
    WorldConfig c;
    c.prior_strength = 5.0;
    const auto w = generate_world(c);
    const auto p = value_distribution(c);
    // Monte-Carlo check against the tilted sampler itself.
    std::size_t zero = 0, present = 0;
    for (const auto& [id, s] : w.latents) {
        for (int v : s.attributes) {
            if (v < 0) continue;
            ++present;
            zero += v == 0;
        }
    }
    const double share = static_cast<double>(zero) / static_cast<double>(present);
    EXPECT_NEAR(share, p[0], 4 * std::sqrt(p[0] * (1 - p[0]) / static_cast<double>(present)));
    for (const auto& [type, h] : consensus_by_type(w.store)) {
        std::size_t n = 0, top = 0;
        for (const auto& [a, k] : h) {
            n += k;
            top = std::max(top, k);
        }
        EXPECT_GT(static_cast<double>(top) / static_cast<double>(n), 0.8) << type;
    }
}

TEST(SynthWorld, ValueDistributionUniformAtZeroBeta) {
    WorldConfig c;
    c.prior_strength = 0.0;
    for (double v : value_distribution(c)) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(SynthWorld, DeterministicPerSeed) {
    WorldConfig c;
    c.n_images = 200;
    const auto a = generate_world(c);
    const auto b = generate_world(c);
    EXPECT_EQ(a.store, b.store);
    EXPECT_EQ(a.latents, b.latents);
    c.seed = 2;
    EXPECT_NE(generate_world(c).store, a.store);
    validate_store(a.store);
}

TEST(SynthWorld, ConfigValidationAndJson) {
    WorldConfig c;
    c.values_per_attribute = 1;
    EXPECT_THROW(c.validate(), ValidationError);
    c = WorldConfig{};
    c.noise_sigma = -1;
    EXPECT_THROW(c.validate(), ValidationError);
    c = WorldConfig{};
    c.prior_strength = 3.5;
    EXPECT_EQ(world_config_from_json(to_json(c)), c);
    EXPECT_THROW(world_config_from_json(json{{"betta", 1}}), ValidationError);
}

TEST(OracleAnswer, Examples) {
    const LatentScene s{"img", {2, 3, -1}};
    EXPECT_EQ(oracle_answer(s, words({"what", "is", "attribute_1"})), "value_3");
    EXPECT_EQ(oracle_answer(s, words({"is", "attribute_0", "value_2"})), "yes");
    EXPECT_EQ(oracle_answer(s, words({"is", "attribute_0", "value_1"})), "no");
    EXPECT_FALSE(premise_holds(s, words({"what", "is", "attribute_2"})));
    EXPECT_THROW(oracle_answer(s, words({"what", "is", "attribute_7"})), ValidationError);
    EXPECT_THROW(oracle_answer(s, words({"how", "many"})), ValidationError);
}

// Store with one question on `orig` and candidates c0..c{n-1} described by their latents.
struct Fixture {
    DataStore store;
    Latents latents;
    AnnotationTask task;

    Fixture(const std::vector<std::string>& tokens, const std::string& shown, const std::vector<std::vector<int>>& cands) {
        latents.emplace("orig", LatentScene{"orig", {0, 0}});
        store.images.emplace("orig", testing::image("orig", {0.0}));
        store.questions.emplace("q", QuestionRecord{"q", "orig", tokens, "what is"});
        task = AnnotationTask{"task_q", "q", shown, {}, TaskStatus::open};
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const std::string id = "c" + std::to_string(i);
            latents.emplace(id, LatentScene{id, cands[i]});
            store.images.emplace(id, testing::image(id, {static_cast<double>(i + 1)}));
            task.candidate_image_ids.push_back(id);
        }
    }
};

TEST(SimulatedAnnotator, AllSameAnswerIsNotPossible) {
    Fixture f(words({"what", "is", "attribute_0"}), "value_0", {{0, 1}, {0, 2}, {0, 3}});
    std::mt19937_64 rng(1);
    EXPECT_EQ(simulated_annotator(f.store, f.latents, f.task, rng).outcome, AnnotationOutcome::not_possible());
}

TEST(SimulatedAnnotator, SingleQualifyingCandidateIsPicked) {
    // c1 differs but lacks the attribute (premise fails); only c2 qualifies.
    Fixture f(words({"what", "is", "attribute_0"}), "value_0", {{0, 1}, {-1, 2}, {3, 3}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        EXPECT_EQ(simulated_annotator(f.store, f.latents, f.task, rng).outcome, AnnotationOutcome::pick("c2"));
    }
}

TEST(SimulatedAnnotator, PicksUniformlyAmongQualifying) {
    Fixture f(words({"is", "attribute_1", "value_0"}), "yes", {{0, 0}, {0, 1}, {0, 2}, {0, 0}});
    std::map<std::string, int> counts;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 3000; ++i) ++counts[simulated_annotator(f.store, f.latents, f.task, rng).outcome.image_id];
    ASSERT_EQ(counts.size(), 2u);
    EXPECT_NEAR(counts["c1"], 1500, 150);
    EXPECT_NEAR(counts["c2"], 1500, 150);
}

TEST(SimulatedAnnotator, NotPossibleRateMatchesEnumeration) {
    WorldConfig c;
    c.n_images = 600;
    c.prior_strength = 0.0;
    c.values_per_attribute = 6;
    c.presence_prob = 0.3;  // rare attributes make many tasks impossible
    auto w = generate_world(c);
    insert_tasks(w.store, generate_tasks(w.store, compute_all_neighbors(w.store, kDefaultCandidates)));

    // Oracle straight from the latent arrays: a candidate qualifies iff it has the
    // queried attribute and its answer to the question differs from the shown one.
    std::size_t expected = 0;
    for (const auto& [tid, t] : w.store.tasks) {
        const auto& q = w.store.question(t.question_id);
        const int k = std::stoi((q.tokens[0] == "is" ? q.tokens[1] : q.tokens[2]).substr(10));
        bool any = false;
        for (const auto& cid : t.candidate_image_ids) {
            const int v = w.latents.at(cid).attributes[static_cast<std::size_t>(k)];
            if (v < 0) continue;
            std::string ans = q.tokens[0] == "is" ? (v == std::stoi(q.tokens[2].substr(6)) ? "yes" : "no")
                                                  : "value_" + std::to_string(v);
            any = any || ans != t.shown_answer;
        }
        expected += any ? 0 : 1;
    }
    const auto summary = simulate_collection(w.store, w.latents, c, 9);
    EXPECT_EQ(summary.not_possible, expected);
    EXPECT_GT(expected, 0u);
    EXPECT_EQ(summary.picked + summary.not_possible, w.store.tasks.size());
    EXPECT_EQ(summary.pairs, summary.picked);
    validate_store(w.store);
}

TEST(SimulatedAnswers, NoiseFreeAnswersAreTruth) {
    WorldConfig c;
    c.answer_noise = 0.0;
    std::mt19937_64 rng(1);
    const LatentScene s{"x", {1, 2}};
    EXPECT_EQ(simulated_answers(s, words({"what", "is", "attribute_1"}), c, rng), testing::repeat("value_2", 10));
}

TEST(Latents, FileRoundTrip) {
    testing::TempDir dir("latents");
    WorldConfig c;
    c.n_images = 50;
    const auto w = generate_world(c);
    save_world(w, dir.path());
    EXPECT_EQ(read_latents(dir.path() / "latents.jsonl"), w.latents);
    EXPECT_EQ(load_store(dir.path()), w.store);
}

}  // namespace
}  // namespace vqab
