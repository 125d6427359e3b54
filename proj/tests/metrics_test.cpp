#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "vqab/errors.hpp"
#include "vqab/metrics.hpp"

namespace vqab {
namespace {

using testing::ten;

// Leave-one-out oracle: average min(1, matches/3) over the ten nine-answer subsets.
double enumerate_consensus(const std::string& pred, const std::vector<std::string>& answers) {
    double total = 0.0;
    for (std::size_t drop = 0; drop < answers.size(); ++drop) {
        int matches = 0;
        for (std::size_t i = 0; i < answers.size(); ++i) {
            if (i != drop && answers[i] == pred) ++matches;
        }
        total += std::min(1.0, matches / 3.0);
    }
    return total / static_cast<double>(answers.size());
}

TEST(VqaAccuracy, ThreeOfTenIsPointNine) {
    const auto a = ten("red", 3, "blue");
    EXPECT_DOUBLE_EQ(vqa_accuracy("red", a, AccuracyMode::consensus), 0.9);
    EXPECT_DOUBLE_EQ(enumerate_consensus("red", a), 0.9);
    EXPECT_DOUBLE_EQ(vqa_accuracy("red", a, AccuracyMode::simple), 1.0);
}

TEST(VqaAccuracy, SimpleModeCases) {
    EXPECT_DOUBLE_EQ(vqa_accuracy("red", ten("red", 1, "blue"), AccuracyMode::simple), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("green", ten("red", 1, "blue"), AccuracyMode::simple), 0.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("blue", ten("red", 1, "blue"), AccuracyMode::simple), 1.0);
}

TEST(VqaAccuracy, ConsensusMatchesEnumerationOnRandomMultisets) {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> vocab{"a", "b", "c", "d"};
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> answers(10);
        const std::size_t spread = 1 + rng() % vocab.size();
        for (auto& x : answers) x = vocab[rng() % spread];
        const auto& pred = vocab[rng() % vocab.size()];
        EXPECT_EQ(vqa_accuracy(pred, answers, AccuracyMode::consensus), enumerate_consensus(pred, answers));
    }
}

TEST(VqaAccuracy, SaturatesAndTwoOfTen) {
    const auto all = ten("red", 10, "red");
    EXPECT_DOUBLE_EQ(vqa_accuracy("red", all, AccuracyMode::simple), 1.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("red", all, AccuracyMode::consensus), 1.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("red", ten("red", 2, "blue"), AccuracyMode::simple), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(vqa_accuracy("gray", all, AccuracyMode::consensus), 0.0);
}

TEST(AnswerType, Buckets) {
    EXPECT_EQ(answer_type_of("yes"), AnswerType::yes_no);
    EXPECT_EQ(answer_type_of("no"), AnswerType::yes_no);
    EXPECT_EQ(answer_type_of("3"), AnswerType::number);
    EXPECT_EQ(answer_type_of("2.5"), AnswerType::number);
    EXPECT_EQ(answer_type_of("two"), AnswerType::other);
    EXPECT_EQ(answer_type_of("red"), AnswerType::other);
}

TEST(Recall, TopFive) {
    std::vector<std::string> r{"a", "b", "c", "d", "e", "f"};
    EXPECT_EQ(recall_at_5(r, "e"), 1);
    EXPECT_EQ(recall_at_5(r, "f"), 0);
    EXPECT_THROW(recall_at_5(r, "zz"), ValidationError);
}

DatasetSplit two_pairs() {
    DatasetSplit s;
    auto inst = [](const std::string& id, const std::string& c) {
        QAInstance i;
        i.instance_id = id;
        i.answers = AnswerSet{id, ten(c, 10, c), c};
        return i;
    };
    s.instances = {inst("q1", "yes"), inst("q1#c", "no"), inst("q2", "red"), inst("q2#c", "blue")};
    s.eval_pairs = {{"q1", 0, 1}, {"q2", 2, 3}};
    return s;
}

TEST(PairMetrics, CountsBothCorrectAndIdentical) {
    const auto split = two_pairs();
    const std::map<std::string, std::string> preds{{"q1", "yes"}, {"q1#c", "no"}, {"q2", "red"}, {"q2#c", "red"}};
    const auto m = pair_metrics(preds, split);
    EXPECT_EQ(m.pairs, 2u);
    EXPECT_DOUBLE_EQ(m.both_correct, 0.5);
    EXPECT_DOUBLE_EQ(m.identical, 0.5);
    EXPECT_DOUBLE_EQ(m.different, 0.5);
}

TEST(PairMetrics, ErrorsOnMissingPredictionsOrNoPairs) {
    const auto split = two_pairs();
    EXPECT_THROW(pair_metrics({{"q1", "yes"}}, split), ValidationError);
    EXPECT_THROW(pair_metrics({}, DatasetSplit{}), ValidationError);
}

TEST(RankCandidates, RandomIsSeededAndDistanceKeepsOrder) {
    auto store = testing::line_store(30, {"red"});
    AnnotationTask t{"task_q00", "q00", "red", {}, TaskStatus::picked};
    for (int i = 1; i <= 24; ++i) t.candidate_image_ids.push_back(i < 10 ? "img0" + std::to_string(i) : "img" + std::to_string(i));
    ExplainContext ctx;
    ctx.store = &store;
    ctx.seed = 5;
    EXPECT_EQ(rank_candidates(ExplainMethod::distance, t, ctx), t.candidate_image_ids);
    const auto r1 = rank_candidates(ExplainMethod::random, t, ctx);
    EXPECT_EQ(r1, rank_candidates(ExplainMethod::random, t, ctx));
    EXPECT_TRUE(std::is_permutation(r1.begin(), r1.end(), t.candidate_image_ids.begin()));
    ctx.seed = 6;
    EXPECT_NE(r1, rank_candidates(ExplainMethod::random, t, ctx));
}

}  // namespace
}  // namespace vqab
