#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vqab/balancing.hpp"
#include "vqab/errors.hpp"
#include "vqab/knn_index.hpp"

namespace vqab {
namespace {

using testing::line_store;
using testing::repeat;
using testing::ten;

DataStore with_tasks(int n, std::vector<std::string> consensus = {"yes"}) {
    auto s = line_store(n, consensus);
    const auto lists = compute_all_neighbors(s, kDefaultCandidates);
    insert_tasks(s, generate_tasks(s, lists));
    return s;
}

TEST(GenerateTasks, OneTripletThirtyImages) {
    auto s = line_store(30, {"yes"});
    // Keep a single question.
    for (auto it = s.questions.begin(); it != s.questions.end();) {
        if (it->first != "q00") {
            s.answers.erase(it->first);
            it = s.questions.erase(it);
        } else {
            ++it;
        }
    }
    const auto lists = compute_all_neighbors(s, kDefaultCandidates);
    const auto tasks = generate_tasks(s, lists);
    ASSERT_EQ(tasks.size(), 1u);
    const auto& t = tasks[0];
    EXPECT_EQ(t.task_id, "task_q00");
    EXPECT_EQ(t.status, TaskStatus::open);
    EXPECT_EQ(t.shown_answer, "yes");
    ASSERT_EQ(t.candidate_image_ids.size(), 24u);
    for (int i = 0; i < 24; ++i) {
        const int j = i + 1;
        EXPECT_EQ(t.candidate_image_ids[static_cast<std::size_t>(i)], "img" + std::string(j < 10 ? "0" : "") + std::to_string(j));
    }
}

TEST(GenerateTasks, TwentyImagesIsInsufficient) {
    const auto s = line_store(20, {"yes"});
    const auto lists = compute_all_neighbors(s, kDefaultCandidates);
    try {
        generate_tasks(s, lists);
        FAIL();
    } catch (const InsufficientNeighborsError& e) {
        EXPECT_EQ(e.question_ids().size(), 20u);
    }
}

TEST(GenerateTasks, QuestionsOnOneImageShareCandidates) {
    auto s = line_store(30, {"yes"});
    for (const char* extra : {"qa", "qb"}) {
        s.questions.emplace(extra, QuestionRecord{extra, "img05", {"is", "it", "red"}, "is it"});
        s.answers.emplace(extra, AnswerSet{extra, repeat("no", 10), "no"});
    }
    const auto tasks = generate_tasks(s, compute_all_neighbors(s, kDefaultCandidates));
    const AnnotationTask *a = nullptr, *b = nullptr, *c = nullptr;
    for (const auto& t : tasks) {
        if (t.question_id == "q05") a = &t;
        if (t.question_id == "qa") b = &t;
        if (t.question_id == "qb") c = &t;
    }
    ASSERT_TRUE(a && b && c);
    EXPECT_NE(a->task_id, b->task_id);
    EXPECT_NE(b->task_id, c->task_id);
    EXPECT_EQ(a->candidate_image_ids, b->candidate_image_ids);
    EXPECT_EQ(b->candidate_image_ids, c->candidate_image_ids);
}

TEST(InsertTasks, SkipsExisting) {
    auto s = with_tasks(30);
    const auto tasks = generate_tasks(s, compute_all_neighbors(s, kDefaultCandidates));
    EXPECT_EQ(insert_tasks(s, tasks), 0u);
}

TEST(Ingest, PickOpensJob) {
    auto s = with_tasks(30);
    ingest_result(s, {"task_q00", AnnotationOutcome::pick("img03"), "w", 1});
    EXPECT_EQ(s.task("task_q00").status, TaskStatus::picked);
    ASSERT_EQ(s.jobs.count("task_q00"), 1u);
    EXPECT_EQ(s.jobs.at("task_q00").image_id, "img03");
    EXPECT_TRUE(s.jobs.at("task_q00").answers.empty());
    validate_store(s);
}

TEST(Ingest, NotPossibleHasNoJob) {
    auto s = with_tasks(30);
    ingest_result(s, {"task_q00", AnnotationOutcome::not_possible(), "w", 1});
    EXPECT_EQ(s.task("task_q00").status, TaskStatus::not_possible);
    EXPECT_TRUE(s.jobs.empty());
}

TEST(Ingest, Errors) {
    auto s = with_tasks(30);
    // The original image is never its own candidate.
    EXPECT_THROW(ingest_result(s, {"task_q00", AnnotationOutcome::pick("img00"), "w", 1}), ValidationError);
    EXPECT_EQ(s.task("task_q00").status, TaskStatus::open);
    EXPECT_THROW(ingest_result(s, {"task_zz", AnnotationOutcome::not_possible(), "w", 1}), NotFoundError);
    ingest_result(s, {"task_q00", AnnotationOutcome::not_possible(), "w", 1});
    EXPECT_THROW(ingest_result(s, {"task_q00", AnnotationOutcome::pick("img01"), "w", 2}), ConflictError);
}

TEST(Aggregate, MajorityAndMismatch) {
    auto s = with_tasks(30);
    ingest_result(s, {"task_q00", AnnotationOutcome::pick("img01"), "w", 1});
    ingest_result(s, {"task_q01", AnnotationOutcome::pick("img02"), "w", 1});
    const auto p = aggregate_round(s, "task_q00", ten("no", 8, "yes"));
    EXPECT_EQ(p.complement_answers.consensus, "no");
    EXPECT_FALSE(p.mismatch);
    EXPECT_EQ(p.complement_image_id, "img01");
    EXPECT_EQ(s.jobs.count("task_q00"), 0u);
    const auto m = aggregate_round(s, "task_q01", ten("Yes ", 6, "no"));
    EXPECT_TRUE(m.mismatch);
    EXPECT_EQ(m.complement_answers.answers[0], "yes");
    validate_store(s);
}

TEST(Aggregate, Errors) {
    auto s = with_tasks(30);
    EXPECT_THROW(aggregate_round(s, "task_q00", ten("no", 10, "no")), ConflictError);  // still open
    ingest_result(s, {"task_q00", AnnotationOutcome::pick("img01"), "w", 1});
    std::vector<std::string> nine(9, "no");
    EXPECT_THROW(aggregate_round(s, "task_q00", nine), ValidationError);
    aggregate_round(s, "task_q00", ten("no", 10, "no"));
    EXPECT_THROW(aggregate_round(s, "task_q00", ten("no", 10, "no")), ConflictError);
}

TEST(AppendRoundAnswer, TenthTriggersAggregation) {
    auto s = with_tasks(30);
    ingest_result(s, {"task_q00", AnnotationOutcome::pick("img01"), "w", 1});
    for (int i = 0; i < 9; ++i) EXPECT_FALSE(append_round_answer(s, "task_q00", "No").has_value());
    EXPECT_EQ(s.pairs.count("q00"), 0u);
    const auto p = append_round_answer(s, "task_q00", "no");
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(s.pairs.at("q00").complement_answers.answers, repeat("no", 10));
    EXPECT_THROW(append_round_answer(s, "task_q00", "no"), ConflictError);
    EXPECT_THROW(append_round_answer(s, "task_q01", "no"), ConflictError);  // open, not picked
}

// 100 questions over 100 images; the first `picked` are picked with second-round
// answer "no" (the first `mismatched` of those answer "yes"), the rest are not possible.
DataStore collected(int picked, int mismatched) {
    auto s = with_tasks(100);
    int i = 0;
    for (auto& [tid, t] : DataStore(s).tasks) {
        if (i < picked) {
            ingest_result(s, {tid, AnnotationOutcome::pick(t.candidate_image_ids[0]), "w", i});
            aggregate_round(s, tid, repeat(i < mismatched ? "yes" : "no", 10));
        } else {
            ingest_result(s, {tid, AnnotationOutcome::not_possible(), "w", i});
        }
        ++i;
    }
    return s;
}

TEST(Assemble, ArithmeticOfInstances) {
    const auto split = assemble_balanced(collected(78, 0), Split::train);
    EXPECT_EQ(split.instances.size(), 178u);
    EXPECT_EQ(split.eval_pairs.size(), 78u);
    EXPECT_EQ(split.stats.picked, 78u);
    EXPECT_EQ(split.stats.not_possible, 22u);
    const auto r = balance_report(split);
    EXPECT_DOUBLE_EQ(r.not_possible_rate, 0.22);
}

TEST(Assemble, NoPicksIsOriginalSplit) {
    const auto s = collected(0, 0);
    const auto b = assemble_balanced(s, Split::train);
    const auto u = original_split(s, Split::train);
    EXPECT_EQ(b.instances, u.instances);
    EXPECT_TRUE(b.eval_pairs.empty());
}

TEST(Assemble, MismatchesLeftOutOfPairs) {
    auto s = with_tasks(30);
    int i = 0;
    for (auto& [tid, t] : DataStore(s).tasks) {
        if (i < 10) {
            ingest_result(s, {tid, AnnotationOutcome::pick(t.candidate_image_ids[1]), "w", i});
            aggregate_round(s, tid, repeat(i == 0 ? "yes" : "no", 10));
        } else {
            ingest_result(s, {tid, AnnotationOutcome::not_possible(), "w", i});
        }
        ++i;
    }
    // Keep only the ten picked questions.
    for (int j = 10; j < 30; ++j) {
        const std::string qid = "q" + std::string(j < 10 ? "0" : "") + std::to_string(j);
        s.questions.erase(qid);
        s.answers.erase(qid);
        s.tasks.erase(task_id_for(qid));
        s.results.erase(task_id_for(qid));
    }
    const auto split = assemble_balanced(s, Split::train);
    EXPECT_EQ(split.instances.size(), 20u);
    ASSERT_EQ(split.eval_pairs.size(), 9u);
    for (const auto& p : split.eval_pairs) {
        const auto& a = split.instances[p.original];
        const auto& b = split.instances[p.complement];
        EXPECT_EQ(a.tokens, b.tokens);
        EXPECT_NE(a.image_id, b.image_id);
        EXPECT_NE(a.answers.consensus, b.answers.consensus);
    }
    EXPECT_DOUBLE_EQ(balance_report(split).mismatch_rate, 0.1);
    EXPECT_EQ(assemble_balanced(s, Split::train), split);
}

TEST(Assemble, PendingTasksBlock) {
    auto s = with_tasks(30);
    EXPECT_THROW(assemble_balanced(s, Split::train), ConflictError);
    ingest_result(s, {"task_q00", AnnotationOutcome::pick("img01"), "w", 1});
    EXPECT_NO_THROW(assemble_balanced(s, Split::train, true));
    // Test split has no tasks.
    EXPECT_NO_THROW(assemble_balanced(s, Split::test));
}

DatasetSplit typed(const std::vector<std::pair<std::string, std::string>>& type_answer, std::size_t times) {
    DatasetSplit s;
    for (std::size_t r = 0; r < times; ++r) {
        for (const auto& [type, ans] : type_answer) {
            QAInstance i;
            i.question_type = type;
            i.answers.consensus = ans;
            s.instances.push_back(i);
        }
    }
    return s;
}

TEST(BalanceReport, Entropies) {
    EXPECT_DOUBLE_EQ(balance_report(typed({{"is", "yes"}, {"is", "no"}}, 50)).weighted_entropy, 1.0);
    EXPECT_DOUBLE_EQ(balance_report(typed({{"is", "yes"}}, 50)).weighted_entropy, 0.0);
    // 60 questions with H = 1 and 40 with H = 0.
    auto s = typed({{"is", "yes"}, {"is", "no"}}, 30);
    auto t = typed({{"how many", "2"}}, 40);
    s.instances.insert(s.instances.end(), t.instances.begin(), t.instances.end());
    const auto r = balance_report(s);
    EXPECT_NEAR(r.weighted_entropy, 0.6, 1e-12);
    std::size_t sum = 0;
    for (const auto& [a, n] : r.per_question_type.at("is").histogram) sum += n;
    EXPECT_EQ(sum, r.per_question_type.at("is").count);
}

TEST(BalanceReport, EmptySplitIsZeroed) {
    const auto r = balance_report(DatasetSplit{});
    EXPECT_EQ(r.instances, 0u);
    EXPECT_EQ(r.weighted_entropy, 0.0);
    EXPECT_EQ(r.not_possible_rate, 0.0);
    EXPECT_NE(to_markdown(r).find("Weighted entropy"), std::string::npos);
    EXPECT_EQ(to_json(r).at("instances"), 0);
}

TEST(Entropy, ZeroCountsIgnored) {
    EXPECT_DOUBLE_EQ(entropy_bits({{"a", 1}, {"b", 1}, {"c", 0}}), 1.0);
    EXPECT_DOUBLE_EQ(entropy_bits({}), 0.0);
}

}  // namespace
}  // namespace vqab
