#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"
#include "vqab/answers.hpp"
#include "vqab/errors.hpp"
#include "vqab/json_io.hpp"
#include "vqab/store.hpp"

namespace vqab {
namespace {

using testing::TempDir;
using testing::ten;

TEST(Answers, NormalizeLowercasesTrimsAndCollapses) {
    EXPECT_EQ(normalize_answer("  Two   Dogs \t"), "two dogs");
    EXPECT_EQ(normalize_answer("YES"), "yes");
    EXPECT_EQ(normalize_answer("   "), "");
    // Articles and number words are left alone.
    EXPECT_EQ(normalize_answer("A Dog"), "a dog");
    EXPECT_EQ(normalize_answer("two"), "two");
}

TEST(Answers, ConsensusIsMostCommon) {
    EXPECT_EQ(consensus_answer(ten("red", 6, "blue")), "red");
    EXPECT_EQ(consensus_answer(ten("red", 3, "blue")), "blue");
}

TEST(Answers, ConsensusTieGoesToSmallest) {
    EXPECT_EQ(consensus_answer(ten("zebra", 5, "apple")), "apple");
    std::vector<std::string> three{"c", "c", "c", "b", "b", "b", "a", "a", "a", "d"};
    EXPECT_EQ(consensus_answer(three), "a");
}

TEST(Answers, ConsensusNeedsTen) {
    std::vector<std::string> nine(9, "x");
    EXPECT_THROW(consensus_answer(nine), ValidationError);
    std::vector<std::string> eleven(11, "x");
    EXPECT_THROW(consensus_answer(eleven), ValidationError);
}

TEST(Answers, QuestionTypeLongestPrefix) {
    EXPECT_EQ(question_type_of(tokenize_question("What color is the bus?")), "what color is the");
    EXPECT_EQ(question_type_of(tokenize_question("How many dogs are there?")), "how many");
    EXPECT_EQ(question_type_of(tokenize_question("Zebra stripes?")), "other");
    EXPECT_EQ(tokenize_question("Is it  RED?"), (std::vector<std::string>{"is", "it", "red"}));
}

DataStore sample_store() {
    DataStore s;
    s.images.emplace("a", testing::image("a", {0.0, 1.0}));
    s.images.emplace("b", testing::image("b", {1.0, 1.0}));
    s.images.emplace("c", testing::image("c", {3.0, 0.5}, Split::val));
    s.images.at("a").display_uri = "img/a.png";
    s.questions.emplace("q1", QuestionRecord{"q1", "a", {"is", "it", "red"}, "is it"});
    s.answers.emplace("q1", AnswerSet{"q1", ten("yes", 7, "no"), "yes"});
    s.tasks.emplace("task_q1", AnnotationTask{"task_q1", "q1", "yes", {"b"}, TaskStatus::picked});
    s.results.emplace("task_q1", AnnotationResult{"task_q1", AnnotationOutcome::pick("b"), "ann", 42});
    s.jobs.emplace("task_q1", AnswerJob{"task_q1", "q1", "b", {"no", "no"}});
    return s;
}

TEST(Store, RoundTripIsLossless) {
    TempDir dir("store_rt");
    const auto s = sample_store();
    validate_store(s);
    save_store(s, dir.path());
    EXPECT_EQ(load_store(dir.path()), s);
}

TEST(Store, SaveIsByteStable) {
    TempDir a("store_a"), b("store_b");
    save_store(sample_store(), a.path());
    save_store(load_store(a.path()), b.path());
    for (const char* f : {"images.jsonl", "questions.jsonl", "answers.jsonl", "tasks.jsonl", "results.jsonl"}) {
        std::ifstream fa(a.path() / f), fb(b.path() / f);
        std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_EQ(sa, sb) << f;
    }
}

TEST(Store, MissingDirectoryLoadsEmpty) {
    TempDir dir("store_empty");
    EXPECT_EQ(load_store(dir.path()), DataStore{});
}

TEST(Store, MalformedLineReportsFileAndLine) {
    TempDir dir("store_bad");
    save_store(sample_store(), dir.path());
    {
        std::ofstream out(dir.path() / "questions.jsonl", std::ios::app);
        out << "{not json\n";
    }
    try {
        load_store(dir.path());
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("questions.jsonl"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
}

TEST(Store, ValidationCatchesBrokenInvariants) {
    {
        auto s = sample_store();
        s.answers.at("q1").answers.pop_back();
        EXPECT_THROW(validate_store(s), ValidationError);
    }
    {
        auto s = sample_store();
        s.questions.at("q1").image_id = "nope";
        EXPECT_THROW(validate_store(s), ValidationError);
    }
    {
        auto s = sample_store();
        s.images.at("b").features.values.push_back(1.0);
        EXPECT_THROW(validate_store(s), ValidationError);
    }
    {
        auto s = sample_store();
        s.answers.at("q1").consensus = "no";
        EXPECT_THROW(validate_store(s), ValidationError);
    }
    {
        auto s = sample_store();
        s.tasks.at("task_q1").status = TaskStatus::open;
        EXPECT_THROW(validate_store(s), ValidationError);
    }
}

TEST(Store, LookupOfUnknownIdThrows) {
    const auto s = sample_store();
    EXPECT_THROW(s.image("zz"), NotFoundError);
    EXPECT_THROW(s.question("zz"), NotFoundError);
    EXPECT_THROW(s.task("zz"), NotFoundError);
    EXPECT_EQ(s.feature_dim(), 2u);
}

TEST(Store, ResultJsonUsesOutcomeTags) {
    json j = AnnotationResult{"t", AnnotationOutcome::not_possible(), "x", 1};
    EXPECT_EQ(j.at("outcome"), "NotPossible");
    EXPECT_FALSE(j.contains("image_id"));
    j = AnnotationResult{"t", AnnotationOutcome::pick("img"), "x", 1};
    EXPECT_EQ(j.at("outcome"), "Pick");
    EXPECT_EQ(j.at("image_id"), "img");
    EXPECT_EQ(j.get<AnnotationResult>().outcome, AnnotationOutcome::pick("img"));
}

TEST(SharedStore, WritesAreVisibleToReaders) {
    SharedStore shared(sample_store());
    shared.write([](DataStore& s) { s.images.erase("c"); });
    EXPECT_EQ(shared.read([](const DataStore& s) { return s.images.size(); }), 2u);
    EXPECT_EQ(shared.snapshot().images.count("c"), 0u);
}

}  // namespace
}  // namespace vqab
