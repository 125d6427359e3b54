#include "vqab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>

#include "vqab/errors.hpp"

namespace vqab {

std::string_view to_string(AccuracyMode m) { return m == AccuracyMode::simple ? "simple" : "consensus"; }

AccuracyMode accuracy_mode_from_string(std::string_view s) {
    if (s == "simple") return AccuracyMode::simple;
    if (s == "consensus") return AccuracyMode::consensus;
    throw ValidationError("unknown accuracy mode '" + std::string(s) + "'");
}

double vqa_accuracy(const std::string& prediction, std::span<const std::string> answers, AccuracyMode mode) {
    const auto matches = static_cast<int>(std::count(answers.begin(), answers.end(), prediction));
    if (mode == AccuracyMode::simple) return std::min(1.0, matches / 3.0);
    // Leave each answer out in turn; a dropped match leaves matches - 1 in the subset.
    if (answers.empty()) return 0.0;
    double total = 0.0;
    for (const auto& a : answers) total += std::min(1.0, (matches - (a == prediction ? 1 : 0)) / 3.0);
    return total / static_cast<double>(answers.size());
}

double vqa_accuracy(const std::string& prediction, const AnswerSet& answers, AccuracyMode mode) {
    return vqa_accuracy(prediction, answers.answers, mode);
}

std::string_view to_string(AnswerType t) {
    switch (t) {
        case AnswerType::yes_no: return "yes/no";
        case AnswerType::number: return "number";
        case AnswerType::other: return "other";
    }
    return "other";
}

AnswerType answer_type_of(const std::string& a) {
    if (a == "yes" || a == "no") return AnswerType::yes_no;
    std::size_t i = 0;
    if (i < a.size() && (a[i] == '-' || a[i] == '+')) ++i;
    std::size_t int_digits = 0, frac_digits = 0;
    while (i < a.size() && std::isdigit(static_cast<unsigned char>(a[i]))) ++i, ++int_digits;
    if (i < a.size() && a[i] == '.') {
        ++i;
        while (i < a.size() && std::isdigit(static_cast<unsigned char>(a[i]))) ++i, ++frac_digits;
        if (frac_digits == 0) return AnswerType::other;
    }
    if (i == a.size() && int_digits + frac_digits > 0) return AnswerType::number;
    return AnswerType::other;
}

PairMetrics pair_metrics(const std::map<std::string, std::string>& predictions, const DatasetSplit& split) {
    if (split.eval_pairs.empty()) throw ValidationError("no complementary pairs to evaluate");
    auto lookup = [&](std::size_t idx) -> const std::string& {
        const auto& id = split.instances.at(idx).instance_id;
        const auto it = predictions.find(id);
        if (it == predictions.end()) throw ValidationError("missing prediction for instance '" + id + "'");
        return it->second;
    };
    PairMetrics m;
    std::size_t both = 0, same = 0;
    for (const auto& p : split.eval_pairs) {
        const auto& a = lookup(p.original);
        const auto& b = lookup(p.complement);
        const bool ok_a = a == split.instances[p.original].answers.consensus;
        const bool ok_b = b == split.instances[p.complement].answers.consensus;
        if (ok_a && ok_b) ++both;
        if (a == b) ++same;
    }
    m.pairs = split.eval_pairs.size();
    const auto n = static_cast<double>(m.pairs);
    m.both_correct = static_cast<double>(both) / n;
    m.identical = static_cast<double>(same) / n;
    m.different = 1.0 - m.identical;
    return m;
}

int recall_at_5(std::span<const std::string> ranking, const std::string& human_pick) {
    const auto it = std::find(ranking.begin(), ranking.end(), human_pick);
    if (it == ranking.end()) throw ValidationError("human pick '" + human_pick + "' is not in the ranking");
    return std::distance(ranking.begin(), it) < 5 ? 1 : 0;
}

std::string_view to_string(ExplainMethod m) {
    switch (m) {
        case ExplainMethod::random: return "random";
        case ExplainMethod::distance: return "distance";
        case ExplainMethod::vqa_prob: return "vqa_prob";
        case ExplainMethod::trained: return "trained";
    }
    return "random";
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> order_by(const AnnotationTask& task, const std::vector<double>& key) {
    std::vector<std::size_t> idx(task.candidate_image_ids.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(task.candidate_image_ids[i]);
    return out;
}

}  // namespace

std::vector<std::string> rank_candidates(ExplainMethod method, const AnnotationTask& task, const ExplainContext& ctx) {
    switch (method) {
        case ExplainMethod::distance: return task.candidate_image_ids;
        case ExplainMethod::random: {
            auto out = task.candidate_image_ids;
            std::mt19937_64 rng(ctx.seed ^ fnv1a(task.task_id));
            std::shuffle(out.begin(), out.end(), rng);
            return out;
        }
        case ExplainMethod::vqa_prob: {
            if (!ctx.answer_model || !ctx.answer_model->has_answer_head() || !ctx.store) {
                throw ValidationError("vqa_prob ranking needs a trained answer model");
            }
            const auto& m = *ctx.answer_model;
            const auto answer = m.answer_vocab.find(task.shown_answer);
            if (!answer) return task.candidate_image_ids;
            const auto& tokens = ctx.store->question(task.question_id).tokens;
            std::vector<double> prob;
            for (const auto& cid : task.candidate_image_ids) {
                prob.push_back(m.distribution(tokens, ctx.store->image(cid).features.values).probabilities(*answer));
            }
            return order_by(task, prob);
        }
        case ExplainMethod::trained: {
            if (!ctx.explain_model || !ctx.explain_model->has_explain_head() || !ctx.store) {
                throw ValidationError("trained ranking needs a counterexample model");
            }
            const auto& m = *ctx.explain_model;
            const auto answer = m.answer_vocab.find(task.shown_answer);
            if (!answer) return task.candidate_image_ids;
            const auto ids = m.token_ids(ctx.store->question(task.question_id).tokens);
            std::vector<std::span<const double>> cands;
            for (const auto& cid : task.candidate_image_ids) cands.push_back(ctx.store->image(cid).features.values);
            const auto s = explain_forward(m.params, m.dims, ids, *answer, cands).scores;
            std::vector<double> neg(static_cast<std::size_t>(s.size()));
            for (Eigen::Index i = 0; i < s.size(); ++i) neg[static_cast<std::size_t>(i)] = -s(i);
            return order_by(task, neg);
        }
    }
    return task.candidate_image_ids;
}

}  // namespace vqab
