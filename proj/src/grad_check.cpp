#include "vqab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vqab {

ModelDims GradCheckConfig::small_dims() {
    ModelDims d;
    d.feature_dim = 6;
    d.word_dim = 3;
    d.hidden = 5;
    d.explain_dim = 3;
    d.answer_embed_dim = 3;
    d.candidates = 4;
    d.question_vocab = 7;
    d.answer_vocab = 4;
    return d;
}

json to_json(const GradCheckReport& r) {
    json blocks = json::array();
    for (const auto& b : r.worst_per_block) {
        blocks.push_back({{"name", b.name},
                          {"relative_error", b.relative_error},
                          {"analytic_norm", b.analytic_norm},
                          {"numeric_norm", b.numeric_norm}});
    }
    return json{{"trials", r.trials},
                {"resampled", r.resampled},
                {"blocks_checked", r.blocks_checked},
                {"max_relative_error", r.max_relative_error},
                {"passed", r.passed},
                {"blocks", blocks}};
}

namespace {

constexpr double kKinkGuard = 1e-3;
constexpr double kNormFloor = 1e-6;

struct Trial {
    ModelParams params;
    std::vector<int> tokens;
    std::vector<double> features;
    std::vector<std::vector<double>> candidate_store;
    ExplainTarget target;
    Example example;
    double lambda = 1.0;
    double margin = 0.5;
};

void draw_trial(Trial& t, const GradCheckConfig& cfg, std::mt19937_64& rng) {
    const auto& d = cfg.dims;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> word(0, d.question_vocab - 1);
    std::uniform_int_distribution<int> answer(0, d.answer_vocab - 1);
    std::uniform_int_distribution<int> cand(0, d.candidates - 1);
    std::uniform_int_distribution<int> length(1, 4);
    std::uniform_real_distribution<double> lam(0.5, 2.0);
    std::uniform_real_distribution<double> mar(0.05, 1.0);

    t.params = ModelParams::uniform(d, cfg.init_scale, rng());
    // Biases are drawn too so their gradients are exercised away from zero.
    std::uniform_real_distribution<double> bias(-cfg.init_scale, cfg.init_scale);
    for (auto& b : t.params.blocks()) {
        if (b.name.ends_with(".bias")) {
            for (double& v : b.values) v = bias(rng);
        }
    }
    t.tokens.resize(static_cast<std::size_t>(length(rng)));
    for (int& w : t.tokens) w = word(rng);
    t.features.resize(static_cast<std::size_t>(d.feature_dim));
    for (double& v : t.features) v = normal(rng);
    t.candidate_store.assign(static_cast<std::size_t>(d.candidates), std::vector<double>(t.features.size()));
    for (auto& c : t.candidate_store) {
        for (double& v : c) v = normal(rng);
    }
    t.target.candidates.clear();
    for (const auto& c : t.candidate_store) t.target.candidates.push_back(c);
    t.target.pick = cand(rng);
    t.target.answer_id = answer(rng);
    t.lambda = lam(rng);
    t.margin = mar(rng);
    t.example = Example{t.tokens, t.features, answer(rng), &t.target};
}

bool near_kink(const Trial& t, const ModelDims& d) {
    const auto s = explain_forward(t.params, d, t.tokens, t.target.answer_id, t.target.candidates).scores;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (i == t.target.pick) continue;
        if (std::abs(t.margin - (s(t.target.pick) - s(i))) < kKinkGuard) return true;
    }
    return false;
}

}  // namespace

GradCheckReport grad_check(const GradCheckConfig& cfg, int trials, const GradientFn& analytic) {
    GradCheckReport report;
    const GradientFn gradient = analytic ? analytic
                                         : GradientFn([](ModelKind k, const ModelParams& p, const ModelDims& d,
                                                         const Example& ex, double lambda, double margin) {
                                               ModelParams g = ModelParams::zeros(d);
                                               loss_and_gradient(k, p, d, ex, lambda, margin, &g);
                                               return g;
                                           });
    std::mt19937_64 rng(cfg.seed);
    Trial t;
    for (int trial = 0; trial < trials; ++trial) {
        draw_trial(t, cfg, rng);
        while (cfg.kind == ModelKind::counterexample && near_kink(t, cfg.dims)) {
            ++report.resampled;
            draw_trial(t, cfg, rng);
        }
        ++report.trials;
        if (cfg.freeze_all) continue;

        const ModelParams ga = gradient(cfg.kind, t.params, cfg.dims, t.example, t.lambda, t.margin);
        auto loss_at = [&](const ModelParams& p) {
            return loss_and_gradient(cfg.kind, p, cfg.dims, t.example, t.lambda, t.margin, nullptr).total;
        };
        ModelParams probe = t.params;
        auto probe_blocks = probe.blocks();
        const auto analytic_blocks = ga.blocks();
        for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
            const auto& name = probe_blocks[b].name;
            if (cfg.frozen.count(name) || !block_used_by(cfg.kind, name)) continue;
            double diff2 = 0.0, na2 = 0.0, nn2 = 0.0;
            auto values = probe_blocks[b].values;
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double saved = values[i];
                values[i] = saved + cfg.step;
                const double up = loss_at(probe);
                values[i] = saved - cfg.step;
                const double down = loss_at(probe);
                values[i] = saved;
                const double numeric = (up - down) / (2.0 * cfg.step);
                const double a = analytic_blocks[b].values[i];
                diff2 += (a - numeric) * (a - numeric);
                na2 += a * a;
                nn2 += numeric * numeric;
            }
            const double na = std::sqrt(na2), nn = std::sqrt(nn2);
            const double rel = std::sqrt(diff2) / std::max(na + nn, kNormFloor);
            ++report.blocks_checked;
            report.max_relative_error = std::max(report.max_relative_error, rel);
            auto it = std::find_if(report.worst_per_block.begin(), report.worst_per_block.end(),
                                   [&](const BlockError& e) { return e.name == name; });
            if (it == report.worst_per_block.end()) {
                report.worst_per_block.push_back({name, rel, na, nn});
            } else if (rel > it->relative_error) {
                *it = {name, rel, na, nn};
            }
        }
    }
    report.passed = report.max_relative_error < cfg.tolerance;
    return report;
}

}  // namespace vqab
