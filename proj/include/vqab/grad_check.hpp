#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "vqab/json_io.hpp"
#include "vqab/model.hpp"

namespace vqab {

struct GradCheckConfig {
    ModelDims dims = small_dims();
    ModelKind kind = ModelKind::counterexample;
    double step = 1e-4;        // central-difference step
    double tolerance = 1e-4;   // pass iff every block's relative error is below this
    double init_scale = 0.5;
    std::uint64_t seed = 7;
    std::set<std::string> frozen;  // block names excluded from the check
    bool freeze_all = false;

    static ModelDims small_dims();
};

/// Analytic gradient under test; defaults to loss_and_gradient.
using GradientFn = std::function<ModelParams(ModelKind, const ModelParams&, const ModelDims&, const Example&,
                                             double lambda, double margin)>;

struct BlockError {
    std::string name;
    double relative_error = 0.0;
    double analytic_norm = 0.0;
    double numeric_norm = 0.0;
};

struct GradCheckReport {
    int trials = 0;
    int resampled = 0;  // configurations redrawn because a hinge sat within the kink guard
    int blocks_checked = 0;
    double max_relative_error = 0.0;
    std::vector<BlockError> worst_per_block;
    bool passed = true;
};

json to_json(const GradCheckReport& r);

/// Compares analytic gradients with central finite differences on random small
/// configurations (random parameters, features, tokens, answer, pick, lambda, margin).
/// Relative error of a block is |g_a - g_n| / max(|g_a| + |g_n|, 1e-6) in the l2 norm.
GradCheckReport grad_check(const GradCheckConfig& config, int trials, const GradientFn& analytic = {});

}  // namespace vqab
