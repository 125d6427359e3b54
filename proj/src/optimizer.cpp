#include "vqab/optimizer.hpp"

#include <cmath>

#include "vqab/errors.hpp"

namespace vqab {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ValidationError("unknown optimizer '" + std::string(s) + "'");
}

Optimizer::Optimizer(OptimizerConfig config, ModelKind kind, const ModelDims& dims)
    : config_(config), kind_(kind), m_(ModelParams::zeros(dims)), v_(ModelParams::zeros(dims)) {
    if (!(config_.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
}

void Optimizer::step(ModelParams& params, const ModelParams& grads) {
    ++t_;
    auto pb = params.blocks();
    const auto gb = grads.blocks();
    auto mb = m_.blocks();
    auto vb = v_.blocks();
    const double lr = config_.learning_rate;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t b = 0; b < pb.size(); ++b) {
        if (!block_used_by(kind_, pb[b].name)) continue;
        auto w = pb[b].values;
        const auto g = gb[b].values;
        if (config_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
            continue;
        }
        auto m = mb[b].values;
        auto v = vb[b].values;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
        }
    }
}

}  // namespace vqab
