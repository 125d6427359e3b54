#pragma once

#include <string_view>

#include "vqab/model.hpp"

namespace vqab {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(std::string_view s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Plain SGD or Adam over every block of ModelParams; blocks the model kind does
/// not read are left untouched.
class Optimizer {
public:
    Optimizer(OptimizerConfig config, ModelKind kind, const ModelDims& dims);

    void step(ModelParams& params, const ModelParams& grads);
    long steps() const { return t_; }

private:
    OptimizerConfig config_;
    ModelKind kind_;
    ModelParams m_;
    ModelParams v_;
    long t_ = 0;
};

}  // namespace vqab
