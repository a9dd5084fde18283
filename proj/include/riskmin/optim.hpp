#pragma once

#include <cstdint>
#include <vector>

#include "riskmin/tensor.hpp"

namespace riskmin::num {

enum class OptKind { Sgd, Adam, AdamW };

struct OptimizerConfig {
    OptKind kind = OptKind::Adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // AdamW only
};

// Holds per-parameter moment accumulators shaped like the parameters they
// track. step() applies the standard SGD/Adam/AdamW recurrences in-place.
// AdamW with weight_decay 0 takes exactly the Adam code path, so the two are
// bit-identical in that case.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, const std::vector<Tensor*>& params);

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    std::uint64_t steps() const { return steps_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::uint64_t steps_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace riskmin::num
