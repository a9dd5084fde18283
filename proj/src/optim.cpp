#include "riskmin/optim.hpp"

#include <cmath>
#include <string>

#include "riskmin/error.hpp"

namespace riskmin::num {

Optimizer::Optimizer(OptimizerConfig cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
    if (cfg_.kind != OptKind::Sgd) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Tensor* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }
}

void Optimizer::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size() || (cfg_.kind != OptKind::Sgd && params.size() != m_.size())) {
        fail(ErrorCode::ShapeMismatch, "optimizer: parameter/gradient count mismatch");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        require_same_shape(*params[p], *grads[p], "optimizer");
        for (std::size_t i = 0; i < grads[p]->size(); ++i) {
            if (!std::isfinite(grads[p]->at(i))) {
                fail(ErrorCode::Divergence, "optimizer: non-finite gradient for parameter " +
                                                std::to_string(p) + " at coordinate " +
                                                std::to_string(i));
            }
        }
    }
    ++steps_;
    if (cfg_.kind == OptKind::Sgd) {
        for (std::size_t p = 0; p < params.size(); ++p)
            for (std::size_t i = 0; i < params[p]->size(); ++i)
                params[p]->at(i) -= cfg_.lr * grads[p]->at(i);
        return;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        const Tensor& g = *grads[p];
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            // Decoupled decay shrinks theta_t before the Adam term.
            if (cfg_.kind == OptKind::AdamW && cfg_.weight_decay != 0.0) {
                theta.at(i) -= cfg_.lr * cfg_.weight_decay * theta.at(i);
            }
            m.at(i) = cfg_.beta1 * m.at(i) + (1.0 - cfg_.beta1) * g.at(i);
            v.at(i) = cfg_.beta2 * v.at(i) + (1.0 - cfg_.beta2) * g.at(i) * g.at(i);
            const double mhat = m.at(i) / bc1;
            const double vhat = v.at(i) / bc2;
            theta.at(i) -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace riskmin::num
