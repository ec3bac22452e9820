#include "iplan/optim.hpp"

#include <cmath>

namespace iplan::num {

Adam::Adam(std::vector<Var> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    // reject NaN gradients before mutating any state
    double sq_norm = 0.0;
    for (size_t k = 0; k < params_.size(); ++k) {
        const Tensor& g = params_[k]->grad;
        if (g.empty()) continue;
        for (int64_t i = 0; i < g.size(); ++i) {
            double gi = g[i];
            if (!std::isfinite(gi))
                throw NumericsError("adam: non-finite gradient in parameter " +
                                    std::to_string(k));
            sq_norm += gi * gi;
        }
    }
    double clip_scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double norm = std::sqrt(sq_norm);
        if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
    }

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Var& p = params_[k];
        if (p->grad.empty()) continue;
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (int64_t i = 0; i < p->value.size(); ++i) {
            double g = p->grad[i] * clip_scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            p->value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
        p->grad.fill(0.0);
    }
}

}  // namespace iplan::num
