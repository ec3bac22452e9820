#pragma once

#include <cstdint>
#include <vector>

#include "iplan/tensor.hpp"

namespace iplan::num {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.5;  // global-norm gradient clip before each step; 0 disables
};

/// Bias-corrected Adam over a fixed parameter list. step() consumes and
/// zeroes the accumulated gradients. Throws NumericsError on NaN gradients
/// without touching parameter values.
class Adam {
  public:
    Adam(std::vector<Var> params, AdamConfig cfg);

    void step();
    int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

  private:
    std::vector<Var> params_;
    AdamConfig cfg_;
    int64_t step_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace iplan::num
