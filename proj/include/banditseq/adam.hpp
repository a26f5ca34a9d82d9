#pragma once

#include "banditseq/param_store.hpp"

#include <cstdint>
#include <vector>

namespace banditseq {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Global-norm clip applied to the (scaled) gradient; 0 disables it.
    double clip_norm = 0.0;
};

// Bias-corrected Adam. Moment tensors are laid out in ParamStore entry order.
class Adam {
  public:
    Adam(const ParamStore& params, AdamConfig config);

    // Multiplies gradients by grad_scale (1/batch for a mean), optionally
    // clips, applies one update, zeroes the gradients and increments t.
    void step(ParamStore& params, double grad_scale = 1.0);

    std::uint64_t steps() const { return t_; }
    double learning_rate() const { return config_.learning_rate; }
    void set_learning_rate(double lr) { config_.learning_rate = lr; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

  private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t t_ = 0;
};

} // namespace banditseq
