#include "banditseq/adam.hpp"

#include "banditseq/errors.hpp"

#include <cmath>

namespace banditseq {

Adam::Adam(const ParamStore& params, AdamConfig config) : config_(config) {
    require(config.learning_rate >= 0.0, "Adam learning rate must be nonnegative");
    require(config.beta1 >= 0.0 && config.beta1 < 1.0, "Adam beta1 must be in [0,1)");
    require(config.beta2 >= 0.0 && config.beta2 < 1.0, "Adam beta2 must be in [0,1)");
    require(config.epsilon > 0.0, "Adam epsilon must be positive");
    for (const auto& e : params.entries()) {
        m_.emplace_back(e.value.shape(), 0.0);
        v_.emplace_back(e.value.shape(), 0.0);
    }
}

void Adam::step(ParamStore& params, double grad_scale) {
    auto entries = params.entries();
    require(entries.size() == m_.size(), "Adam state does not match parameter store");

    double clip_factor = grad_scale;
    if (config_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& e : entries) {
            for (double g : e.grad.values()) {
                sq += (g * grad_scale) * (g * grad_scale);
            }
        }
        const double norm = std::sqrt(sq);
        if (norm > config_.clip_norm) {
            clip_factor = grad_scale * config_.clip_norm / norm;
        }
    }

    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        require(e.value.same_shape(m_[i]), "Adam moment shape mismatch for " + e.name);
        double* p = e.value.data();
        double* g = e.grad.data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        for (std::size_t k = 0; k < e.value.size(); ++k) {
            const double gk = g[k] * clip_factor;
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
            g[k] = 0.0;
        }
    }
}

} // namespace banditseq
