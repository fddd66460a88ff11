#pragma once

#include <cmath>
#include <vector>

#include "fakeclr/model.hpp"

namespace fakeclr {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0.0) || !(eps > 0.0))
            throw invalid_parameter("adam: lr and eps must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw invalid_parameter("adam: betas must lie in [0,1)");
    }
};

// Bias-corrected Adam over a fixed parameter group. One step() consumes the
// accumulated gradients and clears them.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) { cfg.validate(); }

    void step(const std::vector<Param*>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (Param* p : params) {
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const double g = p->grad[i];
                p->m1[i] = cfg_.beta1 * p->m1[i] + (1.0 - cfg_.beta1) * g;
                p->m2[i] = cfg_.beta2 * p->m2[i] + (1.0 - cfg_.beta2) * g * g;
                p->value[i] -=
                    cfg_.lr * (p->m1[i] / bc1) / (std::sqrt(p->m2[i] / bc2) + cfg_.eps);
            }
            p->zero_grad();
        }
    }

    long long steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long long t_ = 0;
};

} // namespace fakeclr
