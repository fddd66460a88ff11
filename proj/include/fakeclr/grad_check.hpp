#pragma once

#include <cmath>
#include <functional>

#include "fakeclr/autodiff.hpp"

namespace fakeclr {

using ScalarFn = std::function<ad::Var(const ad::Var&)>;

// Max relative disagreement between the tape gradient of f at x and central
// finite differences: max_i |analytic_i - fd_i| / max(1, |fd_i|).
inline double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
    if (eps < 1e-6 || eps > 1e-3)
        throw invalid_parameter("grad_check: eps outside [1e-6, 1e-3]");

    ad::Var input = ad::leaf(x);
    ad::Var out = f(input);
    if (out->value.size() != 1)
        throw contract_violation("grad_check: f must return a scalar");
    if (!out->value.all_finite())
        throw evaluation_error("grad_check: non-finite evaluation at x");
    ad::backward(out);

    auto eval = [&](const Tensor& point) {
        ad::Var v = f(ad::leaf(point, false));
        const double y = v->value[0];
        if (!std::isfinite(y))
            throw evaluation_error("grad_check: non-finite evaluation at perturbed point");
        return y;
    };

    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = eval(probe);
        probe[i] = orig - eps;
        const double fm = eval(probe);
        probe[i] = orig;
        const double fd = (fp - fm) / (2.0 * eps);
        const double rel = std::abs(input->grad[i] - fd) / std::max(1.0, std::abs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace fakeclr
