#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "dannkit/autodiff.hpp"

namespace dannkit {

// Central finite differences (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps).
// Independent of the tape machinery; serves as the gradient oracle.
inline Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                                   const Tensor& x, double eps) {
    if (!(eps > 0.0)) {
        throw ConfigError("finite_diff_gradient: eps must be positive");
    }
    Tensor grad(x.shape, 0.0);
    Tensor probe = x;
    probe.node = -1;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe.values[i];
        probe.values[i] = saved + eps;
        const double up = f(probe);
        probe.values[i] = saved - eps;
        const double down = f(probe);
        probe.values[i] = saved;
        grad.values[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

// |a-b| / max(1, |a|, |b|): relative where gradients are large, absolute near zero.
inline double gradient_rel_error(const double a, const double b) {
    const double denom = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / denom;
}

inline double max_gradient_rel_error(const Tensor& analytic, const Tensor& numeric) {
    if (analytic.size() != numeric.size()) {
        throw ShapeError("max_gradient_rel_error: size mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, gradient_rel_error(analytic.values[i], numeric.values[i]));
    }
    return worst;
}

} // namespace dannkit
