#pragma once

// Test-only central-difference oracle. It only calls forward evaluation, never
// the tape's backward pass, so it checks gradients independently.

#include <algorithm>
#include <cmath>
#include <functional>

#include "cmi/matrix.hpp"

namespace cmi::testing {

/// Numeric gradient of a scalar function of one matrix.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-4) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f(x);
        x[i] = orig - h;
        const double down = f(x);
        x[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

}  // namespace cmi::testing
