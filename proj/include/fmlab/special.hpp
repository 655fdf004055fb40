#pragma once

#include <cmath>
#include <numbers>

#include "fmlab/error.hpp"

namespace fmlab {

inline double gamma_fn(double x) {
    require(x > 0.0 && std::isfinite(x), ErrorCode::InvalidArgument, "gamma_fn expects x > 0");
    return std::tgamma(x);
}

// Normalizing constant of the Riesz kernel |x|^{alpha-n} / gamma(alpha).
inline double riesz_gamma(double alpha, int n) {
    require(alpha > 0.0 && alpha < n, ErrorCode::InvalidArgument, "need 0 < alpha < n");
    return std::pow(2.0, alpha) * std::pow(std::numbers::pi, 0.5 * n) * gamma_fn(0.5 * alpha) /
           gamma_fn(0.5 * (n - alpha));
}

// Lower incomplete gamma function by its power series (small x).
inline double lower_incomplete_gamma(double s, double x) {
    require(s > 0.0 && x >= 0.0, ErrorCode::InvalidArgument, "lower_incomplete_gamma expects s > 0, x >= 0");
    if (x == 0.0) return 0.0;
    double term = 1.0 / s;
    double sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= x / (s + k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return std::exp(s * std::log(x) - x) * sum;
}

// Composite Simpson rule with an even number of panels.
template <typename Fn>
double simpson(Fn&& fn, double a, double b, int panels) {
    if (panels % 2 != 0) ++panels;
    const double h = (b - a) / panels;
    double s = fn(a) + fn(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * fn(a + i * h);
    return s * h / 3.0;
}

// Average of |x|^{alpha-n} over the grid cell [-h/2, h/2]^n.
inline double singular_cell_average(double alpha, int n, double h) {
    const double half = 0.5 * h;
    if (n == 1) return std::pow(half, alpha - 1.0) / alpha;
    // Polar coordinates over one of the eight triangles of the square.
    const double integral = simpson(
        [&](double theta) { return std::pow(half / std::cos(theta), alpha) / alpha; }, 0.0, 0.25 * std::numbers::pi,
        4000);
    return 8.0 * integral / (h * h);
}

}  // namespace fmlab
