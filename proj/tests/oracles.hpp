#pragma once

// Reference implementations used only by tests. Each one is written from the
// defining formula with plain loops and shares no code path with the library
// beyond GridSpec geometry.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "fmlab/grid.hpp"

namespace oracle {

using fmlab::GridFunction;
using fmlab::GridSpec;
using fmlab::SupportTag;

inline double heat_kernel(double t, double d2, int n) {
    return std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-d2 / (4.0 * t));
}

// Wrapped signed offset in index units.
inline long wrap(long d, long N) {
    d = ((d % N) + N) % N;
    return d >= N / 2 ? d - N : d;
}

// Integer offsets of the discrete Euclidean ball of radius r.
inline std::vector<std::array<long, 2>> ball_offsets(const GridSpec& spec, double r) {
    const double rr = r / spec.spacing();
    const long m = static_cast<long>(std::floor(rr + 1e-9));
    std::vector<std::array<long, 2>> out;
    for (long a = -m; a <= m; ++a) {
        if (spec.dimension() == 1) {
            out.push_back({a, 0});
            continue;
        }
        for (long b = -m; b <= m; ++b) {
            if (static_cast<double>(a * a + b * b) <= rr * rr + 1e-9) out.push_back({a, b});
        }
    }
    return out;
}

// Value of f at node `center` shifted by offset d; compact data read 0 outside.
inline bool shifted(const GridFunction& f, std::size_t center, std::array<long, 2> d, double& value) {
    const GridSpec& s = f.spec();
    const long N = static_cast<long>(s.points_per_axis());
    const auto c = s.unflatten(center);
    long a = static_cast<long>(c[0]) + d[0];
    long b = static_cast<long>(c[1]) + d[1];
    if (f.support() == SupportTag::Periodic) {
        a = ((a % N) + N) % N;
        b = s.dimension() == 1 ? 0 : ((b % N) + N) % N;
    } else if (a < 0 || a >= N || (s.dimension() == 2 && (b < 0 || b >= N))) {
        value = 0.0;
        return false;
    }
    value = f[s.flatten(static_cast<std::size_t>(a), static_cast<std::size_t>(b))];
    return true;
}

inline std::vector<double> ball_mean(const GridFunction& f, double r) {
    const auto offs = ball_offsets(f.spec(), r);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double s = 0.0;
        for (const auto& d : offs) {
            double v;
            shifted(f, i, d, v);
            s += v;
        }
        out[i] = s / static_cast<double>(offs.size());
    }
    return out;
}

inline double morrey_norm(const GridFunction& f, double p, double lambda, const std::vector<double>& radii) {
    const int n = f.spec().dimension();
    double best = 0.0;
    for (double r : radii) {
        const auto offs = ball_offsets(f.spec(), r);
        const double m = static_cast<double>(offs.size()) * f.spec().cell_volume();
        for (std::size_t i = 0; i < f.size(); ++i) {
            double s = 0.0;
            for (const auto& d : offs) {
                double v;
                shifted(f, i, d, v);
                s += std::pow(std::abs(v), p);
            }
            best = std::max(best, std::pow(m, -lambda / (p * n)) * std::pow(s * f.spec().cell_volume(), 1.0 / p));
        }
    }
    return best;
}

inline double bmo_mean_abs(const GridFunction& f, const std::vector<double>& radii) {
    double best = 0.0;
    for (double r : radii) {
        const auto offs = ball_offsets(f.spec(), r);
        for (std::size_t i = 0; i < f.size(); ++i) {
            double mean = 0.0;
            std::vector<double> vals;
            for (const auto& d : offs) {
                double v;
                shifted(f, i, d, v);
                vals.push_back(v);
                mean += v;
            }
            mean /= static_cast<double>(vals.size());
            double osc = 0.0;
            for (double v : vals) osc += std::abs(v - mean);
            best = std::max(best, osc / static_cast<double>(vals.size()));
        }
    }
    return best;
}

inline double bmo_rms(const GridFunction& f, const std::vector<double>& radii) {
    double best = 0.0;
    for (double r : radii) {
        const auto offs = ball_offsets(f.spec(), r);
        for (std::size_t i = 0; i < f.size(); ++i) {
            std::vector<double> vals;
            double mean = 0.0;
            for (const auto& d : offs) {
                double v;
                shifted(f, i, d, v);
                vals.push_back(v);
                mean += v;
            }
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            best = std::max(best, std::sqrt(var / static_cast<double>(vals.size())));
        }
    }
    return best;
}

// Triple loop: for every x, every radius and every center x0 with x in
// B(x0, r), the mean of |g_r| over B(x0, r) where g_r = f - P_{r^2} f is
// supplied by the caller.
inline std::vector<double> sharp_maximal(const GridFunction& f, const std::vector<double>& radii,
                                         const std::function<GridFunction(double)>& residual) {
    const GridSpec& s = f.spec();
    std::vector<double> out(f.size(), 0.0);
    for (double r : radii) {
        const GridFunction g = residual(r);
        const auto offs = ball_offsets(s, r);
        std::vector<double> D(f.size());
        for (std::size_t c = 0; c < f.size(); ++c) {
            double acc = 0.0;
            for (const auto& d : offs) {
                double v;
                shifted(g, c, d, v);
                acc += std::abs(v);
            }
            D[c] = acc / static_cast<double>(offs.size());
        }
        for (std::size_t x = 0; x < f.size(); ++x) {
            for (std::size_t c = 0; c < f.size(); ++c) {
                // x in B(c, r): the offset x - c is in the mask (torus or box).
                const auto xi = s.unflatten(x);
                const auto ci = s.unflatten(c);
                const long N = static_cast<long>(s.points_per_axis());
                long d0 = static_cast<long>(xi[0]) - static_cast<long>(ci[0]);
                long d1 = static_cast<long>(xi[1]) - static_cast<long>(ci[1]);
                if (f.support() == SupportTag::Periodic) {
                    d0 = wrap(d0, N);
                    d1 = wrap(d1, N);
                }
                const double dist = std::hypot(static_cast<double>(d0), static_cast<double>(d1)) * s.spacing();
                if (dist <= r + 1e-9 * s.spacing()) out[x] = std::max(out[x], D[c]);
            }
        }
    }
    return out;
}

// sup over levels s of s * m{|f| > s}^{1/p}, scanning every level just below
// each distinct value by counting.
inline double weak_norm(const GridFunction& f, double p) {
    double best = 0.0;
    const double hn = f.spec().cell_volume();
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double level = std::abs(f[i]);
        std::size_t count = 0;
        for (std::size_t j = 0; j < f.size(); ++j) count += std::abs(f[j]) >= level ? 1 : 0;
        best = std::max(best, level * std::pow(static_cast<double>(count) * hn, 1.0 / p));
    }
    return best;
}

inline std::vector<double> random_values(std::size_t n, unsigned seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(g);
    return v;
}

// Periodic Fourier spectral second-derivative matrix on N points, period L.
inline Eigen::MatrixXd spectral_d2(std::size_t N, double L) {
    const double hp = 2.0 * std::numbers::pi / static_cast<double>(N);
    const double scale = std::pow(2.0 * std::numbers::pi / L, 2);
    Eigen::MatrixXd D(N, N);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            const long k = static_cast<long>(i) - static_cast<long>(j);
            double v;
            if (k == 0) {
                v = -std::numbers::pi * std::numbers::pi / (3.0 * hp * hp) - 1.0 / 6.0;
            } else {
                const double s = std::sin(0.5 * k * hp);
                v = -((k % 2 == 0) ? 1.0 : -1.0) / (2.0 * s * s);
            }
            D(i, j) = v * scale;
        }
    }
    return D;
}

// exp(-t (-D2 + diag V)) f via the dense matrix exponential.
inline std::vector<double> schrodinger_expm(const std::vector<double>& V, const std::vector<double>& f, double L,
                                            double t) {
    const std::size_t N = f.size();
    Eigen::MatrixXd A = -spectral_d2(N, L);
    for (std::size_t i = 0; i < N; ++i) A(i, i) += V[i];
    const Eigen::MatrixXd E = (-t * A).exp();
    const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(N));
    Eigen::VectorXd y = E * x;
    return {y.data(), y.data() + y.size()};
}

// int_a^b g(y) dy for g with an integrable |y - s|^{-beta} singularity at an
// endpoint s = a, handled by the substitution y = a + u^{1/(1-beta)}.
inline double singular_endpoint_integral(const std::function<double(double)>& g, double a, double b, double beta,
                                         int panels = 20000) {
    const double k = 1.0 / (1.0 - beta);
    const double umax = std::pow(b - a, 1.0 - beta);
    // With y - a = u^k the weight (y - a)^{-beta} dy becomes k du.
    auto integrand = [&](double u) { return g(a + std::pow(u, k)) * k; };
    const double h = umax / panels;
    double s = integrand(0.0) + integrand(umax);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
    return s * h / 3.0;
}

// gamma(alpha) = 2^alpha pi^{n/2} Gamma(alpha/2) / Gamma((n - alpha)/2).
inline double riesz_constant(double alpha, int n) {
    return std::pow(2.0, alpha) * std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(0.5 * alpha) /
           std::tgamma(0.5 * (n - alpha));
}

// Periodic 1-D multiplier m(k) applied by an O(N^2) real DFT.
inline std::vector<double> dft_multiplier(const std::vector<double>& f, double L,
                                          const std::function<double(double)>& m) {
    const std::size_t N = f.size();
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> out(N, 0.0);
    for (std::size_t q = 0; q < N; ++q) {
        const long kq = static_cast<long>(q) < static_cast<long>(N / 2) ? static_cast<long>(q)
                                                                       : static_cast<long>(q) - static_cast<long>(N);
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const double ph = two_pi * static_cast<double>(q * j % N) / static_cast<double>(N);
            re += f[j] * std::cos(ph);
            im -= f[j] * std::sin(ph);
        }
        const double mk = m(two_pi * static_cast<double>(kq) / L);
        for (std::size_t j = 0; j < N; ++j) {
            const double ph = two_pi * static_cast<double>(q * j % N) / static_cast<double>(N);
            out[j] += mk * (re * std::cos(ph) - im * std::sin(ph)) / static_cast<double>(N);
        }
    }
    return out;
}

}  // namespace oracle
