#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmlab/error.hpp"
#include "fmlab/grid.hpp"
#include "fmlab/semigroup.hpp"

namespace fmlab {

// ---------------------------------------------------------------------------
// Parameters

/// Morrey indices (p, lambda) in dimension n, optionally tied to alpha by
/// lambda = n - alpha p.
class MorreyParams {
public:
    MorreyParams(int n, double p, double lambda) : n_(n), p_(p), lambda_(lambda) {
        require(n == 1 || n == 2, ErrorCode::InvalidArgument, "dimension must be 1 or 2");
        require(p >= 1.0 && std::isfinite(p), ErrorCode::InvalidArgument, "Morrey exponent p must be >= 1");
        require(lambda >= 0.0 && lambda <= n, ErrorCode::InvalidArgument, "lambda must lie in [0, n]");
    }

    static MorreyParams limiting(int n, double alpha, double p) {
        require(alpha > 0.0 && alpha < n, ErrorCode::InvalidArgument, "alpha must lie in (0, n)");
        const double lambda = n - alpha * p;
        require(lambda >= 0.0, ErrorCode::InvalidArgument, "limiting relation needs alpha p <= n");
        MorreyParams m(n, p, lambda);
        m.alpha_ = alpha;
        // lambda/(p n) + 1/p' = 1 - alpha/n, equivalently n/p - lambda/p = alpha.
        const double inv_conj = 1.0 - 1.0 / p;
        require(std::abs(lambda / (p * n) + inv_conj - (1.0 - alpha / n)) <= 1e-12, ErrorCode::InvalidArgument,
                "exponent identity failed");
        require(std::abs(n / p - lambda / p - alpha) <= 1e-12, ErrorCode::InvalidArgument, "exponent identity failed");
        return m;
    }

    int n() const { return n_; }
    double p() const { return p_; }
    double lambda() const { return lambda_; }
    std::optional<double> alpha() const { return alpha_; }
    double p_conjugate() const { return p_ == 1.0 ? std::numeric_limits<double>::infinity() : p_ / (p_ - 1.0); }
    // r^{(n - lambda)/p}: decay rate of the modulus of a bounded function.
    double bounded_decay_rate() const { return (n_ - lambda_) / p_; }

private:
    int n_;
    double p_;
    double lambda_;
    std::optional<double> alpha_;
};

enum class OscillationMode { MeanAbs, RootMeanSquare };

inline std::string to_string(OscillationMode m) { return m == OscillationMode::MeanAbs ? "mean-abs" : "root-mean-square"; }

struct NormReport {
    double value = 0.0;
    std::size_t center = 0;
    double radius = 0.0;
    std::vector<double> radii;
    std::string mode;
    std::vector<std::string> notes;
};

namespace detail {

inline void require_radii(const GridSpec& spec, std::span<const double> radii) {
    require(!radii.empty(), ErrorCode::InvalidArgument, "radius set is empty");
    for (double r : radii) require_radius_in_range(spec, r);
}

// Ties break toward the smallest (radius, center) since scans run in that order.
inline void offer(NormReport& rep, double v, std::size_t center, double r) {
    if (v > rep.value) {
        rep.value = v;
        rep.center = center;
        rep.radius = r;
    }
}

inline NormReport start_report(std::span<const double> radii, std::string mode) {
    NormReport rep;
    rep.radii.assign(radii.begin(), radii.end());
    rep.mode = std::move(mode);
    rep.notes.push_back("sup over dyadic radii up to L/4 and grid centers only");
    return rep;
}

inline GridFunction pow_abs(const GridFunction& f, double p) {
    return transform(f, [p](double v) { return std::pow(std::abs(v), p); });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lebesgue norms

inline double lp_norm(const GridFunction& f, double p) {
    require(p >= 1.0 && std::isfinite(p), ErrorCode::InvalidArgument, "lp_norm needs 1 <= p < inf");
    double s = 0.0;
    for (double v : f.values()) s += std::pow(std::abs(v), p);
    return std::pow(s * f.spec().cell_volume(), 1.0 / p);
}

/// sup_s s m{|f| > s}^{1/p}, exact on grid data via sorting.
inline double weak_lp_norm(const GridFunction& f, double p) {
    require(p >= 1.0 && std::isfinite(p), ErrorCode::InvalidArgument, "weak_lp_norm needs 1 <= p < inf");
    std::vector<double> a(f.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(f[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    const double hn = f.spec().cell_volume();
    double best = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) best = std::max(best, a[k] * std::pow((k + 1) * hn, 1.0 / p));
    return best;
}

// ---------------------------------------------------------------------------
// Morrey

/// sup over centers of m(B)^{-lambda/(pn)} (int_B |f|^p)^{1/p} at radius r.
inline NormReport morrey_modulus(const GridFunction& f, const MorreyParams& params, double r,
                                 EvalMode mode = EvalMode::Fast) {
    require(params.n() == f.spec().dimension(), ErrorCode::SpecMismatch, "Morrey dimension differs from grid");
    const double radii[] = {r};
    detail::require_radii(f.spec(), radii);
    NormReport rep = detail::start_report(radii, "morrey");
    const BallMask mask(f.spec(), r);
    const double m = mask.measure();
    const double p = params.p();
    const double scale = std::pow(m, -params.lambda() / (p * params.n()));
    const auto means = ball_mean(detail::pow_abs(f, p), r, mode);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double integral = std::max(means[i], 0.0) * m;
        detail::offer(rep, scale * std::pow(integral, 1.0 / p), i, r);
    }
    return rep;
}

inline NormReport morrey_norm(const GridFunction& f, const MorreyParams& params, std::span<const double> radii,
                              EvalMode mode = EvalMode::Fast) {
    detail::require_radii(f.spec(), radii);
    NormReport rep = detail::start_report(radii, "morrey");
    for (double r : radii) {
        const auto one = morrey_modulus(f, params, r, mode);
        detail::offer(rep, one.value, one.center, r);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// BMO / VMO

namespace detail {

// Per-center mean oscillation at radius r.
inline std::vector<double> oscillation(const GridFunction& f, double r, OscillationMode osc, EvalMode mode) {
    const GridSpec& spec = f.spec();
    const auto m = ball_mean(f, r, mode);
    std::vector<double> out(spec.size());
    if (osc == OscillationMode::RootMeanSquare) {
        const auto m2 = ball_mean(transform(f, [](double v) { return v * v; }), r, mode);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(std::max(m2[i] - m[i] * m[i], 0.0));
        return out;
    }
    const BallMask mask(spec, r);
    const double card = static_cast<double>(mask.cardinality());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double c = m[i];
        double s = 0.0;
        for_each_in_ball(f, i, mask, [&](std::size_t j, bool inside) { s += std::abs((inside ? f[j] : 0.0) - c); });
        out[i] = s / card;
    }
    return out;
}

}  // namespace detail

inline NormReport bmo_norm(const GridFunction& f, OscillationMode osc, std::span<const double> radii,
                           EvalMode mode = EvalMode::Fast) {
    detail::require_radii(f.spec(), radii);
    NormReport rep = detail::start_report(radii, to_string(osc));
    for (double r : radii) {
        const auto o = detail::oscillation(f, r, osc, mode);
        for (std::size_t i = 0; i < o.size(); ++i) detail::offer(rep, o[i], i, r);
    }
    return rep;
}

/// eta(f; r): sup over centers of the mean-abs oscillation at radius r.
inline double vmo_modulus(const GridFunction& f, double r, EvalMode mode = EvalMode::Fast) {
    const double radii[] = {r};
    return bmo_norm(f, OscillationMode::MeanAbs, radii, mode).value;
}

// ---------------------------------------------------------------------------
// Semigroup-adapted oscillation

/// D_r(x0) = mean over B(x0, r) of |f - e^{-r^2 L} f|.
inline GridFunction semigroup_oscillation(const GridFunction& f, const SemigroupOperator& op, double r,
                                          EvalMode mode = EvalMode::Fast) {
    const auto g = combine(1.0, f, -1.0, op.apply(r * r, f));
    return ball_mean(abs(g), r, mode);
}

/// M#_L f(x) = max over radii and balls B(x0, r) containing x of D_r(x0).
inline GridFunction sharp_maximal_L(const GridFunction& f, const SemigroupOperator& op, std::span<const double> radii,
                                    EvalMode mode = EvalMode::Fast) {
    detail::require_radii(f.spec(), radii);
    std::vector<double> out(f.size(), 0.0);
    for (double r : radii) {
        const auto dil = ball_max_dilation(semigroup_oscillation(f, op, r, mode), r);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], dil[i]);
    }
    return GridFunction(f.spec(), std::move(out), f.support());
}

/// Ball-sup form: sup over radii and centers of D_r.
inline NormReport bmoL_norm(const GridFunction& f, const SemigroupOperator& op, std::span<const double> radii,
                            EvalMode mode = EvalMode::Fast) {
    detail::require_radii(f.spec(), radii);
    NormReport rep = detail::start_report(radii, "bmo-L mean-abs");
    for (double r : radii) {
        const auto d = semigroup_oscillation(f, op, r, mode);
        for (std::size_t i = 0; i < d.size(); ++i) detail::offer(rep, d[i], i, r);
    }
    if (!op.conserves_constants()) rep.notes.push_back("raw semi-norm; no quotient by the kernel of L");
    return rep;
}

inline double vmoL_modulus(const GridFunction& f, const SemigroupOperator& op, double r, EvalMode mode = EvalMode::Fast) {
    const double radii[] = {r};
    return bmoL_norm(f, op, radii, mode).value;
}

// ---------------------------------------------------------------------------
// Gradients

/// |grad f| by central differences (compact data read zero outside the box).
inline GridFunction gradient_magnitude(const GridFunction& f) {
    const GridSpec& spec = f.spec();
    const long N = static_cast<long>(spec.points_per_axis());
    const bool periodic = f.support() == SupportTag::Periodic;
    const double inv2h = 0.5 / spec.spacing();
    auto at = [&](long a, long b) -> double {
        if (periodic) {
            a = (a % N + N) % N;
            b = (b % N + N) % N;
        } else if (a < 0 || a >= N || b < 0 || b >= N) {
            return 0.0;
        }
        return f[spec.flatten(static_cast<std::size_t>(a), spec.dimension() == 1 ? 0 : static_cast<std::size_t>(b))];
    };
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto idx = spec.unflatten(i);
        const long a = static_cast<long>(idx[0]);
        const long b = static_cast<long>(idx[1]);
        const double g0 = (at(a + 1, b) - at(a - 1, b)) * inv2h;
        const double g1 = spec.dimension() == 1 ? 0.0 : (at(a, b + 1) - at(a, b - 1)) * inv2h;
        out[i] = std::sqrt(g0 * g0 + g1 * g1);
    }
    return GridFunction(spec, std::move(out), f.support());
}

/// ||grad f|| in M^{p, n-p}.
inline NormReport cis_norm(const GridFunction& f, double p, std::span<const double> radii,
                           EvalMode mode = EvalMode::Fast) {
    const int n = f.spec().dimension();
    require(p >= 1.0 && p <= n, ErrorCode::InvalidArgument, "cis_norm needs 1 <= p <= n");
    auto rep = morrey_norm(gradient_magnitude(f), MorreyParams(n, p, n - p), radii, mode);
    rep.mode = "cis";
    return rep;
}

/// Poincare ratio on one ball: mean |f - f_B| / (r mean |grad f|). Returns
/// nullopt when the gradient mean vanishes.
inline std::optional<double> poincare_ratio(const GridFunction& f, const GridFunction& grad, std::size_t center,
                                            double r) {
    const BallMask mask(f.spec(), r);
    const double card = static_cast<double>(mask.cardinality());
    double mean = 0.0;
    double gmean = 0.0;
    detail::for_each_in_ball(f, center, mask, [&](std::size_t j, bool inside) {
        if (inside) {
            mean += f[j];
            gmean += grad[j];
        }
    });
    mean /= card;
    gmean /= card;
    double osc = 0.0;
    detail::for_each_in_ball(f, center, mask,
                             [&](std::size_t j, bool inside) { osc += std::abs((inside ? f[j] : 0.0) - mean); });
    osc /= card;
    const double scale = std::max(f.max_abs(), 1e-300) / f.spec().side_length();
    if (gmean <= 1e-12 * scale) return std::nullopt;
    return osc / (r * gmean);
}

/// Largest Poincare ratio over radii and the centers accepted by `keep`.
template <typename Keep>
NormReport poincare_scan(const GridFunction& f, std::span<const double> radii, Keep&& keep) {
    detail::require_radii(f.spec(), radii);
    NormReport rep = detail::start_report(radii, "poincare mean-abs / (r mean |grad|)");
    const auto grad = gradient_magnitude(f);
    for (double r : radii) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!keep(i, r)) continue;
            if (const auto v = poincare_ratio(f, grad, i, r)) detail::offer(rep, *v, i, r);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Series helpers

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument, "slope needs two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(x[i] > 0.0 && y[i] > 0.0, ErrorCode::InvalidArgument, "log-log slope needs positive data");
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// Modulus series r -> morrey_modulus(f, params, r).
inline std::vector<double> morrey_modulus_series(const GridFunction& f, const MorreyParams& params,
                                                 std::span<const double> radii) {
    std::vector<double> out;
    for (double r : radii) out.push_back(morrey_modulus(f, params, r).value);
    return out;
}

}  // namespace fmlab
