#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmlab/error.hpp"
#include "fmlab/fft.hpp"
#include "fmlab/grid.hpp"
#include "fmlab/semigroup.hpp"
#include "fmlab/special.hpp"

namespace fmlab {

// ---------------------------------------------------------------------------
// Subordination quadrature

/**
 * Trapezoid rule in u = log t on [t_min, t_max]:
 *   (1/Gamma(a/2)) int e^{-tL} f t^{a/2 - 1} dt = (1/Gamma(a/2)) int e^{-tL} f t^{a/2} du.
 */
struct QuadratureSpec {
    double t_min = 0.0;
    double t_max = 0.0;
    int nodes_per_decade = 16;

    static QuadratureSpec defaults(const GridSpec& spec, int nodes_per_decade = 16) {
        const double h = spec.spacing();
        const double span = spec.padding_factor() * spec.side_length();
        return {0.25 * h * h, span * span, nodes_per_decade};
    }

    void validate() const {
        require(t_min > 0.0 && std::isfinite(t_min) && t_max > t_min && std::isfinite(t_max),
                ErrorCode::InvalidArgument, "quadrature needs 0 < t_min < t_max");
        require(nodes_per_decade >= 8, ErrorCode::InvalidArgument, "nodes_per_decade must be >= 8");
    }

    // Number of trapezoid intervals.
    std::size_t node_count() const {
        return static_cast<std::size_t>(std::ceil(nodes_per_decade * std::log10(t_max / t_min) - 1e-9));
    }

    std::vector<double> times() const {
        const std::size_t K = node_count();
        const double du = std::log(t_max / t_min) / static_cast<double>(K);
        std::vector<double> t(K + 1);
        for (std::size_t i = 0; i <= K; ++i) t[i] = t_min * std::exp(du * static_cast<double>(i));
        t.back() = t_max;
        return t;
    }

    // Weights include t^{a/2} and 1/Gamma(a/2).
    std::vector<double> weights(double alpha) const {
        const std::size_t K = node_count();
        const double du = std::log(t_max / t_min) / static_cast<double>(K);
        const double g = gamma_fn(0.5 * alpha);
        const auto t = times();
        std::vector<double> w(K + 1);
        for (std::size_t i = 0; i <= K; ++i) {
            w[i] = du * std::pow(t[i], 0.5 * alpha) / g;
            if (i == 0 || i == K) w[i] *= 0.5;
        }
        return w;
    }

    // (1/Gamma(a/2)) int_0^{t_min} t^{a/2-1} dt: weight of e^{-tL} f ~ f below t_min.
    double lower_tail_weight(double alpha) const {
        return std::pow(t_min, 0.5 * alpha) / (0.5 * alpha) / gamma_fn(0.5 * alpha);
    }
};

enum class DcMode { ProjectMeanZero, None };

inline std::string to_string(DcMode m) { return m == DcMode::ProjectMeanZero ? "project-mean-zero" : "none"; }

/// L^{-alpha/2} for one semigroup backend.
class FracOperator {
public:
    FracOperator(SemigroupOperator semigroup, double alpha, std::optional<QuadratureSpec> quadrature = std::nullopt,
                 DcMode dc_mode = DcMode::ProjectMeanZero)
        : semigroup_(std::move(semigroup)),
          alpha_(alpha),
          quadrature_(quadrature.value_or(QuadratureSpec::defaults(semigroup_.spec()))),
          dc_mode_(dc_mode) {
        const int n = semigroup_.spec().dimension();
        require(alpha > 0.0 && alpha < n, ErrorCode::InvalidArgument,
                "alpha must lie in (0, n), got " + std::to_string(alpha));
        quadrature_.validate();
    }

    const SemigroupOperator& semigroup() const { return semigroup_; }
    const GridSpec& spec() const { return semigroup_.spec(); }
    double alpha() const { return alpha_; }
    const QuadratureSpec& quadrature() const { return quadrature_; }
    DcMode dc_mode() const { return dc_mode_; }

    FracOperator with_quadrature(const QuadratureSpec& q) const { return FracOperator(semigroup_, alpha_, q, dc_mode_); }

private:
    SemigroupOperator semigroup_;
    double alpha_;
    QuadratureSpec quadrature_;
    DcMode dc_mode_;
};

struct FracResult {
    GridFunction value;
    double removed_mean = 0.0;
    double lower_tail_weight = 0.0;
    // Estimate of the neglected part of the integral above t_max (max norm).
    double upper_tail_estimate = 0.0;
    bool upper_tail_included = false;
    std::size_t nodes = 0;
};

namespace detail {

// Precomputed quadrature for one (operator, support) pair. Reused for every
// column of a dense kernel.
class FracEngine {
public:
    FracEngine(const FracOperator& op, SupportTag support) : op_(op), support_(support) {
        const auto& S = op.semigroup();
        const GridSpec& spec = op.spec();
        const int n = spec.dimension();
        const double alpha = op.alpha();
        const auto& q = op.quadrature();
        times_ = q.times();
        weights_ = q.weights(alpha);
        lower_ = q.lower_tail_weight(alpha);

        if (support == SupportTag::Periodic) {
            project_ = op.dc_mode() == DcMode::ProjectMeanZero && S.conserves_constants();
            if (op.dc_mode() == DcMode::None) {
                const bool decays = S.kind() == SemigroupKind::Schrodinger && S.potential()->min() > 0.0;
                must_be_mean_zero_ = !decays;
            }
        } else {
            require(S.kind() != SemigroupKind::Divform, ErrorCode::InvalidArgument, "divform backend is periodic only");
        }

        switch (S.kind()) {
            case SemigroupKind::Heat: build_heat(spec, n, alpha); break;
            case SemigroupKind::Divform: build_divform(); break;
            case SemigroupKind::Schrodinger: {
                const double vmin = S.potential()->min();
                // e^{-tL} contracts at rate e^{-t min V}; heat decay is used for compact data.
                if (support == SupportTag::Compact) {
                    upper_factor_ = std::pow(4.0 * std::numbers::pi, -0.5 * n) * std::pow(q.t_max, 0.5 * (alpha - n)) *
                                    2.0 / ((n - alpha) * gamma_fn(0.5 * alpha));
                    upper_uses_l1_ = true;
                } else if (vmin > 0.0) {
                    upper_factor_ = std::exp(-q.t_max * vmin) * std::pow(q.t_max, 0.5 * alpha - 1.0) / vmin /
                                    gamma_fn(0.5 * alpha);
                }
                break;
            }
        }
    }

    FracResult operator()(const GridFunction& f) const {
        const GridSpec& spec = op_.spec();
        require(f.spec() == spec, ErrorCode::SpecMismatch, "function grid differs from operator grid");
        require(f.support() == support_, ErrorCode::InvalidArgument, "support tag differs from engine");
        FracResult res{f, 0.0, lower_, 0.0, false, times_.size()};

        std::vector<double> x(f.values().begin(), f.values().end());
        const double mean = f.sum() / static_cast<double>(f.size());
        if (project_) {
            for (double& v : x) v -= mean;
            res.removed_mean = mean;
        } else if (must_be_mean_zero_) {
            const double scale = std::max(f.max_abs(), 1e-300);
            if (std::abs(mean) > 1e-12 * scale) {
                throw Error(ErrorCode::Divergent,
                            "subordination integral diverges: periodic data with mean " + std::to_string(mean) +
                                " and no decay on constants (use project-mean-zero)");
            }
        }

        const double l1 = [&] {
            double s = 0.0;
            for (double v : x) s += std::abs(v);
            return s * spec.cell_volume();
        }();
        const double mass = [&] {
            double s = 0.0;
            for (double v : x) s += v;
            return s * spec.cell_volume();
        }();
        double max_abs = 0.0;
        for (double v : x) max_abs = std::max(max_abs, std::abs(v));

        std::vector<double> out;
        switch (op_.semigroup().kind()) {
            case SemigroupKind::Heat: out = apply_heat(x); break;
            case SemigroupKind::Divform: out = apply_divform(x); break;
            case SemigroupKind::Schrodinger: out = apply_schrodinger(x); break;
        }
        if (op_.semigroup().kind() == SemigroupKind::Heat && support_ == SupportTag::Compact) {
            res.upper_tail_included = true;
            res.upper_tail_estimate = upper_factor_ * std::abs(mass);
        } else if (upper_uses_l1_) {
            res.upper_tail_estimate = upper_factor_ * l1;
        } else {
            res.upper_tail_estimate = upper_factor_ * max_abs;
        }
        res.value = GridFunction(spec, std::move(out), support_);
        return res;
    }

private:
    void build_heat(const GridSpec& spec, int n, double alpha) {
        const auto& q = op_.quadrature();
        const GridSpec work = work_spec(spec, support_);
        const auto k2 = fft::wavenumber_squared(work.shape(), sides(work));
        table_.assign(k2.size(), 0.0);
        if (support_ == SupportTag::Periodic) {
            // Mean-zero data on the torus: the tail above t_max is below e^{-t_max (2 pi / L)^2}.
            for (std::size_t k = 0; k < k2.size(); ++k) {
                double m = lower_;
                for (std::size_t i = 0; i < times_.size(); ++i) m += weights_[i] * std::exp(-times_[i] * k2[k]);
                table_[k] = m;
            }
            table_[0] = project_ ? 0.0 : table_[0];
            const double k1 = 2.0 * std::numbers::pi / spec.side_length();
            upper_factor_ = std::exp(-q.t_max * k1 * k1) * std::pow(q.t_max, 0.5 * alpha - 1.0) / (k1 * k1) /
                            gamma_fn(0.5 * alpha);
            return;
        }
        // Compact: spectral kernels for small t, sampled Gaussians beyond.
        const double t_switch = compact_spectral_limit(spec);
        gaussian_.assign(work.size(), 0.0);
        const int P = static_cast<int>(work.points_per_axis());
        const double h = work.spacing();
        std::vector<double> r2(work.size());
        for (std::size_t i = 0; i < work.size(); ++i) {
            const auto idx = work.unflatten(i);
            const double d0 = fft::signed_index(static_cast<int>(idx[0]), P) * h;
            const double d1 = n == 1 ? 0.0 : fft::signed_index(static_cast<int>(idx[1]), P) * h;
            r2[i] = d0 * d0 + d1 * d1;
        }
        for (std::size_t k = 0; k < k2.size(); ++k) table_[k] = lower_;
        for (std::size_t i = 0; i < times_.size(); ++i) {
            const double t = times_[i];
            if (t <= t_switch) {
                for (std::size_t k = 0; k < k2.size(); ++k) table_[k] += weights_[i] * std::exp(-t * k2[k]);
            } else {
                const double c = weights_[i] * std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * spec.cell_volume();
                for (std::size_t j = 0; j < r2.size(); ++j) gaussian_[j] += c * std::exp(-r2[j] / (4.0 * t));
            }
        }
        // Exact heat tail above t_max, per offset:
        // (4 pi)^{-n/2} (r^2/4)^{-s} lowergamma(s, r^2 / (4 t_max)) / Gamma(a/2), s = (n - a)/2.
        const double s = 0.5 * (n - alpha);
        const double g = gamma_fn(0.5 * alpha);
        const double c0 = std::pow(4.0 * std::numbers::pi, -0.5 * n) / g;
        upper_factor_ = c0 * std::pow(q.t_max, -s) / s;
        for (std::size_t j = 0; j < r2.size(); ++j) {
            const double x = r2[j] / (4.0 * q.t_max);
            const double tail = x == 0.0 ? upper_factor_ : c0 * std::pow(0.25 * r2[j], -s) * lower_incomplete_gamma(s, x);
            gaussian_[j] += tail * spec.cell_volume();
        }
    }

    void build_divform() {
        const auto* s = op_.semigroup().divform_spectrum();
        const auto& q = op_.quadrature();
        const Eigen::Index M = s->values.size();
        multiplier_.resize(M);
        double gap = 0.0;
        for (Eigen::Index k = 0; k < M; ++k) {
            const double lam = std::max(s->values(k), 0.0);
            double m = lower_;
            for (std::size_t i = 0; i < times_.size(); ++i) m += weights_[i] * std::exp(-times_[i] * lam);
            multiplier_(k) = m;
            if (k == 1) gap = lam;
        }
        // The constant mode is the lowest eigenvector; it is removed by the projection.
        if (project_) multiplier_(0) = 0.0;
        if (gap > 0.0) {
            upper_factor_ =
                std::exp(-q.t_max * gap) * std::pow(q.t_max, 0.5 * op_.alpha() - 1.0) / gap / gamma_fn(0.5 * op_.alpha());
        }
    }

    std::vector<double> apply_heat(const std::vector<double>& x) const {
        const GridSpec& spec = op_.spec();
        if (support_ == SupportTag::Periodic) {
            std::vector<double> out(x.size());
            fft::spectral_multiply_table(spec.shape(), table_, x, out);
            return out;
        }
        const GridSpec work = spec.padded();
        const auto big = embed(spec, x);
        std::vector<double> a(big.size());
        fft::spectral_multiply_table(work.shape(), table_, big, a);
        const auto b = fft::circular_convolve(work.shape(), big, gaussian_);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        return crop(spec, a);
    }

    std::vector<double> apply_divform(const std::vector<double>& x) const {
        const auto* s = op_.semigroup().divform_spectrum();
        const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::VectorXd c = s->vectors.transpose() * v;
        c = c.cwiseProduct(multiplier_);
        Eigen::VectorXd y = s->vectors * c;
        return {y.data(), y.data() + y.size()};
    }

    // Advances e^{-tL} along the t-grid, one Strang run per increment.
    std::vector<double> apply_schrodinger(const std::vector<double>& x) const {
        const auto& S = op_.semigroup();
        const GridSpec& spec = op_.spec();
        GridFunction u(spec, x, support_);
        std::vector<double> acc(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) acc[i] = lower_ * x[i];
        double t_prev = 0.0;
        for (std::size_t i = 0; i < times_.size(); ++i) {
            u = S.apply_schrodinger(times_[i] - t_prev, u, S.substeps());
            t_prev = times_[i];
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += weights_[i] * u[j];
        }
        return acc;
    }

    FracOperator op_;
    SupportTag support_;
    std::vector<double> times_;
    std::vector<double> weights_;
    double lower_ = 0.0;
    bool project_ = false;
    bool must_be_mean_zero_ = false;
    bool upper_uses_l1_ = false;
    double upper_factor_ = 0.0;
    std::vector<double> table_;
    std::vector<double> gaussian_;
    Eigen::VectorXd multiplier_;
};

}  // namespace detail

/// Subordination quadrature with tail bookkeeping.
inline FracResult frac_apply_report(const FracOperator& op, const GridFunction& f) {
    return detail::FracEngine(op, f.support())(f);
}

inline GridFunction frac_apply(const FracOperator& op, const GridFunction& f) { return frac_apply_report(op, f).value; }

// ---------------------------------------------------------------------------
// Riesz potential

/// Riesz kernel |x|^{alpha-n} / gamma(alpha) on the padded torus (wrap order),
/// times h^n. The origin cell holds the exact cell average.
inline std::vector<double> riesz_kernel_wrapped(double alpha, const GridSpec& spec) {
    const int n = spec.dimension();
    const double g = riesz_gamma(alpha, n);
    const GridSpec work = spec.padded();
    const int P = static_cast<int>(work.points_per_axis());
    const double h = spec.spacing();
    std::vector<double> k(work.size());
    for (std::size_t i = 0; i < work.size(); ++i) {
        const auto idx = work.unflatten(i);
        const double d0 = fft::signed_index(static_cast<int>(idx[0]), P) * h;
        const double d1 = n == 1 ? 0.0 : fft::signed_index(static_cast<int>(idx[1]), P) * h;
        const double r = std::sqrt(d0 * d0 + d1 * d1);
        k[i] = (i == 0 ? singular_cell_average(alpha, n, h) : std::pow(r, alpha - n)) / g * spec.cell_volume();
    }
    return k;
}

/// I_alpha f = (1/gamma(alpha)) int |x - y|^{alpha-n} f(y) dy for compact f.
inline GridFunction riesz_apply(double alpha, const GridFunction& f) {
    const GridSpec& spec = f.spec();
    require(alpha > 0.0 && alpha < spec.dimension(), ErrorCode::InvalidArgument, "alpha must lie in (0, n)");
    require(f.support() == SupportTag::Compact, ErrorCode::InvalidArgument,
            "riesz_apply needs compact data; the kernel is not summable on the torus");
    const auto k = riesz_kernel_wrapped(alpha, spec);
    const auto big = detail::embed(spec, f.values());
    const auto out = fft::circular_convolve(spec.padded().shape(), big, k);
    return GridFunction(spec, detail::crop(spec, out), SupportTag::Compact);
}

// ---------------------------------------------------------------------------
// Kernels and bound fits

inline KernelMatrix frac_kernel(const FracOperator& op, SupportTag support = SupportTag::Compact) {
    const detail::FracEngine engine(op, support);
    KernelMatrix K{0.0, op.spec(), support, "frac-" + to_string(op.semigroup().kind()), {}};
    K.entries = dense_from_columns(op.spec(), support, [&](const GridFunction& f) { return engine(f).value; });
    return K;
}

struct KernelBoundFit {
    double constant = 0.0;
    double r_cut = 0.0;
    double exponent = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;
    double distance = 0.0;
};

/// max over |x - y| >= r_cut of |K(x, y)| |x - y|^{n - alpha}.
inline KernelBoundFit kernel_bound_fit(const KernelMatrix& K, double alpha, std::optional<double> r_cut = std::nullopt) {
    const GridSpec& spec = K.spec;
    const int n = spec.dimension();
    const double h = spec.spacing();
    const double cut = r_cut.value_or(4.0 * h);
    require(cut >= 4.0 * h * (1.0 - 1e-12), ErrorCode::InvalidArgument, "exclusion radius must be >= 4h");
    KernelBoundFit fit{0.0, cut, n - alpha, 0, 0, 0.0};
    bool any = false;
    const auto M = static_cast<std::size_t>(K.entries.rows());
    for (std::size_t j = 0; j < M; ++j) {
        for (std::size_t i = 0; i < M; ++i) {
            const double d = node_distance(spec, K.support, i, j);
            if (d < cut * (1.0 - 1e-12)) continue;
            any = true;
            const double v = std::abs(K.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) *
                             std::pow(d, n - alpha);
            if (v > fit.constant) fit = {v, cut, n - alpha, i, j, d};
        }
    }
    require(any, ErrorCode::InvalidArgument, "exclusion radius removes every pair");
    return fit;
}

/// max |frac_apply(f)| / (riesz_apply(alpha, |f|) + floor) over nodes.
inline double domination_check(const FracOperator& op, const GridFunction& f) {
    require(f.support() == SupportTag::Compact, ErrorCode::InvalidArgument, "domination_check needs compact data");
    const auto lhs = frac_apply(op, f);
    const auto rhs = riesz_apply(op.alpha(), abs(f));
    const double floor = 1e-14 * std::max(rhs.max_abs(), lhs.max_abs());
    if (lhs.max_abs() == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(lhs[i]) / (rhs[i] + floor));
    return worst;
}

/// (I - e^{-tL}) L^{-alpha/2} f.
inline GridFunction difference_apply(const FracOperator& op, double t, const GridFunction& f) {
    require(t > 0.0 && std::isfinite(t), ErrorCode::OutOfRange, "difference_apply needs t > 0");
    const auto u = frac_apply(op, f);
    return combine(1.0, u, -1.0, op.semigroup().apply(t, u));
}

struct DifferenceKernelReport {
    double alpha = 0.0;
    std::vector<double> t_list;
    double C_diff = 0.0;
    double r_cut = 0.0;
    double t_at = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;
    double distance = 0.0;
};

// K~_t = K_alpha - P_t K_alpha h^n as a dense matrix.
inline Eigen::MatrixXd difference_kernel(const KernelMatrix& frac, const KernelMatrix& heat) {
    require(frac.spec == heat.spec, ErrorCode::SpecMismatch, "kernel grids differ");
    return frac.entries - heat.entries * frac.entries * frac.spec.cell_volume();
}

/// C_diff = max |K~_t(x, y)| |x - y|^{n - alpha + 2} / t over t_list and |x - y| >= r_cut.
inline DifferenceKernelReport difference_kernel_bound_fit(const FracOperator& op, std::span<const double> t_list,
                                                          SupportTag support = SupportTag::Periodic,
                                                          std::optional<double> r_cut = std::nullopt) {
    const GridSpec& spec = op.spec();
    const int n = spec.dimension();
    const double h = spec.spacing();
    const double L = spec.side_length();
    const double cut = r_cut.value_or(4.0 * h);
    require(!t_list.empty(), ErrorCode::InvalidArgument, "t_list is empty");
    require(cut >= 4.0 * h * (1.0 - 1e-12), ErrorCode::InvalidArgument, "exclusion radius must be >= 4h");
    for (double t : t_list) {
        require(t >= h * h * (1.0 - 1e-12) && t <= L * L / 16.0 * (1.0 + 1e-12), ErrorCode::OutOfRange,
                "t = " + std::to_string(t) + " outside [h^2, L^2/16]");
    }
    const KernelMatrix K = frac_kernel(op, support);
    DifferenceKernelReport rep;
    rep.alpha = op.alpha();
    rep.t_list.assign(t_list.begin(), t_list.end());
    rep.r_cut = cut;
    const auto M = static_cast<std::size_t>(K.entries.rows());
    for (double t : t_list) {
        const KernelMatrix P = kernel_matrix(op.semigroup(), t, support);
        const Eigen::MatrixXd D = difference_kernel(K, P);
        for (std::size_t j = 0; j < M; ++j) {
            for (std::size_t i = 0; i < M; ++i) {
                const double d = node_distance(spec, support, i, j);
                if (d < cut * (1.0 - 1e-12)) continue;
                const double v = std::abs(D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) *
                                 std::pow(d, n - op.alpha() + 2.0) / t;
                if (v > rep.C_diff) {
                    rep.C_diff = v;
                    rep.t_at = t;
                    rep.row = i;
                    rep.col = j;
                    rep.distance = d;
                }
            }
        }
    }
    return rep;
}

}  // namespace fmlab
