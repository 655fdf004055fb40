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

namespace fmlab {

enum class SemigroupKind { Heat, Schrodinger, Divform };

inline std::string to_string(SemigroupKind kind) {
    switch (kind) {
        case SemigroupKind::Heat: return "heat";
        case SemigroupKind::Schrodinger: return "schrodinger";
        case SemigroupKind::Divform: return "divform";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Heat steps

namespace detail {

// Below this time the periodic images of the padded torus are invisible
// (factor exp(-36)) and the spectral kernel is exact free-space heat.
inline double compact_spectral_limit(const GridSpec& spec) {
    const double gap = spec.side_length() * (spec.padding_factor() - 1);
    return gap * gap / (4.0 * 36.0);
}

/**
 * e^{t Delta} for one fixed t, precomputed for repeated use on values that
 * live on `spec` with the given support semantics.
 *
 * Periodic: Fourier multiplier exp(-t |k|^2) on the grid torus.
 * Compact: free-space heat restricted to the box. Small t uses the spectral
 * multiplier on the padded torus; large t convolves with the sampled Gaussian
 * over all offsets of the padded grid, which covers every in-box difference.
 */
class HeatStep {
public:
    HeatStep(const GridSpec& spec, SupportTag support, double t) : spec_(spec), support_(support), t_(t) {
        const GridSpec work = work_spec(spec, support);
        const auto shape = work.shape();
        if (support == SupportTag::Periodic || t <= compact_spectral_limit(spec)) {
            const auto k2 = fft::wavenumber_squared(shape, sides(work));
            table_.resize(k2.size());
            for (std::size_t i = 0; i < k2.size(); ++i) table_[i] = std::exp(-t * k2[i]);
        } else {
            // Gaussian sampled at wrapped offsets of the padded torus, times h^n.
            const int P = static_cast<int>(work.points_per_axis());
            const double h = work.spacing();
            const double norm = std::pow(4.0 * std::numbers::pi * t, -0.5 * spec.dimension()) * work.cell_volume();
            gaussian_.resize(work.size());
            for (std::size_t i = 0; i < work.size(); ++i) {
                const auto idx = work.unflatten(i);
                const double d0 = fft::signed_index(static_cast<int>(idx[0]), P) * h;
                const double d1 = spec.dimension() == 1 ? 0.0 : fft::signed_index(static_cast<int>(idx[1]), P) * h;
                gaussian_[i] = norm * std::exp(-(d0 * d0 + d1 * d1) / (4.0 * t));
            }
        }
    }

    double time() const { return t_; }

    // Values on the box (length spec.size()).
    std::vector<double> operator()(std::span<const double> box_values) const {
        if (t_ == 0.0) return {box_values.begin(), box_values.end()};
        if (support_ == SupportTag::Periodic) {
            std::vector<double> out(box_values.size());
            fft::spectral_multiply_table(spec_.shape(), table_, box_values, out);
            return out;
        }
        const GridSpec work = spec_.padded();
        auto big = embed(spec_, box_values);
        std::vector<double> out(big.size());
        if (!table_.empty()) {
            fft::spectral_multiply_table(work.shape(), table_, big, out);
        } else {
            out = fft::circular_convolve(work.shape(), big, gaussian_);
        }
        return crop(spec_, out);
    }

private:
    GridSpec spec_;
    SupportTag support_;
    double t_;
    std::vector<double> table_;
    std::vector<double> gaussian_;
};

struct DivformSpectrum {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
};

}  // namespace detail

/// e^{t Delta} f. Spectral on the torus; free-space on the box for compact f.
inline GridFunction heat_apply(double t, const GridFunction& f) {
    require(t >= 0.0 && std::isfinite(t), ErrorCode::OutOfRange, "heat_apply needs t >= 0");
    if (t == 0.0) return f;
    const detail::HeatStep step(f.spec(), f.support(), t);
    return GridFunction(f.spec(), step(f.values()), f.support());
}

// ---------------------------------------------------------------------------
// Semigroup operators

/**
 * One of the concrete generators:
 *   heat         L = -Delta
 *   schrodinger  L = -Delta + V,  V >= 0 (Strang splitting)
 *   divform      L = -d/dx (a d/dx), n = 1, periodic (dense eigensolve)
 *
 * Immutable after construction; apply() is pure.
 */
class SemigroupOperator {
public:
    static SemigroupOperator heat(const GridSpec& spec) { return SemigroupOperator(SemigroupKind::Heat, spec); }

    static SemigroupOperator schrodinger(const GridFunction& potential, int substeps) {
        require(substeps >= 1, ErrorCode::InvalidArgument, "splitting_substeps must be >= 1");
        for (std::size_t i = 0; i < potential.size(); ++i) {
            if (potential[i] < 0.0) {
                throw Error(ErrorCode::InvalidArgument,
                            "potential is negative at node " + std::to_string(i) + " (" + std::to_string(potential[i]) + ")");
            }
        }
        SemigroupOperator op(SemigroupKind::Schrodinger, potential.spec());
        op.potential_ = potential;
        op.substeps_ = substeps;
        return op;
    }

    /// Ellipticity bounds are checked node by node; n must be 1.
    static SemigroupOperator divform(const GridFunction& coefficient, double lower = 0.5, double upper = 2.0) {
        const GridSpec& spec = coefficient.spec();
        require(spec.dimension() == 1, ErrorCode::InvalidArgument, "divform backend requires n = 1");
        require(spec.size() <= 4096, ErrorCode::BudgetExceeded, "divform backend needs N <= 4096; use a smaller grid");
        require(lower > 0.0 && lower <= upper, ErrorCode::InvalidArgument, "need 0 < lower <= upper");
        for (std::size_t i = 0; i < coefficient.size(); ++i) {
            const double a = coefficient[i];
            if (!(a >= lower && a <= upper)) {
                throw Error(ErrorCode::OutOfRange, "coefficient " + std::to_string(a) + " at node " + std::to_string(i) +
                                                       " violates ellipticity bounds [" + std::to_string(lower) + ", " +
                                                       std::to_string(upper) + "]");
            }
        }
        SemigroupOperator op(SemigroupKind::Divform, spec);
        op.coefficient_ = coefficient;
        op.lower_ = lower;
        op.upper_ = upper;

        // Symmetric periodic stencil with arithmetic-mean face coefficients;
        // rows sum to zero so constants are conserved exactly.
        const auto N = static_cast<Eigen::Index>(spec.points_per_axis());
        const double inv_h2 = 1.0 / (spec.spacing() * spec.spacing());
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const Eigen::Index ip = (i + 1) % N;
            const double face = 0.5 * (coefficient[static_cast<std::size_t>(i)] + coefficient[static_cast<std::size_t>(ip)]) * inv_h2;
            M(i, i) += face;
            M(ip, ip) += face;
            M(i, ip) -= face;
            M(ip, i) -= face;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
        require(solver.info() == Eigen::Success, ErrorCode::InvalidArgument, "divform eigensolve failed");
        auto spectrum = std::make_shared<detail::DivformSpectrum>();
        spectrum->vectors = solver.eigenvectors();
        spectrum->values = solver.eigenvalues();
        op.spectrum_ = std::move(spectrum);
        return op;
    }

    SemigroupKind kind() const { return kind_; }
    const GridSpec& spec() const { return spec_; }
    const std::optional<GridFunction>& potential() const { return potential_; }
    const std::optional<GridFunction>& coefficient() const { return coefficient_; }
    int substeps() const { return substeps_; }
    double ellipticity_lower() const { return lower_; }
    double ellipticity_upper() const { return upper_; }

    // e^{-tL} 1 = 1 on the torus.
    bool conserves_constants() const { return kind_ != SemigroupKind::Schrodinger; }

    // Spectrum of the divform matrix (ascending); empty for other kinds.
    const detail::DivformSpectrum* divform_spectrum() const { return spectrum_.get(); }

    GridFunction apply(double t, const GridFunction& f) const {
        require(f.spec() == spec_, ErrorCode::SpecMismatch, "function grid differs from operator grid");
        require(t >= 0.0 && std::isfinite(t), ErrorCode::OutOfRange, "semigroup time must be >= 0");
        switch (kind_) {
            case SemigroupKind::Heat: return heat_apply(t, f);
            case SemigroupKind::Schrodinger: return apply_schrodinger(t, f, substeps_);
            case SemigroupKind::Divform: return apply_divform(t, f);
        }
        return f;
    }

    // Strang splitting with an explicit substep count (used by the
    // subordination stepper, which advances over many increments).
    GridFunction apply_schrodinger(double t, const GridFunction& f, int substeps) const {
        require(kind_ == SemigroupKind::Schrodinger, ErrorCode::InvalidArgument, "operator is not a Schrodinger backend");
        if (t == 0.0) return f;
        const double dt = t / substeps;
        const detail::HeatStep step(spec_, f.support(), dt);
        const auto& V = potential_->values();
        std::vector<double> half(V.size());
        std::vector<double> full(V.size());
        for (std::size_t i = 0; i < V.size(); ++i) {
            half[i] = std::exp(-0.5 * dt * V[i]);
            full[i] = half[i] * half[i];
        }
        std::vector<double> u(f.values().begin(), f.values().end());
        for (std::size_t i = 0; i < u.size(); ++i) u[i] *= half[i];
        for (int s = 0; s < substeps; ++s) {
            u = step(u);
            const auto& factor = (s + 1 == substeps) ? half : full;
            for (std::size_t i = 0; i < u.size(); ++i) u[i] *= factor[i];
        }
        return GridFunction(spec_, std::move(u), f.support());
    }

private:
    SemigroupOperator(SemigroupKind kind, const GridSpec& spec) : kind_(kind), spec_(spec) {}

    GridFunction apply_divform(double t, const GridFunction& f) const {
        require(f.support() == SupportTag::Periodic, ErrorCode::InvalidArgument, "divform backend is periodic only");
        if (t == 0.0) return f;
        const auto& Q = spectrum_->vectors;
        const Eigen::Map<const Eigen::VectorXd> x(f.values().data(), static_cast<Eigen::Index>(f.size()));
        Eigen::VectorXd c = Q.transpose() * x;
        for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(-t * std::max(spectrum_->values(k), 0.0));
        Eigen::VectorXd y = Q * c;
        return GridFunction(spec_, std::vector<double>(y.data(), y.data() + y.size()), f.support());
    }

    SemigroupKind kind_;
    GridSpec spec_;
    std::optional<GridFunction> potential_;
    std::optional<GridFunction> coefficient_;
    int substeps_ = 1;
    double lower_ = 0.0;
    double upper_ = 0.0;
    std::shared_ptr<const detail::DivformSpectrum> spectrum_;
};

inline GridFunction schrodinger_apply(double t, const GridFunction& f, const SemigroupOperator& op) {
    require(op.kind() == SemigroupKind::Schrodinger, ErrorCode::InvalidArgument, "operator is not a Schrodinger backend");
    return op.apply(t, f);
}

inline GridFunction divform_apply(double t, const GridFunction& f, const SemigroupOperator& op) {
    require(op.kind() == SemigroupKind::Divform, ErrorCode::InvalidArgument, "operator is not a divform backend");
    return op.apply(t, f);
}

// ---------------------------------------------------------------------------
// Kernel matrices

/// Dense P_t(x_i, y_j); sum_j P(i, j) f_j h^n reproduces apply(t, f).
struct KernelMatrix {
    double t = 0.0;
    GridSpec spec;
    SupportTag support = SupportTag::Periodic;
    std::string provenance;
    Eigen::MatrixXd entries;
};

inline constexpr std::size_t kDenseBudget = 4096;

inline void require_dense_budget(const GridSpec& spec) {
    require(spec.size() <= kDenseBudget, ErrorCode::BudgetExceeded,
            "dense kernel needs N^n <= 4096 (got " + std::to_string(spec.size()) + "); use a smaller N");
}

/// Builds a dense matrix column by column from a linear map on grid values.
template <typename LinearMap>
Eigen::MatrixXd dense_from_columns(const GridSpec& spec, SupportTag support, LinearMap&& map) {
    require_dense_budget(spec);
    const auto M = static_cast<Eigen::Index>(spec.size());
    Eigen::MatrixXd out(M, M);
    const double inv_hn = 1.0 / spec.cell_volume();
    std::vector<double> unit(spec.size(), 0.0);
    for (Eigen::Index j = 0; j < M; ++j) {
        unit[static_cast<std::size_t>(j)] = 1.0;
        const GridFunction col = map(GridFunction(spec, unit, support));
        unit[static_cast<std::size_t>(j)] = 0.0;
        for (Eigen::Index i = 0; i < M; ++i) out(i, j) = col[static_cast<std::size_t>(i)] * inv_hn;
    }
    return out;
}

inline KernelMatrix kernel_matrix(const SemigroupOperator& op, double t, SupportTag support = SupportTag::Periodic) {
    require(t > 0.0 && std::isfinite(t), ErrorCode::OutOfRange, "kernel_matrix needs t > 0");
    require_dense_budget(op.spec());
    KernelMatrix K{t, op.spec(), support, to_string(op.kind()), {}};
    if (op.kind() == SemigroupKind::Divform) {
        require(support == SupportTag::Periodic, ErrorCode::InvalidArgument, "divform backend is periodic only");
        const auto* s = op.divform_spectrum();
        Eigen::VectorXd e = (-t * s->values.cwiseMax(0.0)).array().exp();
        K.entries = s->vectors * e.asDiagonal() * s->vectors.transpose() / op.spec().cell_volume();
        return K;
    }
    K.entries = dense_from_columns(op.spec(), support, [&](const GridFunction& f) { return op.apply(t, f); });
    return K;
}

// ---------------------------------------------------------------------------
// Gaussian upper bound fits

// Distance between nodes i and j: torus distance for periodic kernels,
// Euclidean otherwise.
inline double node_distance(const GridSpec& spec, SupportTag support, std::size_t i, std::size_t j) {
    const Point x = spec.node(i);
    const Point y = spec.node(j);
    const double L = spec.side_length();
    double s = 0.0;
    for (int a = 0; a < spec.dimension(); ++a) {
        double d = std::abs(x[a] - y[a]);
        if (support == SupportTag::Periodic) d = std::min(d, L - d);
        s += d * d;
    }
    return std::sqrt(s);
}

// Compact fits only look at pairs inside the inner half-box |x_a| < L/4.
inline bool in_inner_half_box(const GridSpec& spec, std::size_t i) {
    const Point x = spec.node(i);
    const double q = 0.25 * spec.side_length();
    for (int a = 0; a < spec.dimension(); ++a) {
        if (!(std::abs(x[a]) < q)) return false;
    }
    return true;
}

struct FitWitness {
    double t = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;
    double distance = 0.0;
    double entry = 0.0;
};

struct GaussianBoundFit {
    double A = 0.0;
    double C_fit = 0.0;
    std::vector<double> t_list;
    FitWitness witness;
    double noise_floor = 0.0;
};

// |P| t^{n/2} exp(A d^2 / t) for one entry.
inline double gaussian_bound_ratio(const KernelMatrix& K, std::size_t i, std::size_t j, double A) {
    const double d = node_distance(K.spec, K.support, i, j);
    const int n = K.spec.dimension();
    return std::abs(K.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) * std::pow(K.t, 0.5 * n) *
           std::exp(A * d * d / K.t);
}

/**
 * Minimal C with |P_t(x,y)| <= C t^{-n/2} exp(-A |x-y|^2 / t) over every
 * scanned entry. Entries below noise_floor * max|P_t| sit at the round-off
 * level of the backend and are skipped; the exponential weight would
 * otherwise amplify that noise without bound.
 */
inline GaussianBoundFit gaussian_bound_fit(std::span<const KernelMatrix> kernels, double A, double noise_floor = 1e-10) {
    require(!kernels.empty(), ErrorCode::InvalidArgument, "gaussian_bound_fit needs at least one kernel");
    require(A > 0.0 && std::isfinite(A), ErrorCode::InvalidArgument, "decay rate A must be positive");
    GaussianBoundFit fit;
    fit.A = A;
    fit.noise_floor = noise_floor;
    for (const auto& K : kernels) {
        if (K.provenance == "heat") {
            require(A <= 0.25, ErrorCode::InvalidArgument, "heat kernels admit no finite C for A > 1/4");
        }
        fit.t_list.push_back(K.t);
        const double peak = K.entries.cwiseAbs().maxCoeff();
        const double floor = noise_floor * peak;
        const auto M = static_cast<std::size_t>(K.entries.rows());
        for (std::size_t j = 0; j < M; ++j) {
            if (K.support == SupportTag::Compact && !in_inner_half_box(K.spec, j)) continue;
            for (std::size_t i = 0; i < M; ++i) {
                if (K.support == SupportTag::Compact && !in_inner_half_box(K.spec, i)) continue;
                const double e = K.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (std::abs(e) <= floor) continue;
                const double ratio = gaussian_bound_ratio(K, i, j, A);
                if (ratio > fit.C_fit) {
                    fit.C_fit = ratio;
                    fit.witness = {K.t, i, j, node_distance(K.spec, K.support, i, j), e};
                }
            }
        }
    }
    return fit;
}

}  // namespace fmlab
