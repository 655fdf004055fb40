#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fmlab/error.hpp"
#include "fmlab/fft.hpp"

namespace fmlab {

// Node coordinate; the second component is unused when n = 1.
using Point = std::array<double, 2>;

enum class SupportTag : std::uint8_t { Periodic = 0, Compact = 1 };

inline std::string to_string(SupportTag tag) {
    return tag == SupportTag::Periodic ? "periodic" : "compact";
}

/**
 * Uniform grid on the box [-L/2, L/2)^n with N points per axis.
 *
 * Node i along an axis sits at (i - N/2) h, so the origin is always a node.
 * Compact-support operations embed the box into a torus padding_factor times
 * larger and crop back afterwards.
 */
class GridSpec {
public:
    GridSpec(int dimension, std::size_t points_per_axis, double side_length, int padding_factor = 2)
        : n_(dimension), N_(points_per_axis), L_(side_length), padding_(padding_factor) {
        require(n_ == 1 || n_ == 2, ErrorCode::InvalidArgument, "dimension must be 1 or 2");
        require(N_ >= 2 && std::has_single_bit(N_), ErrorCode::NonPowerOfTwo,
                "points_per_axis must be a power of two, got " + std::to_string(N_));
        require(std::isfinite(L_) && L_ > 0.0, ErrorCode::InvalidArgument, "side_length must be positive");
        require(padding_ >= 1, ErrorCode::InvalidArgument, "padding_factor must be >= 1");
    }

    int dimension() const { return n_; }
    std::size_t points_per_axis() const { return N_; }
    double side_length() const { return L_; }
    double spacing() const { return L_ / static_cast<double>(N_); }
    int padding_factor() const { return padding_; }

    std::size_t size() const { return n_ == 1 ? N_ : N_ * N_; }
    double cell_volume() const { return std::pow(spacing(), n_); }

    double coordinate(std::size_t axis_index) const {
        return (static_cast<double>(axis_index) - static_cast<double>(N_ / 2)) * spacing();
    }

    std::array<std::size_t, 2> unflatten(std::size_t flat) const {
        return n_ == 1 ? std::array<std::size_t, 2>{flat, 0} : std::array<std::size_t, 2>{flat / N_, flat % N_};
    }
    std::size_t flatten(std::size_t i0, std::size_t i1) const { return n_ == 1 ? i0 : i0 * N_ + i1; }

    Point node(std::size_t flat) const {
        const auto idx = unflatten(flat);
        return n_ == 1 ? Point{coordinate(idx[0]), 0.0} : Point{coordinate(idx[0]), coordinate(idx[1])};
    }

    fft::Shape shape() const {
        const int N = static_cast<int>(N_);
        return n_ == 1 ? fft::Shape{1, {N, 1}} : fft::Shape{2, {N, N}};
    }

    // Torus used for compact-support semantics.
    GridSpec padded() const {
        return GridSpec(n_, N_ * static_cast<std::size_t>(padding_), L_ * padding_, 1);
    }
    GridSpec refined() const { return GridSpec(n_, 2 * N_, L_, padding_); }
    GridSpec rescaled(double factor) const { return GridSpec(n_, N_, L_ * factor, padding_); }

    friend bool operator==(const GridSpec& a, const GridSpec& b) {
        return a.n_ == b.n_ && a.N_ == b.N_ && a.L_ == b.L_ && a.padding_ == b.padding_;
    }

private:
    int n_;
    std::size_t N_;
    double L_;
    int padding_;
};

class GridFunction {
public:
    GridFunction(GridSpec spec, std::vector<double> values, SupportTag support)
        : spec_(spec), values_(std::move(values)), support_(support) {
        require(values_.size() == spec_.size(), ErrorCode::SpecMismatch,
                "value count " + std::to_string(values_.size()) + " does not match grid size " +
                    std::to_string(spec_.size()));
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw Error(ErrorCode::NonFinite, "non-finite value at node " + std::to_string(i));
            }
        }
    }

    static GridFunction zeros(const GridSpec& spec, SupportTag support) {
        return GridFunction(spec, std::vector<double>(spec.size(), 0.0), support);
    }

    const GridSpec& spec() const { return spec_; }
    SupportTag support() const { return support_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    GridFunction with_support(SupportTag tag) const { return GridFunction(spec_, values_, tag); }
    // Same samples on another grid of identical shape (dilation probes).
    GridFunction with_spec(const GridSpec& spec) const { return GridFunction(spec, values_, support_); }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double sum() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s;
    }

private:
    GridSpec spec_;
    std::vector<double> values_;
    SupportTag support_;
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b) {
    require(a.spec() == b.spec(), ErrorCode::SpecMismatch, "grid functions live on different grids");
}

// a*f + b*g
inline GridFunction combine(double a, const GridFunction& f, double b, const GridFunction& g) {
    require_same_grid(f, g);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * f[i] + b * g[i];
    return GridFunction(f.spec(), std::move(out), f.support());
}

inline GridFunction scaled(const GridFunction& f, double a) {
    std::vector<double> out(f.values().begin(), f.values().end());
    for (double& v : out) v *= a;
    return GridFunction(f.spec(), std::move(out), f.support());
}

template <typename Fn>
GridFunction transform(const GridFunction& f, Fn&& fn) {
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(f[i]);
    return GridFunction(f.spec(), std::move(out), f.support());
}

inline GridFunction abs(const GridFunction& f) {
    return transform(f, [](double v) { return std::abs(v); });
}

inline double l2_distance(const GridFunction& a, const GridFunction& b) {
    require_same_grid(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s * a.spec().cell_volume());
}

inline double l2_norm(const GridFunction& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s * a.spec().cell_volume());
}

inline double relative_l2_error(const GridFunction& approx, const GridFunction& reference) {
    const double denom = l2_norm(reference);
    return denom == 0.0 ? l2_norm(approx) : l2_distance(approx, reference) / denom;
}

/// Samples `rule` at every node. Throws NonFinite naming the first bad node.
template <std::invocable<const Point&> Rule>
GridFunction sample(const GridSpec& spec, Rule&& rule, SupportTag support) {
    std::vector<double> values(spec.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Point x = spec.node(i);
        const double v = rule(x);
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFinite, "rule is not finite at node " + std::to_string(i) + " (x = " +
                                                  std::to_string(x[0]) +
                                                  (spec.dimension() == 2 ? ", " + std::to_string(x[1]) : "") + ")");
        }
        values[i] = v;
    }
    return GridFunction(spec, std::move(values), support);
}

// Discrete delta at node j, normalized so that its Riemann integral is one.
inline GridFunction discrete_delta(const GridSpec& spec, std::size_t node, SupportTag support) {
    std::vector<double> v(spec.size(), 0.0);
    v.at(node) = 1.0 / spec.cell_volume();
    return GridFunction(spec, std::move(v), support);
}

inline std::size_t origin_index(const GridSpec& spec) {
    const std::size_t c = spec.points_per_axis() / 2;
    return spec.flatten(c, c);
}

// Largest |f| in the outermost 1/8 of every axis, relative to max |f|.
inline double outer_band_residual(const GridFunction& f) {
    const auto& spec = f.spec();
    const std::size_t N = spec.points_per_axis();
    const std::size_t band = N / 8;
    const double scale = f.max_abs();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto idx = spec.unflatten(i);
        bool in_band = false;
        for (int a = 0; a < spec.dimension(); ++a) {
            in_band = in_band || idx[a] < band || idx[a] >= N - band;
        }
        if (in_band) worst = std::max(worst, std::abs(f[i]));
    }
    return worst / scale;
}

inline void require_vanishing_band(const GridFunction& f) {
    const double r = outer_band_residual(f);
    require(r <= 1e-12, ErrorCode::InvalidArgument,
            "compact function does not vanish on the outer padding band (relative residual " + std::to_string(r) +
                ")");
}

// ---------------------------------------------------------------------------
// Padding: compact functions are embedded centered into the padded torus.

namespace detail {

inline std::size_t pad_offset(const GridSpec& spec) {
    return (spec.padded().points_per_axis() - spec.points_per_axis()) / 2;
}

inline std::vector<double> embed(const GridSpec& spec, std::span<const double> values) {
    const GridSpec big = spec.padded();
    const std::size_t off = pad_offset(spec);
    std::vector<double> out(big.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto idx = spec.unflatten(i);
        const std::size_t j =
            spec.dimension() == 1 ? idx[0] + off : big.flatten(idx[0] + off, idx[1] + off);
        out[j] = values[i];
    }
    return out;
}

inline std::vector<double> crop(const GridSpec& spec, std::span<const double> big_values) {
    const GridSpec big = spec.padded();
    const std::size_t off = pad_offset(spec);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto idx = spec.unflatten(i);
        const std::size_t j =
            spec.dimension() == 1 ? idx[0] + off : big.flatten(idx[0] + off, idx[1] + off);
        out[i] = big_values[j];
    }
    return out;
}

// Origin-centered storage (origin at index N/2) -> wrap-around storage.
inline std::vector<double> centered_to_wrapped(const GridSpec& spec, std::span<const double> centered) {
    const std::size_t N = spec.points_per_axis();
    const std::size_t c = N / 2;
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < centered.size(); ++i) {
        const auto idx = spec.unflatten(i);
        const std::size_t a = (idx[0] + N - c) % N;
        const std::size_t b = spec.dimension() == 1 ? 0 : (idx[1] + N - c) % N;
        out[spec.flatten(a, b)] = centered[i];
    }
    return out;
}

// Work grid for a given support semantics.
inline GridSpec work_spec(const GridSpec& spec, SupportTag support) {
    return support == SupportTag::Compact ? spec.padded() : spec;
}

inline std::vector<double> to_work(const GridFunction& f) {
    if (f.support() == SupportTag::Compact) return embed(f.spec(), f.values());
    return {f.values().begin(), f.values().end()};
}

inline GridFunction from_work(const GridSpec& spec, SupportTag support, std::span<const double> work) {
    if (support == SupportTag::Compact) return GridFunction(spec, crop(spec, work), support);
    return GridFunction(spec, std::vector<double>(work.begin(), work.end()), support);
}

inline std::array<double, 2> sides(const GridSpec& spec) { return {spec.side_length(), spec.side_length()}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution

/**
 * Riemann-sum convolution (f * k)(x_i) = sum_j f(x_j) k(x_i - x_j) h^n.
 *
 * The kernel is stored origin-centered on the same grid. Periodic inputs are
 * convolved circularly; compact inputs are zero-padded by padding_factor
 * (kernel included) and cropped afterwards.
 */
inline GridFunction convolve(const GridFunction& f, const GridFunction& kernel) {
    require_same_grid(f, kernel);
    const GridSpec& spec = f.spec();
    const double hn = spec.cell_volume();
    if (f.support() == SupportTag::Periodic) {
        auto kw = detail::centered_to_wrapped(spec, kernel.values());
        auto out = fft::circular_convolve(spec.shape(), f.values(), kw);
        for (double& v : out) v *= hn;
        return GridFunction(spec, std::move(out), f.support());
    }
    const GridSpec big = spec.padded();
    auto fw = detail::embed(spec, f.values());
    auto kw = detail::centered_to_wrapped(big, detail::embed(spec, kernel.values()));
    auto out = fft::circular_convolve(big.shape(), fw, kw);
    for (double& v : out) v *= hn;
    return GridFunction(spec, detail::crop(spec, out), f.support());
}

/// O(N^{2n}) reference for convolve.
inline GridFunction convolve_direct(const GridFunction& f, const GridFunction& kernel) {
    require_same_grid(f, kernel);
    const GridSpec& spec = f.spec();
    const long N = static_cast<long>(spec.points_per_axis());
    const long c = N / 2;
    const bool periodic = f.support() == SupportTag::Periodic;
    const double hn = spec.cell_volume();
    std::vector<double> out(spec.size(), 0.0);
    auto kernel_at = [&](long d0, long d1) -> double {
        // offset (d0, d1) in index units; periodic offsets wrap into [-N/2, N/2)
        if (periodic) {
            d0 = ((d0 + c) % N + N) % N - c;
            d1 = ((d1 + c) % N + N) % N - c;
        } else if (d0 < -c || d0 >= c || d1 < -c || d1 >= c) {
            return 0.0;
        }
        return spec.dimension() == 1 ? kernel[static_cast<std::size_t>(d0 + c)]
                                     : kernel[spec.flatten(static_cast<std::size_t>(d0 + c),
                                                           static_cast<std::size_t>(d1 + c))];
    };
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto xi = spec.unflatten(i);
        double s = 0.0;
        for (std::size_t j = 0; j < spec.size(); ++j) {
            const auto yj = spec.unflatten(j);
            const long d0 = static_cast<long>(xi[0]) - static_cast<long>(yj[0]);
            const long d1 = static_cast<long>(xi[1]) - static_cast<long>(yj[1]);
            s += f[j] * kernel_at(d0, d1);
        }
        out[i] = s * hn;
    }
    return GridFunction(spec, std::move(out), f.support());
}

// ---------------------------------------------------------------------------
// Balls

/// Euclidean ball of grid offsets |delta| h <= r (ties included).
class BallMask {
public:
    BallMask(const GridSpec& spec, double radius) : radius_(radius), dimension_(spec.dimension()) {
        require(radius >= 0.0 && std::isfinite(radius), ErrorCode::OutOfRange, "ball radius must be >= 0");
        const double h = spec.spacing();
        const double rr = radius / h;
        const long m = static_cast<long>(std::floor(rr + 1e-9));
        const double limit = rr * rr + 1e-9;
        if (dimension_ == 1) {
            for (long a = -m; a <= m; ++a) offsets_.push_back({a, 0});
        } else {
            for (long a = -m; a <= m; ++a) {
                for (long b = -m; b <= m; ++b) {
                    if (static_cast<double>(a * a + b * b) <= limit) offsets_.push_back({a, b});
                }
            }
        }
        cell_volume_ = spec.cell_volume();
    }

    double radius() const { return radius_; }
    std::size_t cardinality() const { return offsets_.size(); }
    const std::vector<std::array<long, 2>>& offsets() const { return offsets_; }
    // m(B) = card h^n
    double measure() const { return static_cast<double>(offsets_.size()) * cell_volume_; }

private:
    double radius_;
    int dimension_;
    double cell_volume_ = 0.0;
    std::vector<std::array<long, 2>> offsets_;
};

// Continuum volume of the unit ball in dimension n (n = 1, 2).
inline double unit_ball_volume(int n) { return n == 1 ? 2.0 : std::numbers::pi; }

/// Dyadic radii {min_mult h, 2 min_mult h, ...} up to max_frac * L.
inline std::vector<double> dyadic_radii(const GridSpec& spec, double min_mult = 2.0, double max_frac = 0.25) {
    std::vector<double> radii;
    const double h = spec.spacing();
    const double r_max = max_frac * spec.side_length();
    for (double r = min_mult * h; r <= r_max * (1.0 + 1e-12); r *= 2.0) radii.push_back(r);
    return radii;
}

enum class EvalMode { Fast, Direct };

inline void require_radius_in_range(const GridSpec& spec, double r) {
    const double h = spec.spacing();
    require(r >= h * (1.0 - 1e-12) && r <= 0.25 * spec.side_length() * (1.0 + 1e-12), ErrorCode::OutOfRange,
            "radius " + std::to_string(r) + " outside [h, L/4]");
}

namespace detail {

// Visits the value of f at center + offset; compact functions read zero
// outside the box, periodic ones wrap.
template <typename Visit>
void for_each_in_ball(const GridFunction& f, std::size_t center, const BallMask& mask, Visit&& visit) {
    const GridSpec& spec = f.spec();
    const long N = static_cast<long>(spec.points_per_axis());
    const auto c = spec.unflatten(center);
    const bool periodic = f.support() == SupportTag::Periodic;
    for (const auto& d : mask.offsets()) {
        long a = static_cast<long>(c[0]) + d[0];
        long b = static_cast<long>(c[1]) + d[1];
        if (periodic) {
            a = ((a % N) + N) % N;
            b = spec.dimension() == 1 ? 0 : ((b % N) + N) % N;
        } else if (a < 0 || a >= N || (spec.dimension() == 2 && (b < 0 || b >= N))) {
            visit(std::size_t{0}, false);
            continue;
        }
        visit(spec.flatten(static_cast<std::size_t>(a), static_cast<std::size_t>(b)), true);
    }
}

}  // namespace detail

/// Mean of f over the discrete ball of radius r at every center.
inline GridFunction ball_mean(const GridFunction& f, double r, EvalMode mode = EvalMode::Fast) {
    const GridSpec& spec = f.spec();
    require_radius_in_range(spec, r);
    const BallMask mask(spec, r);
    const double card = static_cast<double>(mask.cardinality());
    if (mode == EvalMode::Direct) {
        std::vector<double> out(spec.size());
        for (std::size_t i = 0; i < spec.size(); ++i) {
            double s = 0.0;
            detail::for_each_in_ball(f, i, mask, [&](std::size_t j, bool inside) {
                if (inside) s += f[j];
            });
            out[i] = s / card;
        }
        return GridFunction(spec, std::move(out), f.support());
    }
    std::vector<double> k(spec.size(), 0.0);
    const long c = static_cast<long>(spec.points_per_axis() / 2);
    const double w = 1.0 / (card * spec.cell_volume());
    for (const auto& d : mask.offsets()) {
        k[spec.flatten(static_cast<std::size_t>(c + d[0]), spec.dimension() == 1 ? 0 : static_cast<std::size_t>(c + d[1]))] = w;
    }
    return convolve(f, GridFunction(spec, std::move(k), f.support()));
}

/// g(x) = max over centers x0 with |x - x0| <= r of f(x0).
inline GridFunction ball_max_dilation(const GridFunction& f, double r) {
    const GridSpec& spec = f.spec();
    const BallMask mask(spec, r);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        double m = -std::numeric_limits<double>::infinity();
        detail::for_each_in_ball(f, i, mask, [&](std::size_t j, bool inside) {
            if (inside) m = std::max(m, f[j]);
        });
        out[i] = m;
    }
    return GridFunction(spec, std::move(out), f.support());
}

}  // namespace fmlab
