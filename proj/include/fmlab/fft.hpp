#pragma once

// Thin RAII layer over FFTW's real-to-complex transforms for the 1-D and 2-D
// row-major arrays used by GridFunction.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "fmlab/error.hpp"

namespace fmlab::fft {

using Complex = std::complex<double>;

// Dimensions of a row-major real array, at most two axes.
struct Shape {
    int rank = 1;
    std::array<int, 2> dims{1, 1};

    std::size_t real_size() const {
        return rank == 1 ? static_cast<std::size_t>(dims[0])
                         : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
    }
    // Half-spectrum size along the last axis.
    std::size_t complex_size() const {
        return rank == 1 ? static_cast<std::size_t>(dims[0] / 2 + 1)
                         : static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1] / 2 + 1);
    }
    auto operator<=>(const Shape&) const = default;
};

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealPlan {
public:
    explicit RealPlan(Shape shape) : shape_(shape) {
        real_ = fftw_alloc_real(shape.real_size());
        spec_ = fftw_alloc_complex(shape.complex_size());
        require(real_ != nullptr && spec_ != nullptr, ErrorCode::BudgetExceeded, "fftw allocation failed");
        std::lock_guard lock(planner_mutex());
        forward_ = fftw_plan_dft_r2c(shape.rank, shape.dims.data(), real_, spec_, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r(shape.rank, shape.dims.data(), spec_, real_, FFTW_ESTIMATE);
    }
    ~RealPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(real_);
        fftw_free(spec_);
    }
    RealPlan(const RealPlan&) = delete;
    RealPlan& operator=(const RealPlan&) = delete;

    const Shape& shape() const { return shape_; }

    void forward(std::span<const double> in, std::span<Complex> out) {
        std::copy(in.begin(), in.end(), real_);
        fftw_execute(forward_);
        auto* c = reinterpret_cast<Complex*>(spec_);
        std::copy(c, c + shape_.complex_size(), out.begin());
    }

    // Unnormalized inverse: forward followed by backward scales by real_size().
    void backward(std::span<const Complex> in, std::span<double> out) {
        auto* c = reinterpret_cast<Complex*>(spec_);
        std::copy(in.begin(), in.end(), c);
        fftw_execute(backward_);
        std::copy(real_, real_ + shape_.real_size(), out.begin());
    }

private:
    Shape shape_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

// Plans own scratch buffers, so the cache is per thread.
inline RealPlan& plan_for(const Shape& shape) {
    thread_local std::map<Shape, std::unique_ptr<RealPlan>> cache;
    auto it = cache.find(shape);
    if (it == cache.end()) {
        it = cache.emplace(shape, std::make_unique<RealPlan>(shape)).first;
    }
    return *it->second;
}

// Signed DFT index for position m on an axis of size M.
inline int signed_index(int m, int M) { return m <= M / 2 ? m : m - M; }

// Squared angular wavenumber |k|^2 for every half-spectrum entry. `side` is
// the physical period along each axis; the Nyquist entry uses |k| = pi/h.
inline std::vector<double> wavenumber_squared(const Shape& shape, std::array<double, 2> side) {
    std::vector<double> k2(shape.complex_size());
    const double two_pi = 2.0 * std::numbers::pi;
    if (shape.rank == 1) {
        const int M = shape.dims[0];
        for (int m = 0; m <= M / 2; ++m) {
            const double k = two_pi * m / side[0];
            k2[static_cast<std::size_t>(m)] = k * k;
        }
        return k2;
    }
    const int M0 = shape.dims[0];
    const int M1 = shape.dims[1];
    const int H1 = M1 / 2 + 1;
    for (int a = 0; a < M0; ++a) {
        const double ka = two_pi * signed_index(a, M0) / side[0];
        for (int b = 0; b < H1; ++b) {
            const double kb = two_pi * b / side[1];
            k2[static_cast<std::size_t>(a) * H1 + b] = ka * ka + kb * kb;
        }
    }
    return k2;
}

// out = IDFT(multiplier(|k|^2) * DFT(in)), normalized.
template <typename Multiplier>
void spectral_multiply(const Shape& shape, std::array<double, 2> side, std::span<const double> in,
                       std::span<double> out, Multiplier&& multiplier) {
    auto& plan = plan_for(shape);
    std::vector<Complex> spec(shape.complex_size());
    plan.forward(in, spec);
    const auto k2 = wavenumber_squared(shape, side);
    const double norm = 1.0 / static_cast<double>(shape.real_size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        spec[i] *= multiplier(k2[i]) * norm;
    }
    plan.backward(spec, out);
}

// Same as above with a precomputed half-spectrum multiplier table.
inline void spectral_multiply_table(const Shape& shape, std::span<const double> table,
                                    std::span<const double> in, std::span<double> out) {
    auto& plan = plan_for(shape);
    std::vector<Complex> spec(shape.complex_size());
    plan.forward(in, spec);
    const double norm = 1.0 / static_cast<double>(shape.real_size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        spec[i] *= table[i] * norm;
    }
    plan.backward(spec, out);
}

// Circular convolution c[i] = sum_j a[j] b[i - j]; `b` is stored with its
// zero offset at index 0 (wrap-around order).
inline std::vector<double> circular_convolve(const Shape& shape, std::span<const double> a,
                                             std::span<const double> b) {
    auto& plan = plan_for(shape);
    std::vector<Complex> fa(shape.complex_size());
    std::vector<Complex> fb(shape.complex_size());
    plan.forward(a, fa);
    plan.forward(b, fb);
    const double norm = 1.0 / static_cast<double>(shape.real_size());
    for (std::size_t i = 0; i < fa.size(); ++i) {
        fa[i] *= fb[i] * norm;
    }
    std::vector<double> out(shape.real_size());
    plan.backward(fa, out);
    return out;
}

}  // namespace fmlab::fft
