#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fmlab/error.hpp"
#include "fmlab/grid.hpp"

namespace fmlab {

enum class Family { GaussianBump, SmoothBall, Power, Log, LogPower, Trig, Potential, Coefficient };

inline constexpr std::array<Family, 8> kAllFamilies{Family::GaussianBump, Family::SmoothBall, Family::Power,
                                                    Family::Log,          Family::LogPower,   Family::Trig,
                                                    Family::Potential,    Family::Coefficient};

inline std::string to_string(Family f) {
    switch (f) {
        case Family::GaussianBump: return "gaussian-bump";
        case Family::SmoothBall: return "smooth-ball";
        case Family::Power: return "power";
        case Family::Log: return "log";
        case Family::LogPower: return "log-power";
        case Family::Trig: return "trig";
        case Family::Potential: return "potential";
        case Family::Coefficient: return "coefficient";
    }
    return "unknown";
}

/// Accepts the long names above or the letters a-h.
inline Family parse_family(const std::string& name) {
    for (std::size_t i = 0; i < kAllFamilies.size(); ++i) {
        const std::string letter(1, static_cast<char>('a' + i));
        if (name == to_string(kAllFamilies[i]) || name == letter) return kAllFamilies[i];
    }
    throw Error(ErrorCode::UnknownName, "unknown corpus family '" + name + "'");
}

struct CorpusSpec {
    std::uint64_t seed = 1;
    std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
    int count = 2;
    GridSpec grid{1, 1024, 16.0};
    // Clipping radius for singular families, in units of h.
    double rho_reg_cells = 2.0;
    // Integrability exponent of the power family |x|^{-n/p}.
    double power_p = 2.0;
    // Exponent of the log-power family |log|x||^delta.
    double log_delta = 0.5;
    // Overrides the power family exponent n/p when set.
    std::optional<double> power_exponent;
};

struct TestFunction {
    std::string id;
    Family family;
    GridFunction f;
    std::vector<std::string> memberships;
    std::vector<Point> singular_points;
    std::vector<std::pair<std::string, double>> parameters;
};

// ---------------------------------------------------------------------------
// Randomness

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seeded stream; uniforms are built from raw 64-bit output so values are
/// identical across standard library implementations.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    Stream split(std::uint64_t key) const { return Stream(splitmix64(seed_ ^ splitmix64(key))); }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)) % (hi - lo + 1); }
    double sign() { return uniform() < 0.5 ? -1.0 : 1.0; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Shape helpers

// C-infinity step: 1 for |x| <= a, 0 for |x| >= b.
inline double smooth_cutoff(double x, double a, double b) {
    const double ax = std::abs(x);
    if (ax <= a) return 1.0;
    if (ax >= b) return 0.0;
    auto psi = [](double s) { return s <= 0.0 ? 0.0 : std::exp(-1.0 / s); };
    const double s = (b - ax) / (b - a);
    return psi(s) / (psi(s) + psi(1.0 - s));
}

// Window equal to one on the inner half-box and zero on the padding band.
inline double box_window(const Point& x, int n, double L) {
    double w = smooth_cutoff(x[0], 0.25 * L, 0.375 * L);
    if (n == 2) w *= smooth_cutoff(x[1], 0.25 * L, 0.375 * L);
    return w;
}

inline double distance(const Point& x, const Point& y, int n) {
    const double d0 = x[0] - y[0];
    const double d1 = n == 2 ? x[1] - y[1] : 0.0;
    return std::sqrt(d0 * d0 + d1 * d1);
}

namespace detail {

inline Point random_point(Stream& s, int n, double half_width) {
    return {s.uniform(-half_width, half_width), n == 2 ? s.uniform(-half_width, half_width) : 0.0};
}

// Singular points on multiples of L/64 within |x| <= L/16.
inline Point lattice_point(Stream& s, int n, double L) {
    const double step = L / 64.0;
    return {step * s.integer(-4, 4), n == 2 ? step * s.integer(-4, 4) : 0.0};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Families

inline TestFunction make_member(const CorpusSpec& spec, Family family, int index) {
    const GridSpec& g = spec.grid;
    const int n = g.dimension();
    const double L = g.side_length();
    const double rho = spec.rho_reg_cells * g.spacing();
    Stream s = Stream(spec.seed).split((static_cast<std::uint64_t>(family) << 32) | static_cast<std::uint32_t>(index));
    TestFunction t{to_string(family) + "-" + std::to_string(index), family, GridFunction::zeros(g, SupportTag::Compact), {}, {}, {}};
    auto window = [&](const Point& x) { return box_window(x, n, L); };

    switch (family) {
        case Family::GaussianBump: {
            const Point c = detail::random_point(s, n, L / 16.0);
            const double width = s.uniform(L / 16.0, L / 8.0);
            const double amp = s.sign() * s.uniform(0.5, 1.5);
            t.f = sample(g, [&](const Point& x) {
                const double d = distance(x, c, n);
                return amp * std::exp(-d * d / (2.0 * width * width)) * window(x);
            }, SupportTag::Compact);
            t.parameters = {{"center0", c[0]}, {"center1", c[1]}, {"width", width}, {"amplitude", amp}};
            t.memberships = {"L^p", "M^{p,lambda}", "VM^{p,lambda}", "BMO", "VMO"};
            break;
        }
        case Family::SmoothBall: {
            const Point c = detail::random_point(s, n, L / 16.0);
            const double R = s.uniform(L / 16.0, L / 8.0);
            const double edge = s.uniform(L / 64.0, L / 32.0);
            t.f = sample(g, [&](const Point& x) {
                return 0.5 * (1.0 - std::tanh((distance(x, c, n) - R) / edge)) * window(x);
            }, SupportTag::Compact);
            t.parameters = {{"center0", c[0]}, {"center1", c[1]}, {"radius", R}, {"edge", edge}};
            t.memberships = {"L^p", "M^{p,lambda}", "VM^{p,lambda}", "BMO", "VMO"};
            break;
        }
        case Family::Power: {
            const Point c = detail::lattice_point(s, n, L);
            const double beta = spec.power_exponent.value_or(n / spec.power_p);
            t.f = sample(g, [&](const Point& x) {
                return std::pow(std::max(distance(x, c, n), rho), -beta) * window(x);
            }, SupportTag::Compact);
            t.parameters = {{"center0", c[0]}, {"center1", c[1]}, {"exponent", beta}, {"rho_reg", rho}};
            t.singular_points = {c};
            t.memberships = {"M^{q,lambda} lambda=n(1-q/p)", "L^{p,inf}", "not L^p"};
            break;
        }
        case Family::Log: {
            // log|P| with P a product of affine factors vanishing on lattice lines.
            const int factors = s.integer(1, 2);
            std::vector<Point> roots;
            for (int k = 0; k < factors; ++k) roots.push_back(detail::lattice_point(s, n, L));
            t.f = sample(g, [&](const Point& x) {
                double v = 0.0;
                for (const auto& r : roots) {
                    for (int a = 0; a < n; ++a) v += std::log(std::max(std::abs(x[a] - r[a]), rho));
                }
                return v * window(x);
            }, SupportTag::Compact);
            for (std::size_t k = 0; k < roots.size(); ++k) {
                t.parameters.push_back({"root" + std::to_string(k) + "_0", roots[k][0]});
                if (n == 2) t.parameters.push_back({"root" + std::to_string(k) + "_1", roots[k][1]});
            }
            t.parameters.push_back({"rho_reg", rho});
            t.singular_points = roots;
            t.memberships = {"BMO", "not VMO"};
            break;
        }
        case Family::LogPower: {
            const Point c = detail::lattice_point(s, n, L);
            const double delta = spec.log_delta;
            t.f = sample(g, [&](const Point& x) {
                return std::pow(std::abs(std::log(std::max(distance(x, c, n), rho))), delta) * window(x);
            }, SupportTag::Compact);
            t.parameters = {{"center0", c[0]}, {"center1", c[1]}, {"delta", delta}, {"rho_reg", rho}};
            t.singular_points = {c};
            t.memberships = {"VMO", "unbounded"};
            break;
        }
        case Family::Trig: {
            const int modes = s.integer(2, 4);
            struct Mode { int k0, k1; double amp, phase; };
            std::vector<Mode> ms;
            for (int m = 0; m < modes; ++m) {
                ms.push_back({s.integer(1, 4), n == 2 ? s.integer(-4, 4) : 0, s.uniform(-1.0, 1.0),
                              s.uniform(0.0, 2.0 * std::numbers::pi)});
            }
            const double w = 2.0 * std::numbers::pi / L;
            t.f = sample(g, [&](const Point& x) {
                double v = 0.0;
                for (const auto& m : ms) v += m.amp * std::cos(w * (m.k0 * x[0] + m.k1 * x[1]) + m.phase);
                return v;
            }, SupportTag::Periodic);
            for (std::size_t m = 0; m < ms.size(); ++m) {
                const std::string k = std::to_string(m);
                t.parameters.push_back({"k0_" + k, static_cast<double>(ms[m].k0)});
                t.parameters.push_back({"k1_" + k, static_cast<double>(ms[m].k1)});
                t.parameters.push_back({"amp_" + k, ms[m].amp});
                t.parameters.push_back({"phase_" + k, ms[m].phase});
            }
            t.memberships = {"smooth periodic", "BMO", "VMO"};
            break;
        }
        case Family::Potential: {
            const int bumps = s.integer(1, 3);
            std::vector<std::array<double, 4>> bs;
            for (int b = 0; b < bumps; ++b) {
                const Point c = detail::random_point(s, n, L / 8.0);
                bs.push_back({c[0], c[1], s.uniform(L / 32.0, L / 16.0), s.uniform(0.5, 2.0)});
            }
            t.f = sample(g, [&](const Point& x) {
                double v = 0.0;
                for (const auto& b : bs) {
                    const double d = distance(x, {b[0], b[1]}, n);
                    v += b[3] * std::exp(-d * d / (2.0 * b[2] * b[2]));
                }
                return v * window(x);
            }, SupportTag::Compact);
            for (std::size_t b = 0; b < bs.size(); ++b) {
                const std::string k = std::to_string(b);
                t.parameters.push_back({"center0_" + k, bs[b][0]});
                t.parameters.push_back({"center1_" + k, bs[b][1]});
                t.parameters.push_back({"width_" + k, bs[b][2]});
                t.parameters.push_back({"height_" + k, bs[b][3]});
            }
            t.memberships = {"potential V>=0"};
            break;
        }
        case Family::Coefficient: {
            // a = 2^{s(x)} with a periodic trigonometric s, |s| <= 1.
            const int modes = s.integer(1, 3);
            std::vector<std::array<double, 3>> ms;
            double total = 0.0;
            for (int m = 0; m < modes; ++m) {
                ms.push_back({static_cast<double>(s.integer(1, 4)), s.uniform(-1.0, 1.0), s.uniform(0.0, 2.0 * std::numbers::pi)});
                total += std::abs(ms.back()[1]);
            }
            const double strength = s.uniform(0.25, 1.0);
            const double w = 2.0 * std::numbers::pi / L;
            t.f = sample(g, [&](const Point& x) {
                double v = 0.0;
                for (const auto& m : ms) v += m[1] * std::cos(w * m[0] * x[0] + m[2]);
                if (n == 2) {
                    for (const auto& m : ms) v += m[1] * std::cos(w * m[0] * x[1] + m[2]);
                    v *= 0.5;
                }
                return std::exp2(strength * v / total);
            }, SupportTag::Periodic);
            t.parameters = {{"modes", static_cast<double>(modes)}, {"strength", strength}};
            t.memberships = {"elliptic [1/2,2]"};
            break;
        }
    }
    return t;
}

/// Deterministic corpus: identical (seed, spec) gives bit-identical values.
inline std::vector<TestFunction> generate(const CorpusSpec& spec) {
    require(spec.count >= 1, ErrorCode::InvalidArgument, "corpus count must be >= 1");
    require(spec.rho_reg_cells > 0.0, ErrorCode::InvalidArgument, "rho_reg must be positive");
    require(spec.power_p >= 1.0, ErrorCode::InvalidArgument, "power family needs p >= 1");
    require(spec.log_delta > 0.0 && spec.log_delta < 1.0, ErrorCode::InvalidArgument, "log-power delta must lie in (0, 1)");
    std::vector<TestFunction> out;
    for (Family fam : spec.families) {
        for (int i = 0; i < spec.count; ++i) out.push_back(make_member(spec, fam, i));
    }
    return out;
}

/// Same physical draw on the next dyadic grid.
inline CorpusSpec refined(CorpusSpec spec) {
    spec.grid = spec.grid.refined();
    return spec;
}

}  // namespace fmlab
