#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fmlab/corpus.hpp"
#include "fmlab/fracint.hpp"
#include "oracles.hpp"

using namespace fmlab;

namespace {

const GridSpec kBig(1, 1024, 16.0);

GridFunction mean_zero_bump(const GridSpec& s) {
    return sample(s, [](const Point& x) { return (1.0 - 2.0 * x[0] * x[0]) * std::exp(-x[0] * x[0]); },
                  SupportTag::Compact);
}

GridFunction positive_bump(const GridSpec& s) {
    return sample(s, [](const Point& x) { return std::exp(-x[0] * x[0]); }, SupportTag::Compact);
}

GridFunction potential(const GridSpec& s, double floor, SupportTag tag) {
    CorpusSpec cs;
    cs.grid = s;
    cs.families = {Family::Potential};
    cs.count = 1;
    const auto V = generate(cs)[0].f.with_support(tag);
    return transform(V, [floor](double v) { return v + floor; });
}

double rel_diff(const GridFunction& a, const GridFunction& b) { return l2_distance(a, b) / l2_norm(b); }

}  // namespace

TEST(Quadrature, DefaultsAndNodeCount) {
    const GridSpec s(1, 256, 8.0);
    const auto q = QuadratureSpec::defaults(s);
    const double h = s.spacing();
    EXPECT_DOUBLE_EQ(q.t_min, h * h / 4.0);
    EXPECT_DOUBLE_EQ(q.t_max, 256.0);
    EXPECT_EQ(q.node_count(), static_cast<std::size_t>(std::ceil(16.0 * std::log10(q.t_max / q.t_min))));
    const auto t = q.times();
    EXPECT_DOUBLE_EQ(t.front(), q.t_min);
    EXPECT_NEAR(t.back(), q.t_max, 1e-9 * q.t_max);
    QuadratureSpec bad = q;
    bad.nodes_per_decade = 4;
    EXPECT_THROW(bad.validate(), Error);
}

// The trapezoid weights integrate t^{a/2 - 1} e^{-c t} / Gamma(a/2), whose value is c^{-a/2}.
TEST(Quadrature, WeightsReproduceLaplaceTransform) {
    const auto q = QuadratureSpec::defaults(GridSpec(1, 512, 8.0));
    for (double a : {0.25, 0.5, 1.0}) {
        const auto t = q.times();
        const auto w = q.weights(a);
        for (double c : {0.1, 1.0, 10.0}) {
            double s = q.lower_tail_weight(a);
            for (std::size_t i = 0; i < t.size(); ++i) s += w[i] * std::exp(-c * t[i]);
            EXPECT_NEAR(s, std::pow(c, -0.5 * a), 1e-4 * std::pow(c, -0.5 * a));
        }
    }
}

TEST(FracApply, ZeroInput) {
    const GridSpec s(1, 128, 8.0);
    for (auto tag : {SupportTag::Periodic, SupportTag::Compact}) {
        const FracOperator op(SemigroupOperator::heat(s), 0.5);
        EXPECT_EQ(frac_apply(op, GridFunction::zeros(s, tag)).max_abs(), 0.0);
    }
    EXPECT_EQ(riesz_apply(0.5, GridFunction::zeros(s, SupportTag::Compact)).max_abs(), 0.0);
}

TEST(FracApply, HeatMatchesRieszOnMeanZeroBump) {
    const auto f = mean_zero_bump(kBig);
    const FracOperator op(SemigroupOperator::heat(kBig), 0.5);
    EXPECT_LT(rel_diff(frac_apply(op, f), riesz_apply(0.5, f)), 0.01);
}

TEST(FracApply, SchrodingerConstantPotentialMatchesShiftedMultiplier) {
    const GridSpec s(1, 128, 8.0);
    const double c = 0.5;
    const auto V = sample(s, [&](const Point&) { return c; }, SupportTag::Periodic);
    const auto f = sample(s, [](const Point& x) { return std::exp(-x[0] * x[0]) + 0.3 * std::cos(std::numbers::pi * x[0] / 2); },
                          SupportTag::Periodic);
    for (double a : {0.25, 0.5, 0.9}) {
        const FracOperator op(SemigroupOperator::schrodinger(V, 2), a, std::nullopt, DcMode::None);
        const std::vector<double> fv(f.values().begin(), f.values().end());
        const GridFunction ref(s, oracle::dft_multiplier(fv, 8.0, [&](double k) { return std::pow(k * k + c, -0.5 * a); }),
                               SupportTag::Periodic);
        EXPECT_LT(rel_diff(frac_apply(op, f), ref), 1e-3) << "alpha " << a;
    }
}

TEST(FracApply, PeriodicHeatMatchesRieszMultiplierOnMeanZeroData) {
    const GridSpec s(1, 128, 8.0);
    const auto f = sample(s, [](const Point& x) { return std::sin(std::numbers::pi * x[0] / 4) + 0.5 * std::cos(std::numbers::pi * x[0]); },
                          SupportTag::Periodic);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const std::vector<double> fv(f.values().begin(), f.values().end());
    const GridFunction ref(s, oracle::dft_multiplier(fv, 8.0, [](double k) { return k == 0.0 ? 0.0 : std::pow(k * k, -0.25); }),
                           SupportTag::Periodic);
    EXPECT_LT(rel_diff(frac_apply(op, f), ref), 1e-3);
}

TEST(FracApply, ReportFlagsRemovedMean) {
    const GridSpec s(1, 64, 8.0);
    const auto f = sample(s, [](const Point&) { return 2.0; }, SupportTag::Periodic);
    const auto rep = frac_apply_report(FracOperator(SemigroupOperator::heat(s), 0.5), f);
    EXPECT_DOUBLE_EQ(rep.removed_mean, 2.0);
    EXPECT_LT(rep.value.max_abs(), 1e-12);
    EXPECT_GT(rep.lower_tail_weight, 0.0);
    EXPECT_GT(rep.nodes, 0u);
}

TEST(FracApply, DivergentConfigurationRejected) {
    const GridSpec s(1, 64, 8.0);
    const auto f = sample(s, [](const Point&) { return 1.0; }, SupportTag::Periodic);
    const FracOperator op(SemigroupOperator::heat(s), 0.5, std::nullopt, DcMode::None);
    try {
        frac_apply(op, f);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Divergent);
    }
    // Mean-zero data is fine without projection.
    const auto g = sample(s, [](const Point& x) { return std::sin(std::numbers::pi * x[0] / 4); }, SupportTag::Periodic);
    EXPECT_NO_THROW(frac_apply(op, g));
}

TEST(FracApply, AlphaRangeRejected) {
    const GridSpec s(1, 64, 8.0);
    EXPECT_THROW(FracOperator(SemigroupOperator::heat(s), 0.0), Error);
    EXPECT_THROW(FracOperator(SemigroupOperator::heat(s), 1.0), Error);
    EXPECT_NO_THROW(FracOperator(SemigroupOperator::heat(GridSpec(2, 16, 4.0)), 1.5));
    EXPECT_THROW(riesz_apply(1.2, GridFunction::zeros(s, SupportTag::Compact)), Error);
}

TEST(FracApply, QuadratureConvergence) {
    const auto f = mean_zero_bump(kBig);
    const FracOperator op(SemigroupOperator::heat(kBig), 0.5);
    const auto q = op.quadrature();
    auto q2 = q;
    q2.nodes_per_decade *= 2;
    EXPECT_LT(rel_diff(frac_apply(op, f), frac_apply(op.with_quadrature(q2), f)), 1e-3);
}

TEST(FracApply, Linearity) {
    const GridSpec s(1, 256, 16.0);
    const auto f = mean_zero_bump(s);
    const auto g = positive_bump(s);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const auto lhs = frac_apply(op, combine(1.5, f, -2.0, g));
    const auto rhs = combine(1.5, frac_apply(op, f), -2.0, frac_apply(op, g));
    EXPECT_LT(rel_diff(lhs, rhs), 1e-10);
    const auto rl = riesz_apply(0.5, combine(1.5, f, -2.0, g));
    const auto rr = combine(1.5, riesz_apply(0.5, f), -2.0, riesz_apply(0.5, g));
    EXPECT_LT(rel_diff(rl, rr), 1e-10);
    const auto dl = difference_apply(op, 0.3, combine(1.5, f, -2.0, g));
    const auto dr = combine(1.5, difference_apply(op, 0.3, f), -2.0, difference_apply(op, 0.3, g));
    EXPECT_LT(rel_diff(dl, dr), 1e-10);
}

TEST(Riesz, IndicatorAtOrigin) {
    const double a = 0.5;
    const auto chi = sample(kBig, [](const Point& x) { return std::abs(x[0]) <= 1.0 ? 1.0 : 0.0; }, SupportTag::Compact);
    const auto u = riesz_apply(a, chi);
    // Two halves of int_{-1}^{1} |y|^{a-1} dy by singular-endpoint quadrature.
    const double ref = 2.0 * oracle::singular_endpoint_integral([](double) { return 1.0; }, 0.0, 1.0, 1.0 - a) /
                       oracle::riesz_constant(a, 1);
    EXPECT_NEAR(ref, 4.0 / std::sqrt(2.0 * std::numbers::pi), 1e-9);
    EXPECT_NEAR(u[origin_index(kBig)], ref, 0.01 * ref);
}

TEST(Riesz, RadialSymmetryPreserved) {
    const GridSpec s(2, 64, 8.0);
    const auto f = sample(s, [](const Point& x) { return std::exp(-4.0 * (x[0] * x[0] + x[1] * x[1])); }, SupportTag::Compact);
    const auto u = riesz_apply(0.75, f);
    const std::size_t N = 64;
    // Reflections and the swap x1 <-> x2 about the origin node (32, 32).
    for (std::size_t i = 1; i < N; ++i) {
        for (std::size_t j = 1; j < N; ++j) {
            const double v = u[s.flatten(i, j)];
            EXPECT_NEAR(v, u[s.flatten(j, i)], 1e-12 * u.max_abs());
            EXPECT_NEAR(v, u[s.flatten(N - i, j)], 1e-12 * u.max_abs());
        }
    }
}

TEST(Riesz, DilationCovariance) {
    const GridSpec s(1, 1024, 16.0);
    const double a = 0.5, delta = 2.0;
    const auto f = mean_zero_bump(s);
    // f_delta(x) = f(delta x) on a grid shrunk by delta shares the node values of f.
    const auto fd = f.with_spec(s.rescaled(1.0 / delta));
    const auto lhs = riesz_apply(a, fd);
    const auto rhs = scaled(riesz_apply(a, f), std::pow(delta, -a));
    EXPECT_LT(l2_distance(lhs.with_spec(s), rhs.with_spec(s)) / l2_norm(rhs.with_spec(s)), 0.01);
}

TEST(FracKernel, MatchesRieszKernelOffDiagonal) {
    const GridSpec s(1, 512, 16.0);
    const double a = 0.5;
    const auto K = frac_kernel(FracOperator(SemigroupOperator::heat(s), a));
    const double g = oracle::riesz_constant(a, 1);
    double worst = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (!in_inner_half_box(s, j)) continue;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!in_inner_half_box(s, i)) continue;
            const double d = std::abs(s.node(i)[0] - s.node(j)[0]);
            if (d < 8.0 * s.spacing()) continue;
            const double ref = std::pow(d, a - 1.0) / g;
            worst = std::max(worst, std::abs(K.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - ref) / ref);
        }
    }
    EXPECT_LT(worst, 0.02);
}

TEST(FracKernel, SymmetricAndPositive) {
    const GridSpec s(1, 256, 8.0);
    const auto heat = frac_kernel(FracOperator(SemigroupOperator::heat(s), 0.5));
    const double mx = heat.entries.cwiseAbs().maxCoeff();
    EXPECT_LT((heat.entries - heat.entries.transpose()).cwiseAbs().maxCoeff(), 1e-10 * mx);
    EXPECT_GE(heat.entries.minCoeff(), -1e-10 * mx);

    CorpusSpec cs;
    cs.grid = s;
    cs.families = {Family::Coefficient};
    cs.count = 1;
    const auto a = generate(cs)[0].f;
    const auto div = frac_kernel(FracOperator(SemigroupOperator::divform(a), 0.5), SupportTag::Periodic);
    EXPECT_LT((div.entries - div.entries.transpose()).cwiseAbs().maxCoeff(), 1e-10 * div.entries.cwiseAbs().maxCoeff());
}

// Incremental Strang steps of different lengths do not commute, so the
// Schrodinger kernel is symmetric only to splitting accuracy.
TEST(FracKernel, SchrodingerSymmetricToSplittingAccuracy) {
    const GridSpec s(1, 256, 8.0);
    const auto V = potential(s, 0.25, SupportTag::Periodic);
    std::vector<double> asym;
    for (int m : {2, 8}) {
        const auto K = frac_kernel(FracOperator(SemigroupOperator::schrodinger(V, m), 0.5, std::nullopt, DcMode::None),
                                   SupportTag::Periodic);
        const double mx = K.entries.cwiseAbs().maxCoeff();
        EXPECT_GE(K.entries.minCoeff(), -1e-10 * mx);
        asym.push_back((K.entries - K.entries.transpose()).cwiseAbs().maxCoeff() / mx);
    }
    EXPECT_LT(asym[0], 1e-3);
    EXPECT_LT(asym[1], asym[0] / 8.0);
}

TEST(FracKernel, ReconstructsFracApply) {
    const GridSpec s(1, 256, 16.0);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const auto K = frac_kernel(op);
    const auto f = mean_zero_bump(s);
    const Eigen::Map<const Eigen::VectorXd> x(f.values().data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::VectorXd y = K.entries * x * s.spacing();
    const GridFunction r(s, std::vector<double>(y.data(), y.data() + y.size()), SupportTag::Compact);
    EXPECT_LT(rel_diff(r, frac_apply(op, f)), 1e-8);
}

TEST(FracKernel, DifferenceConsistencyTriangle) {
    const GridSpec s(1, 128, 8.0);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const auto f = sample(s, [](const Point& x) { return std::sin(std::numbers::pi * x[0] / 4); }, SupportTag::Periodic);
    const auto K = frac_kernel(op, SupportTag::Periodic);
    const double t = 0.2;
    const auto D = difference_kernel(K, kernel_matrix(op.semigroup(), t, SupportTag::Periodic));
    const Eigen::Map<const Eigen::VectorXd> x(f.values().data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::VectorXd y = D * x * s.spacing();
    const GridFunction r(s, std::vector<double>(y.data(), y.data() + y.size()), SupportTag::Periodic);
    EXPECT_LT(rel_diff(r, difference_apply(op, t, f)), 1e-8);
}

TEST(KernelBoundFit, HeatSaturatesRieszConstant) {
    const GridSpec s(1, 512, 16.0);
    const double a = 0.5;
    const auto fit = kernel_bound_fit(frac_kernel(FracOperator(SemigroupOperator::heat(s), a)), a);
    const double ref = 1.0 / oracle::riesz_constant(a, 1);
    EXPECT_NEAR(fit.constant, ref, 0.02 * ref);
    EXPECT_DOUBLE_EQ(fit.r_cut, 4.0 * s.spacing());
    EXPECT_GE(fit.distance, fit.r_cut);
}

TEST(KernelBoundFit, ZeroMatrixAndExclusion) {
    const GridSpec s(1, 32, 4.0);
    KernelMatrix Z{0.0, s, SupportTag::Periodic, "zero", Eigen::MatrixXd::Zero(32, 32)};
    EXPECT_EQ(kernel_bound_fit(Z, 0.5).constant, 0.0);
    EXPECT_THROW(kernel_bound_fit(Z, 0.5, 2.0 * s.spacing()), Error);
    EXPECT_THROW(kernel_bound_fit(Z, 0.5, 10.0), Error);
}

TEST(KernelBoundFit, SchrodingerBelowHeat) {
    const GridSpec s(1, 256, 8.0);
    const double a = 0.5;
    const auto heat = kernel_bound_fit(frac_kernel(FracOperator(SemigroupOperator::heat(s), a)), a);
    const auto V = potential(s, 0.25, SupportTag::Periodic);
    const auto schr = kernel_bound_fit(
        frac_kernel(FracOperator(SemigroupOperator::schrodinger(V, 2), a, std::nullopt, DcMode::None), SupportTag::Periodic), a);
    EXPECT_LE(schr.constant, heat.constant + 1e-8);
}

TEST(Domination, HeatNonnegativeInputIsEqualityCase) {
    const auto f = positive_bump(kBig);
    const double r = domination_check(FracOperator(SemigroupOperator::heat(kBig), 0.5), f);
    EXPECT_LT(r, 1.0 + 5e-3);
    EXPECT_GT(r, 1.0 - 5e-3);
    EXPECT_EQ(domination_check(FracOperator(SemigroupOperator::heat(kBig), 0.5), GridFunction::zeros(kBig, SupportTag::Compact)),
              0.0);
}

TEST(Domination, SignedInputBounded) {
    const GridSpec s(1, 256, 16.0);
    const auto f = mean_zero_bump(s);
    EXPECT_LT(domination_check(FracOperator(SemigroupOperator::heat(s), 0.5), f), 1.0 + 5e-3);
}

TEST(DifferenceApply, SmallAndLargeTimeLimits) {
    const GridSpec s(1, 256, 8.0);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const auto f = sample(s, [](const Point& x) { return std::sin(std::numbers::pi * x[0] / 4) * std::exp(-x[0] * x[0] / 4); },
                          SupportTag::Periodic);
    const auto u = frac_apply(op, f);
    const double h = s.spacing();
    EXPECT_LE(l2_norm(difference_apply(op, h * h / 16.0, f)), 0.05 * l2_norm(u));
    EXPECT_LT(rel_diff(difference_apply(op, 64.0, f), u), 0.05);
    EXPECT_EQ(difference_apply(op, 0.1, GridFunction::zeros(s, SupportTag::Periodic)).max_abs(), 0.0);
    EXPECT_THROW(difference_apply(op, 0.0, f), Error);
}

TEST(DifferenceKernel, FiniteAndRefinementStable) {
    const std::vector<double> tl = {1.0 / 256, 1.0 / 64, 1.0 / 16, 0.25, 1.0, 4.0};
    for (double a : {0.25, 0.5}) {
        std::vector<double> C;
        for (std::size_t N : {256u, 512u}) {
            const GridSpec s(1, N, 8.0);
            const auto rep = difference_kernel_bound_fit(FracOperator(SemigroupOperator::heat(s), a), tl);
            EXPECT_TRUE(std::isfinite(rep.C_diff));
            EXPECT_GT(rep.C_diff, 0.0);
            EXPECT_GE(rep.distance, rep.r_cut);
            C.push_back(rep.C_diff);
        }
        EXPECT_LT(std::abs(C[1] - C[0]) / C[0], 0.15) << "alpha " << a;
    }
}

TEST(DifferenceKernel, SchrodingerStable) {
    const std::vector<double> tl = {1.0 / 64, 1.0 / 16, 0.25, 1.0, 4.0};
    std::vector<double> C;
    for (std::size_t N : {128u, 256u}) {
        const GridSpec s(1, N, 8.0);
        const auto V = potential(s, 0.25, SupportTag::Periodic);
        const FracOperator op(SemigroupOperator::schrodinger(V, 4), 0.5, std::nullopt, DcMode::None);
        C.push_back(difference_kernel_bound_fit(op, tl).C_diff);
    }
    EXPECT_TRUE(std::isfinite(C[0]));
    EXPECT_LT(std::abs(C[1] - C[0]) / C[0], 0.15);
}

TEST(DifferenceKernel, LinearInTimeRegime) {
    const GridSpec s(1, 256, 16.0);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const auto K = frac_kernel(op);
    const double t = 0.01;
    const auto D1 = difference_kernel(K, kernel_matrix(op.semigroup(), t, SupportTag::Compact));
    const auto D4 = difference_kernel(K, kernel_matrix(op.semigroup(), 4.0 * t, SupportTag::Compact));
    const std::size_t i = origin_index(s);
    const std::size_t j = i + 32;  // |x - y| = 2, |x - y|^2 / t = 400
    const double ratio = D4(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) /
                         D1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    EXPECT_NEAR(ratio, 4.0, 0.8);
}

TEST(DifferenceKernel, TimeRangeEnforced) {
    const GridSpec s(1, 64, 8.0);
    const FracOperator op(SemigroupOperator::heat(s), 0.5);
    const std::vector<double> small = {0.5 * s.spacing() * s.spacing()};
    const std::vector<double> large = {5.0};
    EXPECT_THROW(difference_kernel_bound_fit(op, small), Error);
    EXPECT_THROW(difference_kernel_bound_fit(op, large), Error);
    EXPECT_THROW(difference_kernel_bound_fit(op, std::vector<double>{}), Error);
}
