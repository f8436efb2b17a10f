#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "instances.hpp"
#include "levyband/exit_analysis.hpp"
#include "levyband/simulator.hpp"

using namespace levyband;
using namespace levyband::testing;

namespace {

const BandPolicy kBands{-2.0, -1.0, 1.0, 2.0};

ModelParams creeping_model() {
    ModelParams m = drift_jump(-2.0, 1.0);
    m.discount = 1.0;
    return m;
}

const BandPolicy kCreepBands{0.0, 0.5, 1.5, 2.0};

double gk(const std::function<double(double)>& f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 12, 1e-13);
}

}  // namespace

TEST(PotentialDensity, VanishesAtUpperBarrierAndIsNonnegative) {
    const auto basis = build_scale_basis(bm_jump(1, 1, 1, 0), 0.7);
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        EXPECT_NEAR(potential_density(basis, x, 2.0, kBands), 0.0, 1e-14);
        for (double y = -2.0; y <= 2.0; y += 0.1) EXPECT_GE(potential_density(basis, x, y, kBands), -1e-14);
    }
}

TEST(PotentialMass, MatchesQuadratureOfDensity) {
    const auto basis = build_scale_basis(bm_jump(1, 1, 1, 0), 0.3);
    for (double x : {-1.5, 0.0, 1.2}) {
        const double closed = potential_mass(basis, x, {-1.0, 0.5}, kBands);
        const double quad = gk([&](double y) { return potential_density(basis, x, y, kBands); }, -1.0, 0.5);
        EXPECT_NEAR(closed, quad, 1e-10);
        EXPECT_NEAR(potential_mass(basis, x, {-5.0, 9.0}, kBands), potential_mass(basis, x, {-2.0, 2.0}, kBands),
                    1e-14);
    }
}

TEST(ExitFunctionals, KilledMassIdentity) {
    // q E[tau ^ e_q] + P[exit before e_q] = 1 splits the unit mass exactly.
    for (double q : {0.2, 1.0, 3.0}) {
        for (const auto& m : {bm_jump(1, 1, 1, 0), creeping_model()}) {
            const auto basis = build_scale_basis(m, q);
            const BandPolicy& p = m.sigma > 0 ? kBands : kCreepBands;
            for (double t : {0.05, 0.3, 0.6, 0.95}) {
                const double x = p.a + t * (p.b - p.a);
                const auto e = exit_functionals(basis, x, p);
                const double occ = q * potential_mass(basis, x, {p.a, p.b}, p);
                EXPECT_NEAR(occ + e.p_up_lt + e.p_down_lt, 1.0, 1e-10) << "q=" << q << " x=" << x;
                EXPECT_GE(e.p_up_lt, 0.0);
                EXPECT_GE(e.p_down_lt, 0.0);
                EXPECT_LE(e.p_up_lt + e.p_down_lt, 1.0 + 1e-12);
            }
        }
    }
}

TEST(ExitFunctionals, BarrierStarts) {
    const auto basis = build_scale_basis(bm_jump(1, 1, 1, 0), 0.5);
    const auto at_a = exit_functionals(basis, kBands.a, kBands);
    EXPECT_NEAR(at_a.p_down_lt, 1.0, 1e-12);
    EXPECT_NEAR(at_a.p_up_lt, 0.0, 1e-12);
    const auto at_b = exit_functionals(basis, kBands.b, kBands);
    EXPECT_NEAR(at_b.p_up_lt, 1.0, 1e-12);
    EXPECT_NEAR(at_b.p_down_lt, 0.0, 1e-12);
}

TEST(ExitFunctionals, DownwardExitMatchesSimulation) {
    // Undiscounted exit below a, against direct simulation of the free process.
    const ModelParams m = bm_jump(1, 1, 1, 0);
    const auto basis = build_scale_basis(m, 0.0);
    const double x = -1.0;
    const double p = exit_functionals(basis, x, kBands).p_down_lt;
    const int n = 4000;
    int down = 0;
    for (int i = 0; i < n; ++i) {
        auto rng = CounterRng::for_path(5, static_cast<std::uint64_t>(i));
        double y = x;
        while (y > kBands.a && y < kBands.b) y += sample_increment(m, 1e-3, rng);
        down += y <= kBands.a;
    }
    const double ph = static_cast<double>(down) / n;
    EXPECT_LE(std::abs(ph - p), 4.0 * std::sqrt(p * (1 - p) / n) + 0.01);
}

TEST(TransientDistribution, FullAndEmptySets) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    for (double q : {0.01, 1.0, 10.0}) {
        for (double x : {-3.0, -1.7, 0.0, 1.9, 5.0}) {
            EXPECT_NEAR(transient_distribution(m, kBands, {q, x, {kBands.a, kBands.b}}), 1.0, 1e-8);
            EXPECT_NEAR(transient_distribution(m, kBands, {q, x, {0.3, 0.3}}), 0.0, 1e-14);
        }
    }
}

TEST(TransientDistribution, BoundaryStartsReset) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    const Interval set{-0.5, 0.7};
    EXPECT_DOUBLE_EQ(transient_distribution(m, kBands, {1.0, -4.0, set}),
                     transient_distribution(m, kBands, {1.0, kBands.alpha, set}));
    EXPECT_DOUBLE_EQ(transient_distribution(m, kBands, {1.0, kBands.b, set}),
                     transient_distribution(m, kBands, {1.0, kBands.beta, set}));
}

TEST(TransientDistribution, AdditiveOverDisjointSets) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    const double whole = transient_distribution(m, kBands, {0.5, 0.2, {-1.5, 1.5}});
    const double parts = transient_distribution(m, kBands, 0.5, 0.2, {{-1.5, 0.0}, {0.0, 1.5}});
    EXPECT_NEAR(whole, parts, 1e-12);
}

TEST(TransientDistribution, LargeRateApproachesIndicator) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    EXPECT_GT(transient_distribution(m, kBands, {1e4, 0.0, {-0.5, 0.5}}), 0.99);
    EXPECT_LT(transient_distribution(m, kBands, {1e4, 0.0, {1.0, 2.0}}), 0.01);
}

TEST(TransientDistribution, RejectsReversedInterval) {
    EXPECT_THROW(transient_distribution(bm_jump(1, 1, 1, 0), kBands, {1.0, 0.0, {1.0, 0.0}}), Error);
}

TEST(StationaryLaw, NormalizationAndNumerator) {
    for (const auto& [m, p] : {std::pair{bm_jump(1, 1, 1, 0), kBands}, std::pair{creeping_model(), kCreepBands}}) {
        const StationaryLaw law(m, p);
        EXPECT_GT(law.normalizer(), 0.0);
        EXPECT_NEAR(law.probability({p.a, p.b}), 1.0, 1e-8);
        EXPECT_NEAR(law.numerator({p.a, p.b}), law.normalizer(), 1e-8 * law.normalizer());
        const double mid = 0.5 * (p.alpha + p.beta);
        EXPECT_NEAR(law.probability({p.a, mid}) + law.probability({mid, p.b}), 1.0, 1e-12);
        EXPECT_NEAR(law.cdf(mid), law.probability({p.a, mid}), 1e-12);
        const double integral = gk([&](double y) { return law.density(y); }, p.a, mid);
        EXPECT_NEAR(integral, law.cdf(mid), 1e-8);
        for (double y = p.a; y <= p.b; y += 0.05) EXPECT_GE(law.density(y), -1e-14);
    }
}

TEST(StationaryLaw, CreepingExampleAgainstEventSimulation) {
    // For sigma = 0 paths are piecewise linear between jumps, so occupation
    // can be accumulated exactly without a time grid.
    const ModelParams m = creeping_model();
    const StationaryLaw law(m, kCreepBands);
    auto rng = CounterRng::for_path(11, 0);
    double x = kCreepBands.alpha, t_total = 0.0, t_below = 0.0;
    const double cut = 1.0;
    for (int k = 0; k < 400000; ++k) {
        const double wait = rng.exponential(1.0);
        const double hit = (x - kCreepBands.a) / 2.0;
        const double run = std::min(wait, hit);
        const double x_end = x - 2.0 * run;
        // Time spent below `cut` along the linear descent.
        const double lo = std::max(x_end, kCreepBands.a), hi = std::min(x, cut);
        if (hi > lo) t_below += (hi - lo) / 2.0;
        t_total += run;
        if (wait >= hit) {
            x = kCreepBands.alpha;
            continue;
        }
        x = x_end + rng.exponential(1.0);
        if (x >= kCreepBands.b) x = kCreepBands.beta;
    }
    EXPECT_NEAR(t_below / t_total, law.cdf(cut), 0.005);
}

TEST(StationaryLaw, MeasureFunctionMatchesClass) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    EXPECT_DOUBLE_EQ(stationary_measure(m, kBands, {-1.0, 0.5}), StationaryLaw(m, kBands).probability({-1.0, 0.5}));
}

TEST(LimitConsistency, TransientApproachesStationary) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    const StationaryLaw law(m, kBands);
    for (const Interval& set : {Interval{-2.0, -0.5}, Interval{0.0, 1.0}}) {
        const double pi = law.probability(set);
        for (double x : {-1.0, 0.4}) {
            double prev = INFINITY;
            for (double q : {1.0, 0.1, 0.01, 0.001, 1e-4}) {
                const double gap = std::abs(transient_distribution(m, kBands, {q, x, set}) - pi);
                EXPECT_LT(gap, prev);
                prev = gap;
            }
            EXPECT_LT(prev, 1e-3);
        }
    }
}

TEST(ExpectedExitTime, QuadratureAndLimits) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    const auto b0 = build_scale_basis(m, 0.0);
    for (double x : {-1.5, 0.0, 1.0}) {
        const double quad = gk([&](double y) { return potential_density(b0, x, y, kBands); }, kBands.a, kBands.b);
        EXPECT_NEAR(expected_exit_time(b0, x, kBands), quad, 1e-9);
    }
    EXPECT_NEAR(expected_exit_time(b0, kBands.b, kBands), 0.0, 1e-12);
    EXPECT_LT(expected_exit_time(b0, kBands.b - 1e-6, kBands), 1e-4);
    EXPECT_THROW(expected_exit_time(build_scale_basis(m, 0.5), 0.0, kBands), Error);
}

TEST(ExpectedExitTime, MatchesSimulation) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    const double analytic = expected_exit_time(build_scale_basis(m, 0.0), 0.0, kBands);
    SimConfig cfg;
    cfg.paths = 4000;
    cfg.dt = 1e-4;
    cfg.horizon = 200.0;
    cfg.bridge_correction = true;
    const auto est = estimate_exit_time_mc(m, kBands, 0.0, cfg);
    EXPECT_LE(std::abs(est.mean - analytic), 3.5 * est.std_error);
}

TEST(ExitAnalysis, DegenerateInputsThrow) {
    const ModelParams m = bm_jump(1, 1, 1, 0);
    EXPECT_THROW(StationaryLaw(m, BandPolicy{1.0, 0.0, 0.5, 2.0}), Error);
}
