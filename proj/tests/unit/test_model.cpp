#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "levyband/model.hpp"
#include "levyband/simulator.hpp"

using namespace levyband;

namespace {

bool has_kind(const std::vector<Violation>& v, ErrorKind k) {
    return std::any_of(v.begin(), v.end(), [k](const Violation& x) { return x.kind == k; });
}

ModelParams base_model() {
    ModelParams m;
    m.sigma = 1.0;
    return m;
}

}  // namespace

TEST(ValidateModel, AcceptsStandardInstance) {
    EXPECT_NO_THROW(validate_model(base_model(), CostParams{1, 0.1, 1, 0.1}));
}

TEST(ValidateModel, RejectsZeroFixedCost) {
    try {
        validate_model(base_model(), CostParams{0, 0.1, 1, 0.1});
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_TRUE(has_kind(e.violations(), ErrorKind::NonPositiveFixedCost));
    }
}

TEST(ValidateModel, RejectsZeroDiscount) {
    ModelParams m = base_model();
    m.discount = 0.0;
    EXPECT_TRUE(has_kind(check_model(m, {}), ErrorKind::NonPositiveDiscount));
}

TEST(ValidateModel, ReportsEveryViolation) {
    ModelParams m = base_model();
    m.discount = -1.0;
    m.jump_scale = 0.0;
    const auto v = check_model(m, CostParams{1, -0.5, -2, 0});
    EXPECT_TRUE(has_kind(v, ErrorKind::NonPositiveDiscount));
    EXPECT_TRUE(has_kind(v, ErrorKind::NonPositiveJumpScale));
    EXPECT_TRUE(has_kind(v, ErrorKind::NegativeProportionalCost));
    EXPECT_TRUE(has_kind(v, ErrorKind::NonPositiveFixedCost));
    EXPECT_EQ(v.size(), 4u);
}

TEST(InterventionCost, PiecewiseDefinition) {
    const CostParams up{1, 0.5, 1, 0};
    EXPECT_DOUBLE_EQ(intervention_cost(0.0, up), 0.0);
    EXPECT_DOUBLE_EQ(intervention_cost(2.0, up), 2.0);
    const CostParams down{1, 0, 2, 0.5};
    EXPECT_DOUBLE_EQ(intervention_cost(-3.0, down), 3.5);
}

TEST(InterventionCost, BoundedBelowBySmallerFixedCost) {
    const CostParams k{1.5, 0.3, 0.7, 0.2};
    for (double xi = -5; xi <= 5; xi += 0.01) {
        if (std::abs(xi) < 1e-12) continue;
        EXPECT_GE(intervention_cost(xi, k), std::min(k.fixed_up, k.fixed_down));
    }
}

TEST(OpportunityCost, QuadraticAroundTarget) {
    ModelParams m;
    m.target = 1.5;
    EXPECT_DOUBLE_EQ(opportunity_cost(1.5, m), 0.0);
    EXPECT_DOUBLE_EQ(opportunity_cost(3.5, m), 4.0);
    EXPECT_DOUBLE_EQ(opportunity_cost(-0.5, m), 4.0);
}

TEST(LaplaceExponent, ValuesAndDomain) {
    ModelParams m;
    m.mu = -2.0;
    m.sigma = 0.0;
    EXPECT_DOUBLE_EQ(laplace_exponent(0.0, m), 0.0);
    EXPECT_NEAR(laplace_exponent(0.5, m), 0.0, 1e-15);
    try {
        laplace_exponent(m.jump_scale, m);
        FAIL() << "expected DomainError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DomainError);
    }
}

TEST(LaplaceExponent, ConvexOnDomain) {
    ModelParams m = base_model();
    m.mu = 0.3;
    m.jump_scale = 2.0;
    for (double s1 = -3.0; s1 < 1.9; s1 += 0.37) {
        for (double s3 = s1 + 0.05; s3 < 1.95; s3 += 0.41) {
            const double s2 = 0.5 * (s1 + s3);
            EXPECT_LE(laplace_exponent(s2, m),
                      0.5 * (laplace_exponent(s1, m) + laplace_exponent(s3, m)) + 1e-12);
        }
    }
}

TEST(LaplaceExponent, MatchesSimulatedMomentGenerator) {
    ModelParams m;
    m.mu = -0.4;
    m.sigma = 0.8;
    m.jump_rate = 1.3;
    m.jump_scale = 2.0;
    const int n = 200000;
    for (double s : {-0.9, -0.4, 0.3, 0.8}) {
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) {
            CounterRng rng = CounterRng::for_path(2024, static_cast<std::uint64_t>(i));
            v[static_cast<std::size_t>(i)] = std::exp(s * sample_increment(m, 1.0, rng));
        }
        const double mean = pairwise_sum(v.data(), v.size()) / n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double se = std::sqrt(ss / (n - 1) / n);
        EXPECT_LE(std::abs(mean - std::exp(laplace_exponent(s, m))), 3.0 * se) << "s=" << s;
    }
}
