#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>

#include "instances.hpp"
#include "levyband/scale_functions.hpp"

using namespace levyband;
using levyband::testing::bm_jump;
using levyband::testing::drift_jump;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::InvalidParameter;
}

// 1 / (psi(-s) - q), evaluated from the Laplace exponent directly.
double transform_oracle(const ModelParams& m, double q, double s) { return 1.0 / (laplace_exponent(-s, m) - q); }

void expect_transform_identity(const ModelParams& m, double q) {
    const ExpMixture basis = build_scale_basis(m, q);
    const double r = basis.max_rate();
    for (double shift : {0.3, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 13.0, 40.0}) {
        const double s = r + shift;
        const double want = transform_oracle(m, q, s);
        EXPECT_NEAR(basis.laplace_transform(s), want, 1e-8 * std::abs(want)) << "s=" << s << " q=" << q;
    }
}

}  // namespace

TEST(ScaleBasis, DriftJumpMatchesHandDerivedForm) {
    // theta*drift + 1 = -1: W(x) = 1 - 0.5 exp(-0.5 x).
    const ExpMixture basis = build_scale_basis(drift_jump(-2.0, 1.0), 0.0);
    EXPECT_EQ(basis.terms().size(), 2u);
    for (double x = 0.0; x <= 5.0; x += 0.25) EXPECT_NEAR(basis.W(x), 1.0 - 0.5 * std::exp(-0.5 * x), 1e-12);
}

TEST(ScaleBasis, TransformIdentityAcrossModels) {
    for (double q : {0.0, 0.5, 2.0}) {
        expect_transform_identity(drift_jump(-2.0, 1.0), q);
        expect_transform_identity(drift_jump(-0.7, 1.5), q);
        expect_transform_identity(bm_jump(1.0, 1.0, 1.0, 0.0), q);
        ModelParams m = bm_jump(0.4, 3.0, 1.0, 0.0);
        m.mu = -0.6;
        m.jump_rate = 2.5;
        expect_transform_identity(m, q);
    }
}

TEST(ScaleBasis, OnePositiveRateWhenKilled) {
    const ModelParams m = bm_jump(1.0, 1.0, 1.0, 0.0);
    const double q = 1.0;
    const ExpMixture basis = build_scale_basis(m, q);
    ASSERT_EQ(basis.terms().size(), 3u);
    int positive = 0;
    for (const auto& t : basis.terms()) positive += t.rate > 0 ? 1 : 0;
    EXPECT_EQ(positive, 1);
    // Bracketed bisection on psi(-r) = q for r > 0.
    auto g = [&](double r) { return laplace_exponent(-r, m) - q; };
    auto tol = [](double lo, double hi) { return hi - lo < 1e-14; };
    const auto br = boost::math::tools::bisect(g, 1e-9, 50.0, tol);
    EXPECT_NEAR(basis.max_rate(), 0.5 * (br.first + br.second), 1e-10);
}

TEST(ScaleBasis, ZIdentities) {
    const ExpMixture b0 = build_scale_basis(bm_jump(1.0, 1.0, 1.0, 0.0), 0.0);
    for (double x : {0.0, 0.3, 2.0, 7.0}) EXPECT_DOUBLE_EQ(b0.Z(x), 1.0);
    const ExpMixture b1 = build_scale_basis(bm_jump(1.0, 1.0, 1.0, 0.0), 0.7);
    EXPECT_DOUBLE_EQ(eval_scale(b1, 0.0).Z, 1.0);
    EXPECT_NEAR(eval_scale(build_scale_basis(drift_jump(-2.0, 1.0), 0.0), 0.0).W, 0.5, 1e-14);
}

TEST(ScaleBasis, ZAgainstIndependentQuadrature) {
    for (double q : {0.3, 1.0, 4.0}) {
        const ExpMixture basis = build_scale_basis(bm_jump(0.8, 1.5, 1.0, 0.0), q);
        for (double x : {0.1, 0.9, 2.5, 4.0}) {
            const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                [&](double y) { return basis.W(y); }, 0.0, x, 15, 1e-14);
            EXPECT_NEAR(basis.Z(x) - 1.0 - q * I, 0.0, 1e-9 * (1.0 + basis.Z(x))) << "q=" << q << " x=" << x;
        }
    }
}

TEST(ScaleBasis, MonotoneAndVanishingAtZeroWithDiffusion) {
    for (double q : {0.0, 0.5, 2.0}) {
        const ExpMixture basis = build_scale_basis(bm_jump(1.0, 1.0, 1.0, 0.0), q);
        EXPECT_LE(basis.W(1e-8), 1e-6);
        EXPECT_GE(basis.W(1e-8), 0.0);
        double prev = basis.W(0.0);
        for (double x = 0.01; x <= 8.0; x += 0.01) {
            const double w = basis.W(x);
            EXPECT_GE(w, prev - 1e-12 * (1.0 + w)) << "x=" << x;
            prev = w;
        }
    }
}

TEST(ScaleBasis, Errors) {
    EXPECT_EQ(kind_of([] { build_scale_basis(drift_jump(0.5, 1.0), 0.0); }), ErrorKind::SubordinatorError);
    EXPECT_EQ(kind_of([] { build_scale_basis(drift_jump(0.0, 1.0), 1.0); }), ErrorKind::SubordinatorError);
    EXPECT_EQ(kind_of([] { build_scale_basis(bm_jump(1, 1, 1, 0), -0.1); }), ErrorKind::DomainError);
}

TEST(ClosedFormW0, Values) {
    EXPECT_NEAR(closed_form_w0(-2.0, 1.0, 0.0), 0.5, 1e-15);
    EXPECT_NEAR(closed_form_w0(-2.0, 1.0, 200.0), 1.0, 1e-12);
    EXPECT_EQ(kind_of([] { closed_form_w0(0.0, 1.0, 1.0); }), ErrorKind::DomainError);
}

TEST(ClosedFormW0, AgreesWithPartialFractions) {
    for (auto [drift, theta] : {std::pair{-2.0, 1.0}, std::pair{-3.0, 0.5}, std::pair{-0.5, 4.0}}) {
        const ExpMixture basis = build_scale_basis(drift_jump(drift, theta), 0.0);
        for (int i = 0; i <= 100; ++i) {
            const double x = 0.05 * i;
            EXPECT_NEAR(closed_form_w0(drift, theta, x), basis.W(x), 1e-10) << drift << " " << theta << " " << x;
        }
    }
}

TEST(ClosedFormW0, RepeatedRootLimit) {
    // theta * drift = -1 puts a double pole at the origin; W(x) = x + 1 for drift -1, theta 1.
    const ExpMixture basis = build_scale_basis(drift_jump(-1.0, 1.0), 0.0);
    EXPECT_TRUE(basis.has_repeated_pole());
    for (double x = 0.0; x <= 5.0; x += 0.5) {
        EXPECT_NEAR(closed_form_w0(-1.0, 1.0, x), x + 1.0, 1e-12);
        EXPECT_NEAR(basis.W(x), x + 1.0, 1e-7 * (1.0 + x));
    }
    // Approaching the degenerate point from either side is continuous.
    EXPECT_NEAR(closed_form_w0(-1.0 - 1e-6, 1.0, 3.0), 4.0, 1e-4);
    EXPECT_NEAR(closed_form_w0(-1.0 + 1e-6, 1.0, 3.0), 4.0, 1e-4);
}
