#pragma once

#include <vector>

#include "levyband/model.hpp"
#include "levyband/polynomial.hpp"

namespace levyband {

/// One term (weight + x_weight * x) * exp(rate * x) of a scale function.
/// x_weight is nonzero only for a merged double pole.
struct ExpTerm {
    double rate = 0.0;
    double weight = 0.0;
    double x_weight = 0.0;
};

/// The q-scale function W^(q) of a spectrally positive model, stored as a
/// finite exponential mixture on [0, inf). W^(q) is the scale function of the
/// spectrally negative dual -Y: its Laplace transform is 1/(psi(-s) - q) with
/// psi the Laplace exponent of Y itself. Downstream exit formulas use it with
/// arguments measured from the upper barrier (b - x), which is the dual's
/// distance above its lower barrier.
class ExpMixture {
public:
    ExpMixture() = default;
    ExpMixture(double q, std::vector<ExpTerm> terms, bool repeated_pole);

    double q() const noexcept { return q_; }
    const std::vector<ExpTerm>& terms() const noexcept { return terms_; }
    bool has_repeated_pole() const noexcept { return repeated_pole_; }
    double max_rate() const;

    /// W^(q)(x); zero for x < 0.
    double W(double x) const;
    /// dW/dx for x > 0.
    double W_prime(double x) const;
    /// Integral of W^(q) over [lo, hi] (negative arguments contribute zero).
    double integral(double lo, double hi) const;
    /// Z^(q)(x) = 1 + q * integral of W^(q) over [0, x].
    double Z(double x) const;
    /// Term-wise transform sum_i w_i/(s - r_i) + v_i/(s - r_i)^2, valid for s > max_rate().
    double laplace_transform(double s) const;

private:
    double q_ = 0.0;
    std::vector<ExpTerm> terms_;
    bool repeated_pole_ = false;
};

/// (psi(-s) - q)(theta + s) as a polynomial in s; its roots are the poles of
/// the scale-function transform. Cubic when sigma > 0, quadratic when sigma == 0.
Polynomial scale_denominator(const ModelParams& model, double q);

/// Partial-fraction inversion of (theta + s)/[(psi(-s) - q)(theta + s)].
/// Throws SubordinatorError when sigma == 0 and mu >= 0, DomainError for q < 0,
/// RootFindingFailure when the poles cannot be isolated.
ExpMixture build_scale_basis(const ModelParams& model, double q);

struct ScaleValue {
    double W = 0.0;
    double Z = 1.0;
};

ScaleValue eval_scale(const ExpMixture& basis, double x);

/// W^(0) for Y_t = drift * t + compound Poisson(rate 1, Exp(jump_scale) jumps),
/// drift < 0. At jump_scale * drift == -1 (double pole at the origin) returns
/// the repeated-root limit -(jump_scale * x + 1) / drift.
double closed_form_w0(double drift, double jump_scale, double x);

}  // namespace levyband
