#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "levyband/model.hpp"
#include "levyband/polynomial.hpp"

namespace levyband {

/// Control band thresholds a < alpha <= beta < b: reset to alpha at or below a,
/// reset to beta at or above b.
struct BandPolicy {
    double a = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double b = 0.0;

    bool is_ordered() const { return a < alpha && alpha <= beta && beta < b; }
    /// Throws OrderingViolation unless a < alpha <= beta < b.
    void require_ordered() const;
};

struct ParticularCoefficients {
    double K1 = 0.0;
    double K2 = 0.0;
    double K3 = 0.0;
};

/// Throws UnsupportedModel unless sigma > 0, jump_rate == 1 and mu == 0: the
/// ODE coefficients below are derived for Brownian motion plus a rate-one
/// Exp(theta) compound Poisson process without drift.
void require_solvable_model(const ModelParams& model);

/// Coefficients of the quadratic particular solution K1 u^2 + K2 u + K3, u = x - rho.
ParticularCoefficients particular_coefficients(const ModelParams& model);

/// sigma^2/2 x^3 + sigma^2 theta x^2 + (sigma^2 theta^2/2 - lambda - 1) x - theta.
Polynomial characteristic_polynomial(const ModelParams& model);

/// Roots c1 < -theta < c2 < 0 < c3 of the characteristic cubic.
std::array<double, 3> characteristic_roots(const ModelParams& model);

/// Candidate value function
///   f(x) = K1 (x-rho)^2 + K2 (x-rho) + K3 + sum_i L_i exp((theta + c_i) x)
/// on [a, b], extended linearly with slope -c below a and slope d above b.
///
/// L() returns the coefficients in this origin-based form. Internally the
/// exponentials are anchored at rho (anchored_L()_i = L_i exp((theta+c_i) rho)).
class CandidateValueFunction {
public:
    static CandidateValueFunction from_L(const ModelParams& model, const CostParams& costs,
                                         const BandPolicy& bands, const std::array<double, 3>& L);
    static CandidateValueFunction from_anchored_L(const ModelParams& model, const CostParams& costs,
                                                  const BandPolicy& bands,
                                                  const std::array<double, 3>& anchored);

    const ModelParams& model() const noexcept { return model_; }
    const CostParams& costs() const noexcept { return costs_; }
    const BandPolicy& bands() const noexcept { return bands_; }
    const ParticularCoefficients& K() const noexcept { return K_; }
    const std::array<double, 3>& c() const noexcept { return roots_; }
    const std::array<double, 3>& exponents() const noexcept { return exponents_; }
    const std::array<double, 3>& L() const noexcept { return L_; }
    const std::array<double, 3>& anchored_L() const noexcept { return anchored_; }

    /// Tail integral zeta = int_b^inf [f(b) + d (z-b)] theta e^{-theta z} dz, in closed form.
    double zeta() const;

    /// The smooth formula f and its derivatives (order 0..4) at any x.
    double f(double x, int order = 0) const;
    /// Piecewise h; order 2 and above are those of the active piece.
    double h(double x, int order = 0) const;

    /// Points in [a, b] where f' = -c (candidates for an upward reset target)
    /// and where f' = d (candidates for a downward reset target).
    const std::vector<double>& up_targets() const noexcept { return up_targets_; }
    const std::vector<double>& down_targets() const noexcept { return down_targets_; }

private:
    CandidateValueFunction() = default;
    void finish();

    ModelParams model_;
    CostParams costs_;
    BandPolicy bands_;
    ParticularCoefficients K_;
    std::array<double, 3> roots_{};
    std::array<double, 3> exponents_{};
    std::array<double, 3> L_{};
    std::array<double, 3> anchored_{};
    std::vector<double> up_targets_;
    std::vector<double> down_targets_;
};

/// h or its first/second derivative. Throws SecondDerivativeAtKink for order 2 at a or b.
double eval_candidate(const CandidateValueFunction& cand, double x, int order);

/// Mh(x) = inf over eta != 0 of h(x + eta) + g(eta).
double apply_M(const CandidateValueFunction& cand, double x);

/// sigma^2/2 h''(x) + jump_rate * int_0^inf [h(x+y) - h(x)] theta e^{-theta y} dy.
/// The integral over the part of the jump range landing in [a, b] uses adaptive
/// Gauss-Kronrod quadrature; the linear pieces are integrated in closed form.
double apply_generator(const CandidateValueFunction& cand, double x);

/// The same operator for an arbitrary function h with h''(x) = h2_at_x, the
/// jump integral taken by Gauss-Kronrod quadrature over [0, inf).
double apply_generator(const ModelParams& model, const std::function<double(double)>& h, double h2_at_x, double x);

/// A h - lambda h + phi at x (x outside {a, b}).
double qvi_residual(const CandidateValueFunction& cand, double x);

using SevenVector = std::array<double, 7>;

/// Residuals of the smooth-pasting, matching and boundary equations for
/// z = (a, alpha, beta, b, L1, L2, L3) with L in origin-based form.
SevenVector residual_seven(const SevenVector& z, const ModelParams& model, const CostParams& costs);

struct CheckResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;      // worst violation found (0 when none)
    double location = 0.0;   // where it occurred
    double tolerance = 0.0;  // absolute threshold applied
};

struct VerificationReport {
    std::vector<CheckResult> checks;

    bool all_passed() const;
    const CheckResult* find(const std::string& name) const;
};

struct GridConfig {
    int interior_points = 1000;
    int exterior_points = 400;
    double tol_eq = 1e-6;
    double tol_ineq = 1e-6;
    /// Exterior grids extend this many mean jump sizes beyond a and b.
    double exterior_extent = 10.0;
};

/// Numerically checks the optimality conditions for the candidate. Check names:
/// qvi_equality, no_early_intervention, qvi_inequality, boundary_matching,
/// linear_extension, sign_conditions, ordering, derivative_shape.
VerificationReport verify_conditions(const CandidateValueFunction& cand, const GridConfig& grid = {});

enum class SolveStatus { Certified, VerificationFailed, NoConvergence };

std::string_view to_string(SolveStatus status);

struct SolveDiagnostics {
    int iterations = 0;
    double residual_inf = 0.0;
    SevenVector residuals{};
    bool alpha_equals_beta = false;
    bool used_nested_fallback = false;
    int starts_tried = 0;
    std::string message;
};

struct SolveResult {
    SolveStatus status = SolveStatus::NoConvergence;
    std::optional<CandidateValueFunction> cand;  // best iterate, present unless no iterate was ever valid
    VerificationReport report;
    SolveDiagnostics diagnostics;

    bool certified() const { return status == SolveStatus::Certified; }
};

struct SolverOptions {
    double residual_tol = 1e-9;
    int max_iterations = 200;
    GridConfig grid;
};

/// Solves the seven equations for (a, alpha, beta, b, L1, L2, L3) by damped
/// Newton in ordered coordinates (alpha - a, beta - alpha, b - beta are kept
/// positive through a log parametrization), then verifies the result. When
/// c == d == 0 the optimal bands have alpha == beta and the reduced six-equation
/// system is solved instead.
SolveResult solve_bands(const ModelParams& model, const CostParams& costs,
                        const std::optional<SevenVector>& init = std::nullopt,
                        const SolverOptions& options = {});

/// The default starting point used when no init is given.
SevenVector initial_guess(const ModelParams& model, const CostParams& costs);

}  // namespace levyband
