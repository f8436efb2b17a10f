#pragma once

#include <vector>

#include "levyband/band_solver.hpp"
#include "levyband/model.hpp"
#include "levyband/scale_functions.hpp"

namespace levyband {

/// A closed interval [lo, hi]; sets with lo > hi are rejected, lo == hi is empty.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// u^(q)(x, y) of the process killed on leaving (a, b), for x, y in [a, b].
double potential_density(const ExpMixture& basis, double x, double y, const BandPolicy& bands);

/// Integral of u^(q)(x, .) over the part of `set` inside [a, b], in closed form.
double potential_mass(const ExpMixture& basis, double x, const Interval& set, const BandPolicy& bands);

/// Laplace-killed exit probabilities P_x[e_q >= tau, exit above b] and
/// P_x[e_q >= tau, exit below a], with tau the first exit time from (a, b).
/// Below the barrier the process can only creep, so exit downwards is the
/// first passage of the dual process over b - a and p_down = W(b-x)/W(b-a).
struct ExitProbabilities {
    double p_up_lt = 0.0;
    double p_down_lt = 0.0;
};

ExitProbabilities exit_functionals(const ExpMixture& basis, double x, const BandPolicy& bands);

/// P_x[X(e_q) in set] for the controlled process, e_q ~ Exp(q) independent of X.
struct TransientQuery {
    double q = 1.0;
    double x = 0.0;
    Interval interval;
};

/// Starts at or below a are treated as starts at alpha, at or above b as starts at beta.
double transient_distribution(const ModelParams& model, const BandPolicy& bands, const TransientQuery& query);
/// Same, for a finite union of disjoint intervals.
double transient_distribution(const ModelParams& model, const BandPolicy& bands, double q, double x,
                              const std::vector<Interval>& sets);

/// Limiting law of the controlled process.
class StationaryLaw {
public:
    StationaryLaw(const ModelParams& model, const BandPolicy& bands);

    const BandPolicy& bands() const noexcept { return bands_; }
    double normalizer() const noexcept { return K_; }
    /// Long-run fraction of renewals that reset to alpha (resp. beta), unnormalized.
    double weight_alpha() const noexcept { return w_alpha_; }
    double weight_beta() const noexcept { return w_beta_; }
    const ExpMixture& basis() const noexcept { return basis_; }

    double probability(const Interval& set) const;
    /// Unnormalized mass w_alpha U(alpha, set) + w_beta U(beta, set); equals K for set = [a, b].
    double numerator(const Interval& set) const;
    double density(double y) const;
    double cdf(double y) const;

private:
    BandPolicy bands_;
    ExpMixture basis_;
    double w_alpha_ = 0.0;
    double w_beta_ = 0.0;
    double K_ = 0.0;
};

double stationary_measure(const ModelParams& model, const BandPolicy& bands, const Interval& set);

/// E_x[tau] = integral of u^(0)(x, y) over [a, b]; basis must be built with q = 0.
double expected_exit_time(const ExpMixture& basis_q0, double x, const BandPolicy& bands);

}  // namespace levyband
