#pragma once

#include <string>
#include <vector>

#include "levyband/error.hpp"

namespace levyband {

/// Uncontrolled dynamics Y_t = x + mu t + sigma w_t + N_t, where N is compound
/// Poisson with arrival rate jump_rate and Exp(jump_scale) jump sizes, plus the
/// discount rate and the target of the quadratic opportunity cost.
struct ModelParams {
    double mu = 0.0;
    double sigma = 0.0;
    double jump_rate = 1.0;
    double jump_scale = 1.0;
    double discount = 1.0;
    double target = 0.0;

    double mean_jump() const { return 1.0 / jump_scale; }
    /// E[Y_1 - Y_0].
    double mean_increment() const { return mu + jump_rate / jump_scale; }
};

/// Fixed and proportional costs for pushing cash up (C, c) and down (D, d).
struct CostParams {
    double fixed_up = 1.0;
    double prop_up = 0.0;
    double fixed_down = 1.0;
    double prop_down = 0.0;
};

struct Violation {
    ErrorKind kind;
    std::string detail;
};

/// Thrown by validate_model; carries every violated constraint, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations);

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// A model/cost pair that satisfied the standing assumptions at construction.
class ValidatedModel {
public:
    const ModelParams& model() const noexcept { return model_; }
    const CostParams& costs() const noexcept { return costs_; }

private:
    friend ValidatedModel validate_model(const ModelParams&, const CostParams&);
    ValidatedModel(ModelParams m, CostParams c) : model_(m), costs_(c) {}

    ModelParams model_;
    CostParams costs_;
};

/// Returns the list of violated constraints (empty when valid).
std::vector<Violation> check_model(const ModelParams& model, const CostParams& costs);

ValidatedModel validate_model(const ModelParams& model, const CostParams& costs);

/// g(xi): C + c xi for xi > 0, 0 for xi == 0, D - d xi for xi < 0.
double intervention_cost(double xi, const CostParams& costs);

/// phi(x) = (x - target)^2.
double opportunity_cost(double x, const ModelParams& model);

/// psi(s) = log E_0[exp(s Y_1)] = mu s + sigma^2 s^2 / 2 + jump_rate s / (jump_scale - s),
/// finite only for s < jump_scale.
double laplace_exponent(double s, const ModelParams& model);

}  // namespace levyband
