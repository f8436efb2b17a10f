#include "levyband/model.hpp"

#include <cmath>
#include <sstream>

namespace levyband {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonPositiveFixedCost: return "NonPositiveFixedCost";
        case ErrorKind::NegativeProportionalCost: return "NegativeProportionalCost";
        case ErrorKind::NonPositiveDiscount: return "NonPositiveDiscount";
        case ErrorKind::NonPositiveJumpScale: return "NonPositiveJumpScale";
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::SubordinatorError: return "SubordinatorError";
        case ErrorKind::RootFindingFailure: return "RootFindingFailure";
        case ErrorKind::BracketFailure: return "BracketFailure";
        case ErrorKind::SecondDerivativeAtKink: return "SecondDerivativeAtKink";
        case ErrorKind::OrderingViolation: return "OrderingViolation";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::DegenerateChain: return "DegenerateChain";
        case ErrorKind::UnsupportedModel: return "UnsupportedModel";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

namespace {

std::string join(const std::vector<Violation>& vs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) os << "; ";
        os << to_string(vs[i].kind) << " (" << vs[i].detail << ")";
    }
    return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorKind::InvalidParameter : violations.front().kind,
            join(violations)),
      violations_(std::move(violations)) {}

std::vector<Violation> check_model(const ModelParams& m, const CostParams& k) {
    std::vector<Violation> out;
    auto finite = [&](double v, const char* name) {
        if (!std::isfinite(v)) out.push_back({ErrorKind::InvalidParameter, std::string(name) + " is not finite"});
    };
    finite(m.mu, "mu");
    finite(m.sigma, "sigma");
    finite(m.jump_rate, "jump_rate");
    finite(m.jump_scale, "jump_scale");
    finite(m.discount, "discount");
    finite(m.target, "target");
    finite(k.fixed_up, "C");
    finite(k.prop_up, "c");
    finite(k.fixed_down, "D");
    finite(k.prop_down, "d");

    if (m.sigma < 0) out.push_back({ErrorKind::InvalidParameter, "sigma must be >= 0"});
    if (m.jump_rate < 0) out.push_back({ErrorKind::InvalidParameter, "jump_rate must be >= 0"});
    if (!(m.jump_scale > 0)) out.push_back({ErrorKind::NonPositiveJumpScale, "jump_scale must be > 0"});
    if (!(m.discount > 0)) out.push_back({ErrorKind::NonPositiveDiscount, "discount must be > 0"});
    if (!(k.fixed_up > 0)) out.push_back({ErrorKind::NonPositiveFixedCost, "C must be > 0"});
    if (!(k.fixed_down > 0)) out.push_back({ErrorKind::NonPositiveFixedCost, "D must be > 0"});
    if (k.prop_up < 0) out.push_back({ErrorKind::NegativeProportionalCost, "c must be >= 0"});
    if (k.prop_down < 0) out.push_back({ErrorKind::NegativeProportionalCost, "d must be >= 0"});
    return out;
}

ValidatedModel validate_model(const ModelParams& model, const CostParams& costs) {
    auto violations = check_model(model, costs);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return ValidatedModel(model, costs);
}

double intervention_cost(double xi, const CostParams& costs) {
    if (xi > 0) return costs.fixed_up + costs.prop_up * xi;
    if (xi < 0) return costs.fixed_down - costs.prop_down * xi;
    return 0.0;
}

double opportunity_cost(double x, const ModelParams& model) {
    const double u = x - model.target;
    return u * u;
}

double laplace_exponent(double s, const ModelParams& m) {
    if (!(s < m.jump_scale)) {
        throw Error(ErrorKind::DomainError, "laplace_exponent: s must be below jump_scale");
    }
    return m.mu * s + 0.5 * m.sigma * m.sigma * s * s + m.jump_rate * s / (m.jump_scale - s);
}

}  // namespace levyband
