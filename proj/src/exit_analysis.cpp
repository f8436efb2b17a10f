#include "levyband/exit_analysis.hpp"

#include <algorithm>
#include <cmath>

namespace levyband {

namespace {

void require_in_band(double x, const BandPolicy& p, const char* what) {
    if (!(x >= p.a && x <= p.b)) throw Error(ErrorKind::DomainError, std::string(what) + ": point outside [a, b]");
}

void require_interval(const Interval& s) {
    if (!(s.lo <= s.hi)) throw Error(ErrorKind::DomainError, "interval requires lo <= hi");
}

double reset_start(double x, const BandPolicy& p) {
    if (x <= p.a) return p.alpha;
    if (x >= p.b) return p.beta;
    return x;
}

}  // namespace

double potential_density(const ExpMixture& basis, double x, double y, const BandPolicy& p) {
    require_in_band(x, p, "potential_density");
    require_in_band(y, p, "potential_density");
    return basis.W(p.b - x) * basis.W(y - p.a) / basis.W(p.b - p.a) - basis.W(y - x);
}

double potential_mass(const ExpMixture& basis, double x, const Interval& set, const BandPolicy& p) {
    require_in_band(x, p, "potential_mass");
    require_interval(set);
    const double lo = std::max(set.lo, p.a);
    const double hi = std::min(set.hi, p.b);
    if (!(hi > lo)) return 0.0;
    const double ratio = basis.W(p.b - x) / basis.W(p.b - p.a);
    // W vanishes on negative arguments, which integral() honours by clipping at 0.
    return ratio * basis.integral(lo - p.a, hi - p.a) - basis.integral(lo - x, hi - x);
}

ExitProbabilities exit_functionals(const ExpMixture& basis, double x, const BandPolicy& p) {
    require_in_band(x, p, "exit_functionals");
    const double ratio = basis.W(p.b - x) / basis.W(p.b - p.a);
    ExitProbabilities out;
    out.p_down_lt = ratio;
    out.p_up_lt = basis.Z(p.b - x) - basis.Z(p.b - p.a) * ratio;
    return out;
}

double transient_distribution(const ModelParams& model, const BandPolicy& bands, double q, double x,
                              const std::vector<Interval>& sets) {
    if (!(q > 0)) throw Error(ErrorKind::DomainError, "transient_distribution: q must be > 0");
    bands.require_ordered();
    for (const auto& s : sets) require_interval(s);
    const ExpMixture basis = build_scale_basis(model, q);

    auto killed_mass = [&](double z) {
        double acc = 0.0;
        for (const auto& s : sets) acc += potential_mass(basis, z, s, bands);
        return q * acc;
    };
    const double Qa = killed_mass(bands.alpha);
    const double Qb = killed_mass(bands.beta);
    const auto ea = exit_functionals(basis, bands.alpha, bands);
    const auto eb = exit_functionals(basis, bands.beta, bands);

    // E_alpha = Qa + E_alpha p_down(alpha) + E_beta p_up(alpha), and likewise from beta.
    const double det = (1.0 - ea.p_down_lt) * (1.0 - eb.p_up_lt) - ea.p_up_lt * eb.p_down_lt;
    if (!(det > 1e-14)) throw Error(ErrorKind::SingularSystem, "renewal system determinant is not positive");
    const double E_alpha = (Qa * (1.0 - eb.p_up_lt) + Qb * ea.p_up_lt) / det;
    const double E_beta = (Qb * (1.0 - ea.p_down_lt) + Qa * eb.p_down_lt) / det;

    const double x0 = reset_start(x, bands);
    const auto ex = exit_functionals(basis, x0, bands);
    return killed_mass(x0) + E_alpha * ex.p_down_lt + E_beta * ex.p_up_lt;
}

double transient_distribution(const ModelParams& model, const BandPolicy& bands, const TransientQuery& query) {
    return transient_distribution(model, bands, query.q, query.x, std::vector<Interval>{query.interval});
}

StationaryLaw::StationaryLaw(const ModelParams& model, const BandPolicy& bands)
    : bands_(bands), basis_(build_scale_basis(model, 0.0)) {
    bands.require_ordered();
    const auto& p = bands_;
    const double Wba = basis_.W(p.b - p.a);
    const double R_alpha = basis_.W(p.b - p.alpha) / Wba;
    const double R_beta = basis_.W(p.b - p.beta) / Wba;
    // Flow balance of the reset chain: w_alpha (1 - R_alpha) = w_beta R_beta.
    w_alpha_ = R_beta;
    w_beta_ = 1.0 - R_alpha;
    K_ = R_beta * basis_.integral(p.b - p.alpha, p.b - p.a) - w_beta_ * basis_.integral(0.0, p.b - p.beta);
    if (!(K_ > 1e-14) || !std::isfinite(K_)) {
        throw Error(ErrorKind::DegenerateChain, "stationary normalizer is not positive");
    }
}

double StationaryLaw::numerator(const Interval& set) const {
    return w_alpha_ * potential_mass(basis_, bands_.alpha, set, bands_) +
           w_beta_ * potential_mass(basis_, bands_.beta, set, bands_);
}

double StationaryLaw::probability(const Interval& set) const { return numerator(set) / K_; }

double StationaryLaw::density(double y) const {
    if (y < bands_.a || y > bands_.b) return 0.0;
    return (w_alpha_ * potential_density(basis_, bands_.alpha, y, bands_) +
            w_beta_ * potential_density(basis_, bands_.beta, y, bands_)) /
           K_;
}

double StationaryLaw::cdf(double y) const {
    if (y <= bands_.a) return 0.0;
    if (y >= bands_.b) return 1.0;
    return probability({bands_.a, y});
}

double stationary_measure(const ModelParams& model, const BandPolicy& bands, const Interval& set) {
    return StationaryLaw(model, bands).probability(set);
}

double expected_exit_time(const ExpMixture& basis_q0, double x, const BandPolicy& bands) {
    if (basis_q0.q() != 0.0) throw Error(ErrorKind::DomainError, "expected_exit_time needs the q = 0 basis");
    return potential_mass(basis_q0, x, {bands.a, bands.b}, bands);
}

}  // namespace levyband
