#include "levyband/scale_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace levyband {

namespace {

constexpr double kMergeRelTol = 1e-8;

// Integral of exp(r y) over [lo, hi].
double exp_integral(double r, double lo, double hi) {
    if (r == 0.0) return hi - lo;
    return std::exp(r * lo) * std::expm1(r * (hi - lo)) / r;
}

// Integral of y exp(r y) over [lo, hi].
double xexp_integral(double r, double lo, double hi) {
    const double span = std::max(std::abs(lo), std::abs(hi));
    if (std::abs(r) * span < 1e-3) {
        // Power series; the closed form cancels catastrophically for small r.
        double sum = 0.0;
        double rk_over_fact = 1.0;
        for (int k = 0; k < 10; ++k) {
            const double p = k + 2;
            sum += rk_over_fact * (std::pow(hi, p) - std::pow(lo, p)) / p;
            rk_over_fact *= r / (k + 1);
        }
        return sum;
    }
    auto anti = [r](double y) { return std::exp(r * y) * (y / r - 1.0 / (r * r)); };
    return anti(hi) - anti(lo);
}

}  // namespace

ExpMixture::ExpMixture(double q, std::vector<ExpTerm> terms, bool repeated_pole)
    : q_(q), terms_(std::move(terms)), repeated_pole_(repeated_pole) {}

double ExpMixture::max_rate() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms_) m = std::max(m, t.rate);
    return m;
}

double ExpMixture::W(double x) const {
    if (x < 0) return 0.0;
    double acc = 0.0;
    for (const auto& t : terms_) acc += (t.weight + t.x_weight * x) * std::exp(t.rate * x);
    return acc;
}

double ExpMixture::W_prime(double x) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
        acc += (t.rate * (t.weight + t.x_weight * x) + t.x_weight) * std::exp(t.rate * x);
    }
    return acc;
}

double ExpMixture::integral(double lo, double hi) const {
    lo = std::max(lo, 0.0);
    if (!(hi > lo)) return 0.0;
    double acc = 0.0;
    for (const auto& t : terms_) {
        acc += t.weight * exp_integral(t.rate, lo, hi);
        if (t.x_weight != 0.0) acc += t.x_weight * xexp_integral(t.rate, lo, hi);
    }
    return acc;
}

double ExpMixture::Z(double x) const {
    if (x <= 0) return 1.0;
    return 1.0 + q_ * integral(0.0, x);
}

double ExpMixture::laplace_transform(double s) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
        const double inv = 1.0 / (s - t.rate);
        acc += t.weight * inv + t.x_weight * inv * inv;
    }
    return acc;
}

Polynomial scale_denominator(const ModelParams& m, double q) {
    const double s2 = m.sigma * m.sigma;
    const double th = m.jump_scale;
    // (theta + s)(sigma^2 s^2 / 2 - mu s - q) - eta s
    return Polynomial({-q * th, -m.mu * th - q - m.jump_rate, 0.5 * s2 * th - m.mu, 0.5 * s2});
}

ExpMixture build_scale_basis(const ModelParams& m, double q) {
    if (!(q >= 0)) throw Error(ErrorKind::DomainError, "build_scale_basis: q must be >= 0");
    if (!(m.jump_scale > 0)) throw Error(ErrorKind::NonPositiveJumpScale, "jump_scale must be > 0");
    if (m.sigma < 0 || m.jump_rate < 0) throw Error(ErrorKind::InvalidParameter, "sigma and jump_rate must be >= 0");
    if (m.sigma == 0.0 && m.mu >= 0.0) {
        throw Error(ErrorKind::SubordinatorError,
                    "sigma == 0 with mu >= 0 and upward jumps only is a subordinator");
    }

    const Polynomial den = scale_denominator(m, q);
    std::vector<double> roots = real_roots(den);
    if (q == 0.0) {
        // s = 0 is an exact pole when q == 0.
        auto it = std::min_element(roots.begin(), roots.end(),
                                   [](double a, double b) { return std::abs(a) < std::abs(b); });
        if (std::abs(*it) < 1e-10) *it = 0.0;
    }
    for (double r : roots) {
        if (std::abs(den(r)) > 1e-12 * den.magnitude(r) + 1e-300) {
            throw Error(ErrorKind::RootFindingFailure, "pole residual above tolerance");
        }
    }

    // Group poles closer than the merge tolerance.
    struct Pole {
        double r;
        int mult;
    };
    std::vector<Pole> poles;
    for (double r : roots) {
        if (!poles.empty() && std::abs(r - poles.back().r) <= kMergeRelTol * std::max(1.0, std::abs(r))) {
            auto& p = poles.back();
            p.r = (p.r * p.mult + r) / (p.mult + 1);
            ++p.mult;
        } else {
            poles.push_back({r, 1});
        }
    }

    const double th = m.jump_scale;
    const double lead = den.leading();
    std::vector<ExpTerm> terms;
    bool repeated = false;
    for (std::size_t i = 0; i < poles.size(); ++i) {
        const double r = poles[i].r;
        // M(r) = lead * prod_{j != i} (r - r_j)^{mult_j}, M'(r)/M(r) = sum mult_j / (r - r_j)
        double M = lead;
        double log_deriv = 0.0;
        for (std::size_t j = 0; j < poles.size(); ++j) {
            if (j == i) continue;
            M *= std::pow(r - poles[j].r, poles[j].mult);
            log_deriv += poles[j].mult / (r - poles[j].r);
        }
        if (poles[i].mult == 1) {
            terms.push_back({r, (th + r) / M, 0.0});
        } else if (poles[i].mult == 2) {
            repeated = true;
            const double Mp = M * log_deriv;
            terms.push_back({r, (M - (th + r) * Mp) / (M * M), (th + r) / M});
        } else {
            throw Error(ErrorKind::RootFindingFailure, "pole of multiplicity > 2");
        }
    }
    return ExpMixture(q, std::move(terms), repeated);
}

ScaleValue eval_scale(const ExpMixture& basis, double x) {
    if (x < 0) throw Error(ErrorKind::DomainError, "eval_scale: x must be >= 0");
    return {basis.W(x), basis.Z(x)};
}

double closed_form_w0(double drift, double jump_scale, double x) {
    if (!(drift < 0)) throw Error(ErrorKind::DomainError, "closed_form_w0: drift must be < 0");
    if (!(jump_scale > 0)) throw Error(ErrorKind::NonPositiveJumpScale, "closed_form_w0: jump_scale must be > 0");
    if (x < 0) throw Error(ErrorKind::DomainError, "closed_form_w0: x must be >= 0");
    const double k = jump_scale * drift + 1.0;
    if (std::abs(k) < 1e-8) return -(jump_scale * x + 1.0) / drift;
    const double level = -jump_scale / k;
    return level - (1.0 / drift - jump_scale / k) * std::exp(-k * x / drift);
}

}  // namespace levyband
