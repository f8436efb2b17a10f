#include "levyband/band_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

namespace levyband {

void BandPolicy::require_ordered() const {
    if (!is_ordered()) {
        throw Error(ErrorKind::OrderingViolation, "band policy must satisfy a < alpha <= beta < b");
    }
}

void require_solvable_model(const ModelParams& m) {
    if (!(m.sigma > 0)) throw Error(ErrorKind::UnsupportedModel, "band solver requires sigma > 0");
    if (m.jump_rate != 1.0) throw Error(ErrorKind::UnsupportedModel, "band solver requires jump_rate == 1");
    if (m.mu != 0.0) throw Error(ErrorKind::UnsupportedModel, "band solver requires mu == 0");
    if (!(m.jump_scale > 0)) throw Error(ErrorKind::NonPositiveJumpScale, "jump_scale must be > 0");
    if (!(m.discount > 0)) throw Error(ErrorKind::NonPositiveDiscount, "discount must be > 0");
}

ParticularCoefficients particular_coefficients(const ModelParams& m) {
    const double lam = m.discount;
    const double th = m.jump_scale;
    const double s2 = m.sigma * m.sigma;
    return {1.0 / lam, 2.0 / (th * lam * lam), (2.0 * lam + 2.0 + th * th * lam * s2) / (lam * lam * lam * th * th)};
}

Polynomial characteristic_polynomial(const ModelParams& m) {
    const double s2 = m.sigma * m.sigma;
    const double th = m.jump_scale;
    return Polynomial({-th, 0.5 * s2 * th * th - m.discount - 1.0, s2 * th, 0.5 * s2});
}

std::array<double, 3> characteristic_roots(const ModelParams& m) {
    require_solvable_model(m);
    const Polynomial P = characteristic_polynomial(m);
    const double th = m.jump_scale;
    // P(0) = -theta < 0 and P(-theta) = theta*lambda > 0 pin one root in each bracket.
    if (!(P(0.0) < 0.0) || !(P(-th) > 0.0)) {
        throw Error(ErrorKind::BracketFailure, "characteristic cubic lost its sign pattern");
    }
    const auto roots = real_roots(P);
    if (roots.size() != 3 || !(roots[0] < -th && -th < roots[1] && roots[1] < 0.0 && 0.0 < roots[2])) {
        throw Error(ErrorKind::BracketFailure, "characteristic roots not separated by -theta and 0");
    }
    return {roots[0], roots[1], roots[2]};
}

namespace {

// The smooth part f of a candidate with exponentials anchored at rho.
struct SmoothF {
    ParticularCoefficients K;
    std::array<double, 3> k{};
    std::array<double, 3> A{};
    double rho = 0.0;

    double operator()(double x, int order = 0) const {
        const double u = x - rho;
        double base = 0.0;
        switch (order) {
            case 0: base = (K.K1 * u + K.K2) * u + K.K3; break;
            case 1: base = 2.0 * K.K1 * u + K.K2; break;
            case 2: base = 2.0 * K.K1; break;
            default: break;
        }
        double acc = base;
        for (int i = 0; i < 3; ++i) acc += A[i] * std::pow(k[i], order) * std::exp(k[i] * u);
        return acc;
    }
    // d f^{(order)}(x) / d A_i
    double dA(int i, double x, int order) const { return std::pow(k[i], order) * std::exp(k[i] * (x - rho)); }
};

SmoothF make_smooth(const ModelParams& m, const std::array<double, 3>& anchored) {
    SmoothF f;
    f.K = particular_coefficients(m);
    const auto c = characteristic_roots(m);
    for (int i = 0; i < 3; ++i) f.k[i] = m.jump_scale + c[i];
    f.A = anchored;
    f.rho = m.target;
    return f;
}

SevenVector seven_residuals(const SmoothF& f, const BandPolicy& p, const ModelParams& m, const CostParams& k) {
    const double s2 = m.sigma * m.sigma;
    const double lam = m.discount;
    const double th = m.jump_scale;
    const double fb = f(p.b);
    // e^{theta b} zeta = f(b) + d/theta
    const double tail = fb + k.prop_down / th;
    return {f(p.a, 1) + k.prop_up,
            f(p.alpha, 1) + k.prop_up,
            f(p.b, 1) - k.prop_down,
            f(p.beta, 1) - k.prop_down,
            f(p.a) - f(p.alpha) - k.fixed_up - k.prop_up * (p.alpha - p.a),
            fb - f(p.beta) - k.fixed_down - k.prop_down * (p.b - p.beta),
            0.5 * s2 * f(p.b, 2) + (p.b - m.target) * (p.b - m.target) - (1.0 + lam) * fb + tail};
}

// Rows of the Jacobian of seven_residuals with respect to (a, alpha, beta, b, A1, A2, A3).
Eigen::Matrix<double, 7, 7> seven_jacobian(const SmoothF& f, const BandPolicy& p, const ModelParams& m,
                                           const CostParams& k) {
    Eigen::Matrix<double, 7, 7> J = Eigen::Matrix<double, 7, 7>::Zero();
    const double s2 = m.sigma * m.sigma;
    const double lam = m.discount;
    J(0, 0) = f(p.a, 2);
    J(1, 1) = f(p.alpha, 2);
    J(2, 3) = f(p.b, 2);
    J(3, 2) = f(p.beta, 2);
    J(4, 0) = f(p.a, 1) + k.prop_up;
    J(4, 1) = -f(p.alpha, 1) - k.prop_up;
    J(5, 3) = f(p.b, 1) - k.prop_down;
    J(5, 2) = -f(p.beta, 1) + k.prop_down;
    J(6, 3) = 0.5 * s2 * f(p.b, 3) + 2.0 * (p.b - m.target) - lam * f(p.b, 1);
    for (int i = 0; i < 3; ++i) {
        J(0, 4 + i) = f.dA(i, p.a, 1);
        J(1, 4 + i) = f.dA(i, p.alpha, 1);
        J(2, 4 + i) = f.dA(i, p.b, 1);
        J(3, 4 + i) = f.dA(i, p.beta, 1);
        J(4, 4 + i) = f.dA(i, p.a, 0) - f.dA(i, p.alpha, 0);
        J(5, 4 + i) = f.dA(i, p.b, 0) - f.dA(i, p.beta, 0);
        J(6, 4 + i) = 0.5 * s2 * f.dA(i, p.b, 2) - lam * f.dA(i, p.b, 0);
    }
    return J;
}

// Solve the (linear in A) equations f'(a) = -c, f'(b) = d and the x = b
// equation for the anchored coefficients at fixed bands.
std::optional<std::array<double, 3>> linear_subsystem(SmoothF f, const BandPolicy& p, const ModelParams& m,
                                                      const CostParams& k) {
    f.A = {0.0, 0.0, 0.0};
    const SevenVector r0 = seven_residuals(f, p, m, k);
    const auto J = seven_jacobian(f, p, m, k);
    const int rows[3] = {0, 2, 6};
    Eigen::Matrix3d M;
    Eigen::Vector3d rhs;
    for (int r = 0; r < 3; ++r) {
        for (int i = 0; i < 3; ++i) M(r, i) = J(rows[r], 4 + i);
        rhs(r) = -r0[static_cast<std::size_t>(rows[r])];
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::Vector3d A = lu.solve(rhs);
    if (!A.allFinite()) return std::nullopt;
    return std::array<double, 3>{A(0), A(1), A(2)};
}

double inf_norm(const SevenVector& r) {
    double m = 0.0;
    for (double v : r) m = std::max(m, std::isfinite(v) ? std::abs(v) : std::numeric_limits<double>::infinity());
    return m;
}

std::vector<double> level_crossings(const SmoothF& f, double lo, double hi, double level) {
    constexpr int kSamples = 512;
    std::vector<double> out;
    auto g = [&](double x) { return f(x, 1) - level; };
    double x0 = lo;
    double g0 = g(x0);
    if (g0 == 0.0) out.push_back(x0);
    for (int i = 1; i <= kSamples; ++i) {
        const double x1 = lo + (hi - lo) * i / kSamples;
        const double g1 = g(x1);
        if (g1 == 0.0) {
            out.push_back(x1);
        } else if ((g0 < 0) != (g1 < 0) && g0 != 0.0) {
            double l = x0, r = x1, gl = g0;
            for (int it = 0; it < 100 && r - l > 1e-15 * std::max(1.0, std::abs(l)); ++it) {
                const double mid = 0.5 * (l + r);
                const double gm = g(mid);
                if ((gm < 0) == (gl < 0)) {
                    l = mid;
                    gl = gm;
                } else {
                    r = mid;
                }
            }
            out.push_back(0.5 * (l + r));
        }
        x0 = x1;
        g0 = g1;
    }
    return out;
}

}  // namespace

CandidateValueFunction CandidateValueFunction::from_L(const ModelParams& model, const CostParams& costs,
                                                      const BandPolicy& bands, const std::array<double, 3>& L) {
    CandidateValueFunction cand;
    cand.model_ = model;
    cand.costs_ = costs;
    cand.bands_ = bands;
    cand.L_ = L;
    cand.finish();
    for (int i = 0; i < 3; ++i) cand.anchored_[i] = L[i] * std::exp(cand.exponents_[i] * model.target);
    cand.up_targets_.clear();
    cand.down_targets_.clear();
    const SmoothF f{cand.K_, cand.exponents_, cand.anchored_, model.target};
    cand.up_targets_ = level_crossings(f, bands.a, bands.b, -costs.prop_up);
    cand.down_targets_ = level_crossings(f, bands.a, bands.b, costs.prop_down);
    return cand;
}

CandidateValueFunction CandidateValueFunction::from_anchored_L(const ModelParams& model, const CostParams& costs,
                                                               const BandPolicy& bands,
                                                               const std::array<double, 3>& anchored) {
    std::array<double, 3> L{};
    const auto c = characteristic_roots(model);
    for (int i = 0; i < 3; ++i) L[i] = anchored[i] * std::exp(-(model.jump_scale + c[i]) * model.target);
    return from_L(model, costs, bands, L);
}

void CandidateValueFunction::finish() {
    require_solvable_model(model_);
    K_ = particular_coefficients(model_);
    roots_ = characteristic_roots(model_);
    for (int i = 0; i < 3; ++i) exponents_[i] = model_.jump_scale + roots_[i];
}

double CandidateValueFunction::f(double x, int order) const {
    const SmoothF sf{K_, exponents_, anchored_, model_.target};
    return sf(x, order);
}

double CandidateValueFunction::zeta() const {
    const double th = model_.jump_scale;
    return std::exp(-th * bands_.b) * (f(bands_.b) + costs_.prop_down / th);
}

double CandidateValueFunction::h(double x, int order) const {
    if (x < bands_.a) {
        if (order == 0) return f(bands_.a) - costs_.prop_up * (x - bands_.a);
        return order == 1 ? -costs_.prop_up : 0.0;
    }
    if (x > bands_.b) {
        if (order == 0) return f(bands_.b) + costs_.prop_down * (x - bands_.b);
        return order == 1 ? costs_.prop_down : 0.0;
    }
    return f(x, order);
}

double eval_candidate(const CandidateValueFunction& cand, double x, int order) {
    if (order < 0 || order > 2) throw Error(ErrorKind::DomainError, "eval_candidate: order must be 0, 1 or 2");
    if (order == 2 && (x == cand.bands().a || x == cand.bands().b)) {
        throw Error(ErrorKind::SecondDerivativeAtKink, "h'' is not defined at a or b");
    }
    return cand.h(x, order);
}

double apply_M(const CandidateValueFunction& cand, double x) {
    const auto& p = cand.bands();
    const auto& k = cand.costs();
    // Upward: C + inf_{y > x} [h(y) + c (y - x)]. The infimum over the open set
    // includes the limit y -> x.
    double best_up = cand.h(x) + k.fixed_up;
    auto try_up = [&](double y) {
        if (y > x) best_up = std::min(best_up, cand.h(y) + k.prop_up * (y - x) + k.fixed_up);
    };
    try_up(p.a);
    try_up(p.b);
    for (double y : cand.up_targets()) try_up(y);

    // Downward: D + inf_{y < x} [h(y) + d (x - y)].
    double best_down = cand.h(x) + k.fixed_down;
    auto try_down = [&](double y) {
        if (y < x) best_down = std::min(best_down, cand.h(y) + k.prop_down * (x - y) + k.fixed_down);
    };
    try_down(p.a);
    try_down(p.b);
    for (double y : cand.down_targets()) try_down(y);
    return std::min(best_up, best_down);
}

double apply_generator(const CandidateValueFunction& cand, double x) {
    const auto& p = cand.bands();
    const auto& m = cand.model();
    const auto& k = cand.costs();
    if (x == p.a || x == p.b) throw Error(ErrorKind::SecondDerivativeAtKink, "generator undefined at a or b");
    const double th = m.jump_scale;
    const double hx = cand.h(x);

    double integral = 0.0;
    if (x > p.b) {
        integral = k.prop_down / th;
    } else {
        // Jumps landing below a (only when x < a): h(x+y) - h(x) = -c y.
        double lo = 0.0;
        if (x < p.a) {
            const double A = p.a - x;
            integral += -k.prop_up * (-std::expm1(-th * A) - th * A * std::exp(-th * A)) / th;
            lo = A;
        }
        const double B = p.b - x;
        auto integrand = [&](double y) { return (cand.f(x + y) - hx) * th * std::exp(-th * y); };
        integral += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, B, 6, 1e-12);
        // Jumps landing above b: h(x+y) = h(b) + d (x + y - b).
        integral += std::exp(-th * B) * (cand.h(p.b) - hx + k.prop_down / th);
    }
    return 0.5 * m.sigma * m.sigma * cand.h(x, 2) + m.jump_rate * integral;
}

double apply_generator(const ModelParams& m, const std::function<double(double)>& h, double h2_at_x, double x) {
    const double th = m.jump_scale;
    const double hx = h(x);
    auto integrand = [&](double y) { return (h(x + y) - hx) * th * std::exp(-th * y); };
    const double inf = std::numeric_limits<double>::infinity();
    const double integral =
        m.jump_rate > 0 ? boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, inf, 10, 1e-12)
                        : 0.0;
    return 0.5 * m.sigma * m.sigma * h2_at_x + m.jump_rate * integral;
}

double qvi_residual(const CandidateValueFunction& cand, double x) {
    return apply_generator(cand, x) - cand.model().discount * cand.h(x) + opportunity_cost(x, cand.model());
}

SevenVector residual_seven(const SevenVector& z, const ModelParams& model, const CostParams& costs) {
    require_solvable_model(model);
    SmoothF f = make_smooth(model, {0, 0, 0});
    for (int i = 0; i < 3; ++i) f.A[i] = z[4 + i] * std::exp(f.k[i] * model.target);
    const BandPolicy p{z[0], z[1], z[2], z[3]};
    return seven_residuals(f, p, model, costs);
}

// ---------------------------------------------------------------------------
// Verification

bool VerificationReport::all_passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const CheckResult* VerificationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

struct Worst {
    double value = 0.0;
    double where = std::numeric_limits<double>::quiet_NaN();
    void update(double v, double x) {
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        if (std::isnan(where) || v > value) {
            value = std::max(value, v);
            where = x;
        }
    }
};

CheckResult make_check(std::string name, const Worst& w, double tol) {
    CheckResult c;
    c.name = std::move(name);
    c.worst = w.value;
    c.location = std::isnan(w.where) ? 0.0 : w.where;
    c.tolerance = tol;
    c.passed = w.value <= tol;
    return c;
}

// Largest value of K'(x) = J e^{theta (x-a)} + lambda c + 2 (x - rho) over x <= x_max < a.
double left_slope_sup(double J, double theta, double a, double lam_c, double rho, double x_max) {
    auto Kp = [&](double x) { return J * std::exp(theta * (x - a)) + lam_c + 2.0 * (x - rho); };
    if (J < 0.0) {
        // K' is concave; its maximizer solves theta J e^{theta (x-a)} = -2.
        const double x_star = a + std::log(-2.0 / (theta * J)) / theta;
        if (x_star < x_max) return Kp(x_star);
    }
    // Otherwise K'' > 0 on the range and the supremum is at the right end.
    return Kp(x_max);
}

}  // namespace

VerificationReport verify_conditions(const CandidateValueFunction& cand, const GridConfig& grid) {
    const auto& p = cand.bands();
    const auto& m = cand.model();
    const auto& k = cand.costs();
    VerificationReport report;

    const bool ordered = p.is_ordered();
    {
        Worst w;
        w.update(std::max({p.a - p.alpha, p.alpha - p.beta, p.beta - p.b, 0.0}), p.a);
        CheckResult c = make_check("ordering", w, 0.0);
        c.passed = ordered;
        report.checks.push_back(c);
    }

    const int n = std::max(grid.interior_points, 2);
    std::vector<double> xs(static_cast<std::size_t>(n));
    double hmax = 0.0;
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] = p.a + (p.b - p.a) * (i + 0.5) / n;
        hmax = std::max(hmax, std::abs(cand.h(xs[static_cast<std::size_t>(i)])));
    }
    hmax = std::max({hmax, std::abs(cand.h(p.a)), std::abs(cand.h(p.b))});
    const double scale = 1.0 + hmax;
    const double tol_eq = grid.tol_eq * scale;
    const double tol_ineq = grid.tol_ineq * scale;

    // (i) A h - lambda h + phi = 0 inside the band.
    {
        Worst w;
        for (double x : xs) w.update(std::abs(qvi_residual(cand, x)), x);
        report.checks.push_back(make_check("qvi_equality", w, tol_eq));
    }
    // (ii) h <= Mh inside the band.
    {
        Worst w;
        for (double x : xs) w.update(cand.h(x) - apply_M(cand, x), x);
        report.checks.push_back(make_check("no_early_intervention", w, tol_eq));
    }
    // (iii) A h - lambda h + phi >= 0 outside [a, b].
    {
        Worst w;
        const double extent = grid.exterior_extent / m.jump_scale;
        const int ne = std::max(grid.exterior_points, 2);
        const double x_left = p.a - extent;
        for (int i = 0; i < ne; ++i) {
            const double xl = x_left + (p.a - x_left) * i / ne;
            w.update(-qvi_residual(cand, xl), xl);
            const double xr = p.b + extent * (i + 1) / ne;
            w.update(-qvi_residual(cand, xr), xr);
        }
        // Right of b the residual is the exact quadratic
        //   d/theta - lambda (h(b) + d (x - b)) + (x - rho)^2, minimized at rho + lambda d / 2.
        const double lam = m.discount;
        const double x_star = std::max(p.b, m.target + 0.5 * lam * k.prop_down);
        const double right_min =
            m.jump_rate * k.prop_down / m.jump_scale - lam * cand.h(x_star) + opportunity_cost(x_star, m);
        w.update(-right_min, x_star);
        // Left of the sampled range: K' = J e^{theta (x - a)} + lambda c + 2 (x - rho) with
        // J = jump_rate * int_0^inf [h'(a+z) + c] theta e^{-theta z} dz; nonpositive K' there
        // means K is bounded below by its value at the grid's left end.
        const double th = m.jump_scale;
        auto integrand = [&](double z) { return (cand.h(p.a + z, 1) + k.prop_up) * th * std::exp(-th * z); };
        const double J =
            m.jump_rate *
            (boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, p.b - p.a, 6, 1e-12) +
             std::exp(-th * (p.b - p.a)) * (k.prop_down + k.prop_up));
        const double sup_slope = left_slope_sup(J, th, p.a, lam * k.prop_up, m.target, x_left);
        w.update(sup_slope, x_left);
        report.checks.push_back(make_check("qvi_inequality", w, tol_ineq));
    }
    // (iv) h(a) = Mh(a) = h(alpha) + C + c (alpha - a) and the mirror at b.
    {
        Worst w;
        const double Ma = apply_M(cand, p.a);
        const double Mb = apply_M(cand, p.b);
        w.update(std::abs(cand.h(p.a) - Ma), p.a);
        w.update(std::abs(Ma - (cand.h(p.alpha) + k.fixed_up + k.prop_up * (p.alpha - p.a))), p.a);
        w.update(std::abs(cand.h(p.b) - Mb), p.b);
        w.update(std::abs(Mb - (cand.h(p.beta) + k.fixed_down + k.prop_down * (p.b - p.beta))), p.b);
        report.checks.push_back(make_check("boundary_matching", w, tol_eq));
    }
    // (v) linear with slope -c below a and d above b, pasted C^1.
    {
        Worst w;
        w.update(std::abs(cand.f(p.a, 1) + k.prop_up), p.a);
        w.update(std::abs(cand.f(p.b, 1) - k.prop_down), p.b);
        w.update(std::abs(cand.h(p.a) - cand.f(p.a)), p.a);
        w.update(std::abs(cand.h(p.b) - cand.f(p.b)), p.b);
        report.checks.push_back(make_check("linear_extension", w, tol_eq));
    }
    // L_i <= 0; worst is the largest coefficient, location its 1-based index.
    {
        CheckResult c;
        c.name = "sign_conditions";
        const auto& L = cand.L();
        const auto it = std::max_element(L.begin(), L.end());
        c.worst = *it;
        c.location = static_cast<double>(it - L.begin() + 1);
        c.tolerance = 0.0;
        c.passed = c.worst <= 0.0;
        report.checks.push_back(c);
    }
    // h' <= -c on [a, alpha], h' >= d on [beta, b], -c <= h' <= d on [alpha, beta],
    // and h''' non-increasing on [a, b] (h' convex then concave).
    {
        Worst w;
        const int ns = n;
        auto sweep = [&](double lo, double hi, auto&& viol) {
            if (!(hi > lo)) return;
            for (int i = 0; i <= ns; ++i) {
                const double x = lo + (hi - lo) * i / ns;
                w.update(viol(cand.f(x, 1)), x);
            }
        };
        sweep(p.a, p.alpha, [&](double d1) { return d1 + k.prop_up; });
        sweep(p.beta, p.b, [&](double d1) { return k.prop_down - d1; });
        sweep(p.alpha, p.beta, [&](double d1) { return std::max(-k.prop_up - d1, d1 - k.prop_down); });
        double prev = cand.f(p.a, 3);
        for (int i = 1; i <= ns; ++i) {
            const double x = p.a + (p.b - p.a) * i / ns;
            const double cur = cand.f(x, 3);
            w.update(cur - prev, x);
            prev = cur;
        }
        report.checks.push_back(make_check("derivative_shape", w, tol_eq));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Solver

std::string_view to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Certified: return "certified";
        case SolveStatus::VerificationFailed: return "verification_failed";
        case SolveStatus::NoConvergence: return "no_convergence";
    }
    return "unknown";
}

namespace {

// Ordered coordinates: y = (a, log(alpha-a), log(beta-alpha), log(b-beta), A1, A2, A3),
// or without the beta-alpha gap when alpha == beta.
class OrderedSystem {
public:
    OrderedSystem(const ModelParams& m, const CostParams& k, bool collapsed)
        : m_(m), k_(k), collapsed_(collapsed), f_(make_smooth(m, {0, 0, 0})) {}

    int dim() const { return collapsed_ ? 6 : 7; }
    int band_dim() const { return collapsed_ ? 3 : 4; }
    bool collapsed() const { return collapsed_; }
    const SmoothF& smooth() const { return f_; }

    BandPolicy bands(const Eigen::VectorXd& y) const {
        BandPolicy p;
        p.a = y(0);
        p.alpha = p.a + std::exp(y(1));
        p.beta = collapsed_ ? p.alpha : p.alpha + std::exp(y(2));
        p.b = p.beta + std::exp(y(collapsed_ ? 2 : 3));
        return p;
    }
    std::array<double, 3> anchored(const Eigen::VectorXd& y) const {
        const int o = band_dim();
        return {y(o), y(o + 1), y(o + 2)};
    }
    Eigen::VectorXd encode(const BandPolicy& p, const std::array<double, 3>& A) const {
        Eigen::VectorXd y(dim());
        y(0) = p.a;
        y(1) = std::log(p.alpha - p.a);
        if (collapsed_) {
            y(2) = std::log(p.b - p.alpha);
        } else {
            y(2) = std::log(p.beta - p.alpha);
            y(3) = std::log(p.b - p.beta);
        }
        const int o = band_dim();
        for (int i = 0; i < 3; ++i) y(o + i) = A[i];
        return y;
    }

    // Residual rows used by this layout (the f'(beta) row duplicates f'(alpha) when collapsed).
    std::vector<int> rows() const {
        if (collapsed_) return {0, 1, 2, 4, 5, 6};
        return {0, 1, 2, 3, 4, 5, 6};
    }

    SevenVector full_residual(const Eigen::VectorXd& y) const {
        SmoothF f = f_;
        f.A = anchored(y);
        return seven_residuals(f, bands(y), m_, k_);
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& y) const {
        const auto r = full_residual(y);
        const auto idx = rows();
        Eigen::VectorXd out(static_cast<int>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<int>(i)) = r[static_cast<std::size_t>(idx[i])];
        return out;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const {
        SmoothF f = f_;
        f.A = anchored(y);
        const BandPolicy p = bands(y);
        const auto Jx = seven_jacobian(f, p, m_, k_);
        // dX/dy, X = (a, alpha, beta, b, A1, A2, A3)
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(7, dim());
        const double e1 = std::exp(y(1));
        T(0, 0) = T(1, 0) = T(2, 0) = T(3, 0) = 1.0;
        T(1, 1) = T(2, 1) = T(3, 1) = e1;
        if (collapsed_) {
            T(3, 2) = std::exp(y(2));
        } else {
            const double e2 = std::exp(y(2));
            T(2, 2) = T(3, 2) = e2;
            T(3, 3) = std::exp(y(3));
        }
        const int o = band_dim();
        for (int i = 0; i < 3; ++i) T(4 + i, o + i) = 1.0;
        const Eigen::MatrixXd full = Jx * T;
        const auto idx = rows();
        Eigen::MatrixXd out(static_cast<int>(idx.size()), dim());
        for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<int>(i)) = full.row(idx[i]);
        return out;
    }

    std::optional<std::array<double, 3>> inner_L(const BandPolicy& p) const { return linear_subsystem(f_, p, m_, k_); }

    const ModelParams& model() const { return m_; }
    const CostParams& costs() const { return k_; }

private:
    ModelParams m_;
    CostParams k_;
    bool collapsed_;
    SmoothF f_;
};

struct NewtonOutcome {
    Eigen::VectorXd y;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

bool finite_vec(const Eigen::VectorXd& v) { return v.allFinite(); }

// Damped Newton with backtracking on ||F||^2. `jac` may be analytic or finite-difference.
template <class Residual, class Jacobian>
NewtonOutcome damped_newton(Eigen::VectorXd y, Residual&& F, Jacobian&& Jf, int band_dim, double target,
                            int max_iter) {
    NewtonOutcome out;
    Eigen::VectorXd r = F(y);
    if (!finite_vec(r)) {
        out.y = y;
        return out;
    }
    double norm = r.lpNorm<Eigen::Infinity>();
    int it = 0;
    for (; it < max_iter && norm > target; ++it) {
        const Eigen::MatrixXd J = Jf(y);
        if (!J.allFinite()) break;
        Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
        if (!finite_vec(step)) break;
        // Keep log-gap moves and the a-move bounded.
        double shrink = 1.0;
        for (int i = 1; i < band_dim; ++i) shrink = std::min(shrink, 2.0 / std::max(2.0, std::abs(step(i))));
        shrink = std::min(shrink, 2.0 / std::max(2.0, std::abs(step(0))));
        step *= shrink;

        const double f0 = r.squaredNorm();
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            const Eigen::VectorXd trial = y + t * step;
            const Eigen::VectorXd rt = F(trial);
            if (finite_vec(rt) && rt.squaredNorm() <= (1.0 - 1e-4 * t) * f0) {
                y = trial;
                r = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        norm = r.lpNorm<Eigen::Infinity>();
    }
    out.y = y;
    out.residual = norm;
    out.iterations = it;
    return out;
}

NewtonOutcome full_newton(const OrderedSystem& sys, const Eigen::VectorXd& y0, int max_iter) {
    return damped_newton(
        y0, [&](const Eigen::VectorXd& y) { return sys.residual(y); },
        [&](const Eigen::VectorXd& y) { return sys.jacobian(y); }, sys.band_dim(), 1e-12, max_iter);
}

// Outer Newton over the band coordinates only; L solved from the linear subsystem.
NewtonOutcome nested_newton(const OrderedSystem& sys, const Eigen::VectorXd& y0, int max_iter) {
    const int nb = sys.band_dim();
    const std::vector<int> outer_rows = sys.collapsed() ? std::vector<int>{1, 4, 5} : std::vector<int>{1, 3, 4, 5};
    auto full_y = [&](const Eigen::VectorXd& yb) -> std::optional<Eigen::VectorXd> {
        Eigen::VectorXd y(sys.dim());
        y.head(nb) = yb;
        y.tail(3).setZero();
        const auto L = sys.inner_L(sys.bands(y));
        if (!L) return std::nullopt;
        for (int i = 0; i < 3; ++i) y(nb + i) = (*L)[i];
        return y;
    };
    auto F = [&](const Eigen::VectorXd& yb) {
        Eigen::VectorXd out(static_cast<int>(outer_rows.size()));
        const auto y = full_y(yb);
        if (!y) {
            out.setConstant(std::numeric_limits<double>::quiet_NaN());
            return out;
        }
        const auto r = sys.full_residual(*y);
        for (std::size_t i = 0; i < outer_rows.size(); ++i) out(static_cast<int>(i)) = r[static_cast<std::size_t>(outer_rows[i])];
        return out;
    };
    auto J = [&](const Eigen::VectorXd& yb) {
        const Eigen::VectorXd r0 = F(yb);
        Eigen::MatrixXd Jm(r0.size(), nb);
        for (int j = 0; j < nb; ++j) {
            const double hstep = 1e-7 * std::max(1.0, std::abs(yb(j)));
            Eigen::VectorXd yp = yb, ym = yb;
            yp(j) += hstep;
            ym(j) -= hstep;
            Jm.col(j) = (F(yp) - F(ym)) / (2.0 * hstep);
        }
        return Jm;
    };
    NewtonOutcome outer = damped_newton(Eigen::VectorXd(y0.head(nb)), F, J, nb, 1e-11, max_iter);
    NewtonOutcome out;
    out.iterations = outer.iterations;
    if (const auto y = full_y(outer.y)) {
        out.y = *y;
        out.residual = sys.residual(*y).lpNorm<Eigen::Infinity>();
    } else {
        out.y = y0;
    }
    return out;
}

std::vector<std::pair<BandPolicy, double>> start_bands(const ModelParams& m, const CostParams& k, bool collapsed) {
    const auto K = particular_coefficients(m);
    const double rho = m.target;
    const double wu = 0.25 * std::sqrt(k.fixed_up / K.K1);
    const double wd = 0.25 * std::sqrt(k.fixed_down / K.K1);
    const double side = std::max(1.0, m.sigma);
    std::vector<std::pair<BandPolicy, double>> out;
    for (double s : {1.0, 0.5, 2.0, 0.25, 4.0}) {
        for (double shift : {0.0, -0.5 / (m.jump_scale * m.discount)}) {
            BandPolicy p;
            const double centre = rho + shift;
            p.alpha = collapsed ? centre : centre - s * wu;
            p.beta = collapsed ? centre : centre + s * wd;
            p.a = p.alpha - s * side;
            p.b = p.beta + s * side + 1.0 / m.jump_scale;
            out.push_back({p, s});
        }
    }
    return out;
}

}  // namespace

SevenVector initial_guess(const ModelParams& m, const CostParams& k) {
    require_solvable_model(m);
    const bool collapsed = k.prop_up == 0.0 && k.prop_down == 0.0;
    const OrderedSystem sys(m, k, collapsed);
    const BandPolicy p = start_bands(m, k, collapsed).front().first;
    const auto A = sys.inner_L(p).value_or(std::array<double, 3>{0, 0, 0});
    SevenVector z{p.a, p.alpha, p.beta, p.b, 0, 0, 0};
    for (int i = 0; i < 3; ++i) z[4 + i] = A[i] * std::exp(-sys.smooth().k[i] * m.target);
    return z;
}

SolveResult solve_bands(const ModelParams& model, const CostParams& costs, const std::optional<SevenVector>& init,
                        const SolverOptions& options) {
    require_solvable_model(model);
    validate_model(model, costs);
    const bool collapsed = costs.prop_up == 0.0 && costs.prop_down == 0.0;
    const OrderedSystem sys(model, costs, collapsed);

    std::vector<Eigen::VectorXd> starts;
    if (init) {
        BandPolicy p{(*init)[0], (*init)[1], (*init)[2], (*init)[3]};
        if (collapsed) p.beta = p.alpha;
        if (p.is_ordered()) {
            std::array<double, 3> A{};
            for (int i = 0; i < 3; ++i) A[i] = (*init)[4 + i] * std::exp(sys.smooth().k[i] * model.target);
            starts.push_back(sys.encode(p, A));
        }
    }
    for (const auto& [p, s] : start_bands(model, costs, collapsed)) {
        (void)s;
        const auto A = sys.inner_L(p);
        if (A) starts.push_back(sys.encode(p, *A));
    }

    SolveResult result;
    result.diagnostics.alpha_equals_beta = collapsed;
    std::optional<SolveResult> fallback;  // converged but not certified
    double best_residual = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_y;

    auto finalize = [&](const Eigen::VectorXd& y, int iterations, bool nested) -> SolveResult {
        SolveResult r;
        const BandPolicy p = sys.bands(y);
        const auto A = sys.anchored(y);
        std::array<double, 3> L{};
        for (int i = 0; i < 3; ++i) L[i] = A[i] * std::exp(-sys.smooth().k[i] * model.target);
        r.cand = CandidateValueFunction::from_L(model, costs, p, L);
        const SevenVector z{p.a, p.alpha, p.beta, p.b, L[0], L[1], L[2]};
        r.diagnostics.residuals = residual_seven(z, model, costs);
        r.diagnostics.residual_inf = inf_norm(r.diagnostics.residuals);
        r.diagnostics.iterations = iterations;
        r.diagnostics.alpha_equals_beta = collapsed;
        r.diagnostics.used_nested_fallback = nested;
        if (r.diagnostics.residual_inf > options.residual_tol) {
            r.status = SolveStatus::NoConvergence;
            return r;
        }
        r.report = verify_conditions(*r.cand, options.grid);
        r.status = r.report.all_passed() ? SolveStatus::Certified : SolveStatus::VerificationFailed;
        return r;
    };

    int tried = 0;
    for (const auto& y0 : starts) {
        ++tried;
        for (bool nested : {false, true}) {
            NewtonOutcome out = nested ? nested_newton(sys, y0, options.max_iterations)
                                       : full_newton(sys, y0, options.max_iterations);
            if (nested && out.residual < 1e-6) {
                // Polish the nested solution in the full coordinates.
                NewtonOutcome polished = full_newton(sys, out.y, options.max_iterations);
                polished.iterations += out.iterations;
                if (polished.residual <= out.residual) out = polished;
            }
            if (out.residual < best_residual && sys.bands(out.y).is_ordered()) {
                best_residual = out.residual;
                best_y = out.y;
            }
            if (out.residual > options.residual_tol) continue;
            SolveResult r = finalize(out.y, out.iterations, nested);
            r.diagnostics.starts_tried = tried;
            if (r.status == SolveStatus::Certified) return r;
            if (r.status == SolveStatus::VerificationFailed && !fallback) fallback = r;
            break;
        }
    }
    if (fallback) {
        fallback->diagnostics.starts_tried = tried;
        fallback->diagnostics.message = "system solved but a verification check failed";
        return *fallback;
    }
    result.status = SolveStatus::NoConvergence;
    result.diagnostics.starts_tried = tried;
    result.diagnostics.message = "no start reached the residual tolerance";
    if (best_y.size() > 0) {
        SolveResult r = finalize(best_y, options.max_iterations, false);
        r.status = SolveStatus::NoConvergence;
        r.diagnostics.starts_tried = tried;
        r.diagnostics.message = result.diagnostics.message;
        return r;
    }
    return result;
}

}  // namespace levyband
