#include "levyband/polynomial.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "levyband/error.hpp"

namespace levyband {

Polynomial::Polynomial(std::vector<double> ascending) : coeffs_(std::move(ascending)) {
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
    if (coeffs_.empty()) coeffs_.push_back(0.0);
}

double Polynomial::operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

double Polynomial::derivative(double x, int k) const {
    double acc = 0.0;
    for (int i = degree(); i >= k; --i) {
        double falling = 1.0;
        for (int j = 0; j < k; ++j) falling *= static_cast<double>(i - j);
        acc = acc * x + falling * coeffs_[static_cast<std::size_t>(i)];
    }
    return acc;
}

double Polynomial::magnitude(double x) const {
    double acc = 0.0;
    const double ax = std::abs(x);
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * ax + std::abs(*it);
    return acc;
}

std::vector<std::complex<double>> companion_roots(const Polynomial& p) {
    const int n = p.degree();
    if (n < 1) return {};
    if (n == 1) return {std::complex<double>(-p.coeffs()[0] / p.coeffs()[1], 0.0)};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) companion(i, n - 1) = -p.coeffs()[static_cast<std::size_t>(i)] / p.leading();

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::RootFindingFailure, "companion eigenvalue iteration did not converge");
    }
    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
    return roots;
}

double polish_root(const Polynomial& p, double x, double tol, int max_iter) {
    for (int it = 0; it < max_iter; ++it) {
        const double fx = p(x);
        if (std::abs(fx) <= tol * p.magnitude(x)) break;
        const double dfx = p.derivative(x);
        if (dfx == 0.0) break;
        const double step = fx / dfx;
        const double next = x - step;
        // Accept only steps that do not increase the residual (guards double roots).
        if (std::abs(p(next)) > std::abs(fx)) break;
        x = next;
        if (std::abs(step) <= 1e-17 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

std::vector<double> real_roots(const Polynomial& p, double imag_tol) {
    std::vector<double> out;
    for (const auto& z : companion_roots(p)) {
        if (std::abs(z.imag()) > imag_tol * std::max(1.0, std::abs(z))) {
            throw Error(ErrorKind::RootFindingFailure, "polynomial has a non-real root");
        }
        out.push_back(polish_root(p, z.real()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

double bisect_root(const Polynomial& p, double lo, double hi, double xtol) {
    double flo = p(lo);
    const double fhi = p(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw Error(ErrorKind::BracketFailure, "bisect_root: no sign change");
    for (int it = 0; it < 400 && hi - lo > xtol * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = p(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace levyband
