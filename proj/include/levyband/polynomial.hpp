#pragma once

#include <complex>
#include <initializer_list>
#include <vector>

namespace levyband {

/// Dense real polynomial, coefficients in ascending powers.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> ascending);
    Polynomial(std::initializer_list<double> ascending) : Polynomial(std::vector<double>(ascending)) {}

    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    double leading() const { return coeffs_.back(); }

    double operator()(double x) const;
    /// k-th derivative at x.
    double derivative(double x, int k = 1) const;
    /// Sum of |c_i| |x|^i; the natural scale for judging a residual p(x).
    double magnitude(double x) const;

private:
    std::vector<double> coeffs_;  // trailing zeros stripped
};

/// All complex roots via eigenvalues of the companion matrix.
std::vector<std::complex<double>> companion_roots(const Polynomial& p);

/// Newton refinement of an approximate real root; stops when
/// |p(x)| <= tol * p.magnitude(x) or the step stalls.
double polish_root(const Polynomial& p, double x, double tol = 1e-14, int max_iter = 60);

/// Real roots (ascending, polished). Throws RootFindingFailure when a root has
/// an imaginary part above imag_tol relative to its modulus.
std::vector<double> real_roots(const Polynomial& p, double imag_tol = 1e-7);

/// Plain bisection on a sign-changing bracket.
double bisect_root(const Polynomial& p, double lo, double hi, double xtol = 1e-15);

}  // namespace levyband
