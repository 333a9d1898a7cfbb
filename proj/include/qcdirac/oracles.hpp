#pragma once

#include <vector>

#include "qcdirac/constraints.hpp"
#include "qcdirac/phase_space.hpp"
#include "qcdirac/rng.hpp"

namespace qcdirac {

/// sum_t c_t prod_i x_i^{e_it} over the stacked phase vector, with exact gradient.
/// Used as a source of arbitrary smooth test functions.
struct Polynomial {
    std::vector<double> coeffs;
    std::vector<std::vector<int>> powers;  // one exponent vector of length 2N per term

    double value(const Vector& x) const;
    Vector gradient(const Vector& x) const;

    ScalarPhaseFunction function() const;

    /// `terms` monomials of total degree <= max_degree in `dim` variables, coefficients in [-1, 1].
    static Polynomial random(CounterRng& rng, Eigen::Index dim, int terms = 4, int max_degree = 3);
};

/// Hermitian n x n matrix function with polynomial entries (real symmetric part plus
/// antisymmetric imaginary part) and exact gradients.
struct PolynomialMatrix {
    int n = 1;
    std::vector<Polynomial> re;  // upper triangle incl. diagonal, row-major
    std::vector<Polynomial> im;  // strict upper triangle

    MatrixPhaseFunction function() const;
    static PolynomialMatrix random(CounterRng& rng, Eigen::Index dim, int n, int terms = 3, int max_degree = 2);
};

/// f(xi) I_n for a polynomial f in the 2l variables xi = (sigma, sigma_dot); gradient by the chain rule.
MatrixPhaseFunction constraint_function(const ConstraintSet& set, const Polynomial& f, int n);

}  // namespace qcdirac
