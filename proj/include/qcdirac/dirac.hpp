#pragma once

#include "qcdirac/constraints.hpp"
#include "qcdirac/phase_space.hpp"

namespace qcdirac {

/// Evaluates the constrained antisymmetric matrix B^D and the brackets built on it
/// for one constraint set. Stateless between calls, so one engine can serve many
/// trajectories concurrently.
class DiracEngine {
public:
    explicit DiracEngine(ConstraintSet set) : set_(std::move(set)) {}

    const ConstraintSet& constraints() const noexcept { return set_; }
    int size() const noexcept { return set_.size(); }

    /// B^D = B^s - B^s Xi^T C^-1 Xi B^s, with Xi = d xi / dX.
    Matrix b_dirac(const PhasePoint& X) const;

    /// sum_i dB^D_ij / dX_i by central differences of the assembled matrix.
    Vector divergence(const PhasePoint& X) const;

    /// d ln det Z / dR, analytic from constraint Hessians.
    Vector log_det_z_gradient(const Vector& R) const;

private:
    ConstraintSet set_;
};

Matrix b_dirac_matrix(const DiracEngine& engine, const PhasePoint& X);

/// {a, b}_D = grad a . B^D . grad b
double dirac_bracket(const DiracEngine& engine, const ScalarPhaseFunction& a, const ScalarPhaseFunction& b,
                     const PhasePoint& X);

/// {a, b} - sum {a, xi_p} (C^-1)_pq {xi_q, b}; must agree with dirac_bracket.
double dirac_bracket_equiv(const DiracEngine& engine, const ScalarPhaseFunction& a, const ScalarPhaseFunction& b,
                           const PhasePoint& X);

/// Entrywise classical bracket of matrix-valued gradients under a given 2N x 2N matrix:
/// sum_ij dA/dX_i B_ij dC/dX_j (operator products keep their order).
CMatrix matrix_bracket(const std::vector<CMatrix>& grad_a, const Matrix& B, const std::vector<CMatrix>& grad_c);

/// (i/hbar)[H, chi] - (1/2)({H, chi}_D - {chi, H}_D)
CMatrix matrix_dirac_bracket(const DiracEngine& engine, const MatrixPhaseFunction& H, const MatrixPhaseFunction& chi,
                             const PhasePoint& X, double hbar);

/// kappa_0^D = sum_ij (dB^D_ij/dX_i)(dH/dX_j); returns trace / n for matrix H.
double compressibility_kappa0(const DiracEngine& engine, const MatrixPhaseFunction& H, const PhasePoint& X);
double compressibility_kappa0(const DiracEngine& engine, const ScalarPhaseFunction& H, const PhasePoint& X);

/// -d/dt ln det Z along the flow through X, which only needs dR/dt = P/M.
double log_det_z_rate(const DiracEngine& engine, const PhasePoint& X);

/// det Z(X); 1 for an unconstrained system. The invariant measure is exp(-w_D) dX with w_D = -ln det Z.
double measure_weight(const DiracEngine& engine, const PhasePoint& X);

}  // namespace qcdirac
