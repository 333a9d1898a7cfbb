#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace qcdirac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using complex = std::complex<double>;

/// A point X = (R, P) of classical phase space together with the mass of each
/// degree of freedom. Masses are per coordinate, not per particle.
class PhasePoint {
public:
    PhasePoint(Vector R, Vector P, Vector masses);

    /// Builds a point from the stacked 2N vector (R, P).
    static PhasePoint from_stacked(const Eigen::Ref<const Vector>& x, const Vector& masses);

    const Vector& R() const noexcept { return R_; }
    const Vector& P() const noexcept { return P_; }
    const Vector& masses() const noexcept { return masses_; }
    Eigen::Index dofs() const noexcept { return R_.size(); }

    /// Stacked 2N vector (R, P).
    Vector stacked() const;
    /// P_i / M_i.
    Vector velocity() const { return P_.cwiseQuotient(masses_); }
    double kinetic_energy() const { return 0.5 * P_.cwiseProduct(P_).cwiseQuotient(masses_).sum(); }

    PhasePoint with_R(Vector R) const { return {std::move(R), P_, masses_}; }
    PhasePoint with_P(Vector P) const { return {R_, std::move(P), masses_}; }

private:
    Vector R_;
    Vector P_;
    Vector masses_;
};

struct PhysicalConstants {
    double hbar = 1.0;
    double beta = 1.0;

    void validate() const;
};

/// Scalar phase-space function a(X) with an optional analytic gradient
/// (length 2N, R components first).
struct ScalarPhaseFunction {
    std::function<double(const PhasePoint&)> value;
    std::function<Vector(const PhasePoint&)> gradient;

    double operator()(const PhasePoint& X) const { return value(X); }
};

/// Hermitian-matrix-valued phase-space function; scalars are the 1x1 case.
/// `gradient` returns the 2N matrices dF/dX_i when supplied analytically.
struct MatrixPhaseFunction {
    int n = 1;
    std::function<CMatrix(const PhasePoint&)> value;
    std::function<std::vector<CMatrix>(const PhasePoint&)> gradient;

    CMatrix operator()(const PhasePoint& X) const { return value(X); }

    static MatrixPhaseFunction from_scalar(const ScalarPhaseFunction& f);
};

/// The 2N x 2N matrix [[0, I], [-I, 0]].
Matrix symplectic_matrix(Eigen::Index N);

/// Default central-difference step for coordinate value x.
double fd_step(double x);

/// Central-difference gradient. With `h` unset each component uses fd_step(X_i).
Vector fd_gradient(const ScalarPhaseFunction& f, const PhasePoint& X, std::optional<double> h = std::nullopt);
std::vector<CMatrix> fd_gradient(const MatrixPhaseFunction& f, const PhasePoint& X,
                                 std::optional<double> h = std::nullopt);

/// Analytic gradient when present, otherwise fd_gradient. Throws EvaluationError on non-finite entries.
Vector gradient_of(const ScalarPhaseFunction& f, const PhasePoint& X);
std::vector<CMatrix> gradient_of(const MatrixPhaseFunction& f, const PhasePoint& X);

/// {a, b} = da/dR . db/dP - da/dP . db/dR
double poisson_bracket(const ScalarPhaseFunction& a, const ScalarPhaseFunction& b, const PhasePoint& X);
double poisson_bracket(const Vector& grad_a, const Vector& grad_b);

}  // namespace qcdirac
