#pragma once

#include <string>
#include <vector>

#include "qcdirac/phase_space.hpp"

namespace qcdirac {

/// A configuration-space constraint sigma(R) = 0 with its derivatives.
/// `hessian` may be left empty; a central difference of `grad` is used then,
/// which costs accuracy (roughly 1e-7 relative) and 2N gradient calls.
struct HolonomicConstraint {
    std::string name;
    std::function<double(const Vector&)> sigma;
    std::function<Vector(const Vector&)> grad;
    std::function<Matrix(const Vector&)> hessian;

    Matrix hessian_at(const Vector& R) const;
};

/// sigma, its gradients (rows of G, l x N) and Hessians at one configuration.
struct ConstraintGeometry {
    Vector sigma;
    Matrix G;
    std::vector<Matrix> hessians;
};

/// Reciprocal condition number below which Z counts as singular.
inline constexpr double kZConditionFloor = 1e-12;

class ConstraintSet {
public:
    ConstraintSet() = default;
    ConstraintSet(std::vector<HolonomicConstraint> constraints, Vector masses);

    /// An empty (l = 0) set over N degrees of freedom.
    static ConstraintSet unconstrained(Vector masses) { return {{}, std::move(masses)}; }

    int size() const noexcept { return static_cast<int>(constraints_.size()); }
    bool empty() const noexcept { return constraints_.empty(); }
    Eigen::Index dofs() const noexcept { return masses_.size(); }
    const Vector& masses() const noexcept { return masses_; }
    const HolonomicConstraint& operator[](int a) const { return constraints_.at(a); }
    const std::vector<HolonomicConstraint>& constraints() const noexcept { return constraints_; }

    ConstraintGeometry geometry(const Vector& R) const;
    Vector sigma(const Vector& R) const;
    /// All sigma-dot values (G M^-1 P).
    Vector sigma_dot(const PhasePoint& X) const;

private:
    std::vector<HolonomicConstraint> constraints_;
    Vector masses_;
};

struct ConstraintBlocks {
    Matrix Z;
    Matrix Gamma;
};

struct CMatrices {
    Matrix C;
    Matrix Cinv;
};

/// sum_i (d sigma / d R_i) P_i / M_i
double sigma_dot(const HolonomicConstraint& c, const PhasePoint& X);

/// Z_ab = sum_i G_ai G_bi / M_i, Gamma_ab = (G_b/M).H_a.v - (G_a/M).H_b.v with v = P/M.
ConstraintBlocks constraint_blocks(const ConstraintSet& set, const PhasePoint& X);
ConstraintBlocks constraint_blocks(const ConstraintGeometry& geo, const PhasePoint& X);

/// Z = G M^-1 G^T from a precomputed gradient matrix.
Matrix z_matrix(const Matrix& G, const Vector& masses);

/// Throws DegenerateConstraintError when Z is (numerically) singular.
void require_invertible(const Matrix& Z);

/// C = [[0, Z], [-Z, Gamma]] and its block inverse [[Z^-1 Gamma Z^-1, -Z^-1], [Z^-1, 0]].
CMatrices c_matrix_and_inverse(const ConstraintSet& set, const PhasePoint& X);
CMatrices c_matrix_and_inverse(const ConstraintBlocks& blocks);

/// Jacobian d xi / d X of the 2l constraints (sigma, sigma-dot), shape 2l x 2N.
Matrix xi_jacobian(const ConstraintGeometry& geo, const PhasePoint& X);

/// lambda = Z^-1 [ v.H_b.v + (F/M).G_b ] for the force F acting at X.
Vector lagrange_multipliers(const ConstraintSet& set, const PhasePoint& X, const Vector& F);
Vector lagrange_multipliers(const ConstraintGeometry& geo, const PhasePoint& X, const Vector& F);

/// Removes the sigma-dot components: P' = P - G^T Z^-1 G M^-1 P.
Vector project_momenta(const ConstraintGeometry& geo, const PhasePoint& X);
Vector project_momenta(const ConstraintSet& set, const PhasePoint& X);

/// Newton projection R' = R + M^-1 G(R)^T a onto sigma = 0. Returns nullopt when
/// |sigma| does not drop below `tol` within `max_iter` iterations.
std::optional<Vector> project_positions(const ConstraintSet& set, const Vector& R, double tol = 1e-12,
                                        int max_iter = 50);

/// Solves sigma(R + dir a) = 0 for a by Newton iteration; `dir` is N x l.
std::optional<Vector> project_along(const ConstraintSet& set, const Vector& R, const Matrix& dir, double tol = 1e-12,
                                    int max_iter = 50);

}  // namespace qcdirac
