#include "qcdirac/constraints.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "qcdirac/errors.hpp"

namespace qcdirac {

Matrix HolonomicConstraint::hessian_at(const Vector& R) const {
    if (hessian) return hessian(R);
    const Eigen::Index N = R.size();
    Matrix H(N, N);
    Vector x = R;
    for (Eigen::Index k = 0; k < N; ++k) {
        const double step = fd_step(R[k]);
        x[k] = R[k] + step;
        const Vector gp = grad(x);
        x[k] = R[k] - step;
        const Vector gm = grad(x);
        x[k] = R[k];
        H.col(k) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (H + H.transpose());
}

ConstraintSet::ConstraintSet(std::vector<HolonomicConstraint> constraints, Vector masses)
    : constraints_(std::move(constraints)), masses_(std::move(masses)) {
    if (masses_.size() == 0) throw DimensionError("constraint set needs at least one degree of freedom");
    for (Eigen::Index i = 0; i < masses_.size(); ++i)
        if (!(masses_[i] > 0.0)) throw InvalidArgument("masses must be positive");
    for (const auto& c : constraints_)
        if (!c.sigma || !c.grad) throw InvalidArgument("constraint '" + c.name + "' lacks sigma or gradient");
}

ConstraintGeometry ConstraintSet::geometry(const Vector& R) const {
    if (R.size() != dofs()) throw DimensionError("configuration length does not match constraint set");
    const int l = size();
    ConstraintGeometry geo;
    geo.sigma.resize(l);
    geo.G.resize(l, dofs());
    geo.hessians.reserve(l);
    for (int a = 0; a < l; ++a) {
        const auto& c = constraints_[a];
        geo.sigma[a] = c.sigma(R);
        const Vector g = c.grad(R);
        if (g.size() != dofs()) throw DimensionError("constraint gradient has wrong length");
        geo.G.row(a) = g.transpose();
        geo.hessians.push_back(c.hessian_at(R));
    }
    return geo;
}

Vector ConstraintSet::sigma(const Vector& R) const {
    Vector s(size());
    for (int a = 0; a < size(); ++a) s[a] = constraints_[a].sigma(R);
    return s;
}

Vector ConstraintSet::sigma_dot(const PhasePoint& X) const {
    Vector s(size());
    const Vector v = X.velocity();
    for (int a = 0; a < size(); ++a) s[a] = constraints_[a].grad(X.R()).dot(v);
    return s;
}

double sigma_dot(const HolonomicConstraint& c, const PhasePoint& X) {
    return c.grad(X.R()).dot(X.velocity());
}

Matrix z_matrix(const Matrix& G, const Vector& masses) {
    return G * masses.cwiseInverse().asDiagonal() * G.transpose();
}

void require_invertible(const Matrix& Z) {
    const Eigen::Index l = Z.rows();
    if (l == 0) return;
    if (!Z.allFinite()) throw DegenerateConstraintError("Z matrix is not finite", 0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Z, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    if (hi > 0.0 && lo / hi >= kZConditionFloor) return;
    int first = 0, second = 0;
    double worst = -1.0;
    for (Eigen::Index a = 0; a < l; ++a) {
        if (!(Z(a, a) > 0.0)) {
            first = second = static_cast<int>(a);
            worst = 2.0;
            break;
        }
        for (Eigen::Index b = a + 1; b < l; ++b) {
            const double corr = std::abs(Z(a, b)) / std::sqrt(Z(a, a) * Z(b, b));
            if (corr > worst) {
                worst = corr;
                first = static_cast<int>(a);
                second = static_cast<int>(b);
            }
        }
    }
    throw DegenerateConstraintError("constraint gradients are degenerate: Z is singular", first, second);
}

ConstraintBlocks constraint_blocks(const ConstraintGeometry& geo, const PhasePoint& X) {
    const Eigen::Index l = geo.G.rows();
    const Vector inv_m = X.masses().cwiseInverse();
    const Vector v = X.velocity();
    ConstraintBlocks out;
    out.Z = z_matrix(geo.G, X.masses());
    require_invertible(out.Z);
    // W(:, a) = H_a v
    Matrix W(X.dofs(), l);
    for (Eigen::Index a = 0; a < l; ++a) W.col(a) = geo.hessians[a] * v;
    // Gamma_ab = sum_i (G_bi / M_i) (H_a v)_i - (G_ai / M_i) (H_b v)_i
    const Matrix A = geo.G * inv_m.asDiagonal() * W;  // A(b, a) = (G_b / M) . H_a v
    out.Gamma = A.transpose() - A;
    return out;
}

ConstraintBlocks constraint_blocks(const ConstraintSet& set, const PhasePoint& X) {
    return constraint_blocks(set.geometry(X.R()), X);
}

CMatrices c_matrix_and_inverse(const ConstraintBlocks& b) {
    const Eigen::Index l = b.Z.rows();
    CMatrices out;
    out.C = Matrix::Zero(2 * l, 2 * l);
    out.Cinv = Matrix::Zero(2 * l, 2 * l);
    if (l == 0) return out;
    out.C.topRightCorner(l, l) = b.Z;
    out.C.bottomLeftCorner(l, l) = -b.Z;
    out.C.bottomRightCorner(l, l) = b.Gamma;
    const Matrix Zinv = b.Z.ldlt().solve(Matrix::Identity(l, l));
    out.Cinv.topLeftCorner(l, l) = Zinv * b.Gamma * Zinv;
    out.Cinv.topRightCorner(l, l) = -Zinv;
    out.Cinv.bottomLeftCorner(l, l) = Zinv;
    return out;
}

CMatrices c_matrix_and_inverse(const ConstraintSet& set, const PhasePoint& X) {
    return c_matrix_and_inverse(constraint_blocks(set, X));
}

Matrix xi_jacobian(const ConstraintGeometry& geo, const PhasePoint& X) {
    const Eigen::Index l = geo.G.rows();
    const Eigen::Index N = X.dofs();
    const Vector v = X.velocity();
    Matrix J = Matrix::Zero(2 * l, 2 * N);
    for (Eigen::Index a = 0; a < l; ++a) {
        J.row(a).head(N) = geo.G.row(a);
        // d sigma_dot / dR = H v ; d sigma_dot / dP = G / M
        J.row(l + a).head(N) = (geo.hessians[a] * v).transpose();
        J.row(l + a).tail(N) = geo.G.row(a).cwiseQuotient(X.masses().transpose());
    }
    return J;
}

Vector lagrange_multipliers(const ConstraintGeometry& geo, const PhasePoint& X, const Vector& F) {
    const Eigen::Index l = geo.G.rows();
    if (l == 0) return Vector(0);
    if (F.size() != X.dofs()) throw DimensionError("force vector has wrong length");
    const Vector v = X.velocity();
    const Vector f_over_m = F.cwiseQuotient(X.masses());
    Vector rhs(l);
    for (Eigen::Index b = 0; b < l; ++b) rhs[b] = v.dot(geo.hessians[b] * v) + geo.G.row(b).dot(f_over_m);
    const Matrix Z = z_matrix(geo.G, X.masses());
    require_invertible(Z);
    return Z.ldlt().solve(rhs);
}

Vector lagrange_multipliers(const ConstraintSet& set, const PhasePoint& X, const Vector& F) {
    return lagrange_multipliers(set.geometry(X.R()), X, F);
}

Vector project_momenta(const ConstraintGeometry& geo, const PhasePoint& X) {
    if (geo.G.rows() == 0) return X.P();
    const Matrix Z = z_matrix(geo.G, X.masses());
    require_invertible(Z);
    const Vector s = geo.G * X.velocity();
    return X.P() - geo.G.transpose() * Z.ldlt().solve(s);
}

Vector project_momenta(const ConstraintSet& set, const PhasePoint& X) {
    return project_momenta(set.geometry(X.R()), X);
}

std::optional<Vector> project_positions(const ConstraintSet& set, const Vector& R, double tol, int max_iter) {
    if (set.empty()) return R;
    Matrix G0(set.size(), set.dofs());
    for (int c = 0; c < set.size(); ++c) G0.row(c) = set[c].grad(R).transpose();
    const Matrix dir = set.masses().cwiseInverse().asDiagonal() * G0.transpose();
    return project_along(set, R, dir, tol, max_iter);
}

std::optional<Vector> project_along(const ConstraintSet& set, const Vector& R, const Matrix& dir, double tol,
                                    int max_iter) {
    if (set.empty()) return R;
    Vector a = Vector::Zero(set.size());
    Vector x = R;
    for (int it = 0; it < max_iter; ++it) {
        const Vector s = set.sigma(x);
        if (!s.allFinite()) return std::nullopt;
        if (s.cwiseAbs().maxCoeff() <= tol) return x;
        Matrix Gx(set.size(), set.dofs());
        for (int c = 0; c < set.size(); ++c) Gx.row(c) = set[c].grad(x).transpose();
        const Matrix J = Gx * dir;
        Eigen::FullPivLU<Matrix> lu(J);
        if (!lu.isInvertible()) return std::nullopt;
        a -= lu.solve(s);
        x = R + dir * a;
    }
    const Vector s = set.sigma(x);
    if (s.allFinite() && s.cwiseAbs().maxCoeff() <= tol) return x;
    return std::nullopt;
}

}  // namespace qcdirac
