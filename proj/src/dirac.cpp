#include "qcdirac/dirac.hpp"

#include <cmath>

#include "qcdirac/errors.hpp"

namespace qcdirac {

Matrix DiracEngine::b_dirac(const PhasePoint& X) const {
    if (X.dofs() != set_.dofs()) throw DimensionError("phase point does not match constraint set");
    Matrix Bs = symplectic_matrix(X.dofs());
    if (set_.empty()) return Bs;
    const ConstraintGeometry geo = set_.geometry(X.R());
    const CMatrices c = c_matrix_and_inverse(constraint_blocks(geo, X));
    const Matrix Y = Bs * xi_jacobian(geo, X).transpose();  // B^s Xi^T, 2N x 2l
    // Xi B^s = -(B^s Xi^T)^T because B^s is antisymmetric.
    return Bs + Y * c.Cinv * Y.transpose();
}

Vector DiracEngine::divergence(const PhasePoint& X) const {
    const Eigen::Index dim = 2 * X.dofs();
    Vector div = Vector::Zero(dim);
    if (set_.empty()) return div;
    Vector x = X.stacked();
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double xi = x[i];
        const double h = fd_step(xi);
        x[i] = xi + h;
        const Matrix Bp = b_dirac(PhasePoint::from_stacked(x, X.masses()));
        x[i] = xi - h;
        const Matrix Bm = b_dirac(PhasePoint::from_stacked(x, X.masses()));
        x[i] = xi;
        div += (Bp.row(i) - Bm.row(i)).transpose() / (2.0 * h);
    }
    if (!div.allFinite()) throw EvaluationError("divergence of B^D is not finite");
    return div;
}

Vector DiracEngine::log_det_z_gradient(const Vector& R) const {
    const Eigen::Index N = set_.dofs();
    Vector out = Vector::Zero(N);
    if (set_.empty()) return out;
    const ConstraintGeometry geo = set_.geometry(R);
    const int l = set_.size();
    const Vector inv_m = set_.masses().cwiseInverse();
    const Matrix Z = z_matrix(geo.G, set_.masses());
    require_invertible(Z);
    // K = Z^-1 G M^-1, so tr(Z^-1 dZ/dR_k) = 2 sum_a (K H_a)(a, k)
    const Matrix K = Z.ldlt().solve(geo.G * inv_m.asDiagonal());
    for (int a = 0; a < l; ++a) out += 2.0 * (K.row(a) * geo.hessians[a]).transpose();
    return out;
}

Matrix b_dirac_matrix(const DiracEngine& engine, const PhasePoint& X) { return engine.b_dirac(X); }

double dirac_bracket(const DiracEngine& engine, const ScalarPhaseFunction& a, const ScalarPhaseFunction& b,
                     const PhasePoint& X) {
    const Vector ga = gradient_of(a, X);
    const Vector gb = gradient_of(b, X);
    return ga.dot(engine.b_dirac(X) * gb);
}

double dirac_bracket_equiv(const DiracEngine& engine, const ScalarPhaseFunction& a, const ScalarPhaseFunction& b,
                           const PhasePoint& X) {
    const Vector ga = gradient_of(a, X);
    const Vector gb = gradient_of(b, X);
    double out = poisson_bracket(ga, gb);
    const auto& set = engine.constraints();
    if (set.empty()) return out;
    const ConstraintGeometry geo = set.geometry(X.R());
    const Matrix xi = xi_jacobian(geo, X);
    const CMatrices c = c_matrix_and_inverse(constraint_blocks(geo, X));
    const Eigen::Index m = xi.rows();
    Vector a_xi(m), xi_b(m);
    for (Eigen::Index p = 0; p < m; ++p) {
        const Vector gxi = xi.row(p).transpose();
        a_xi[p] = poisson_bracket(ga, gxi);
        xi_b[p] = poisson_bracket(gxi, gb);
    }
    return out - a_xi.dot(c.Cinv * xi_b);
}

CMatrix matrix_bracket(const std::vector<CMatrix>& ga, const Matrix& B, const std::vector<CMatrix>& gc) {
    const auto dim = static_cast<Eigen::Index>(ga.size());
    if (static_cast<Eigen::Index>(gc.size()) != dim || B.rows() != dim || B.cols() != dim)
        throw DimensionError("gradient count does not match bracket matrix");
    const Eigen::Index n = ga.front().rows();
    CMatrix out = CMatrix::Zero(n, gc.front().cols());
    for (Eigen::Index i = 0; i < dim; ++i) {
        CMatrix col = CMatrix::Zero(gc.front().rows(), gc.front().cols());
        bool any = false;
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (B(i, j) == 0.0) continue;
            col += B(i, j) * gc[j];
            any = true;
        }
        if (any) out += ga[i] * col;
    }
    return out;
}

CMatrix matrix_dirac_bracket(const DiracEngine& engine, const MatrixPhaseFunction& H, const MatrixPhaseFunction& chi,
                             const PhasePoint& X, double hbar) {
    if (H.n != chi.n) throw DimensionError("H and chi have different quantum dimensions");
    if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
    const CMatrix h = H(X);
    const CMatrix c = chi(X);
    if (h.rows() != H.n || c.rows() != chi.n) throw DimensionError("matrix function returned wrong size");
    const auto gH = gradient_of(H, X);
    const auto gC = gradient_of(chi, X);
    const Matrix BD = engine.b_dirac(X);
    const complex i_over_hbar(0.0, 1.0 / hbar);
    return i_over_hbar * (h * c - c * h) - 0.5 * (matrix_bracket(gH, BD, gC) - matrix_bracket(gC, BD, gH));
}

double compressibility_kappa0(const DiracEngine& engine, const MatrixPhaseFunction& H, const PhasePoint& X) {
    const Vector div = engine.divergence(X);
    const auto gH = gradient_of(H, X);
    complex acc(0.0, 0.0);
    for (Eigen::Index j = 0; j < div.size(); ++j) acc += div[j] * gH[j].trace();
    return acc.real() / static_cast<double>(H.n);
}

double compressibility_kappa0(const DiracEngine& engine, const ScalarPhaseFunction& H, const PhasePoint& X) {
    return engine.divergence(X).dot(gradient_of(H, X));
}

double log_det_z_rate(const DiracEngine& engine, const PhasePoint& X) {
    return -engine.log_det_z_gradient(X.R()).dot(X.velocity());
}

double measure_weight(const DiracEngine& engine, const PhasePoint& X) {
    const auto& set = engine.constraints();
    if (set.empty()) return 1.0;
    const ConstraintGeometry geo = set.geometry(X.R());
    const Matrix Z = z_matrix(geo.G, set.masses());
    require_invertible(Z);
    const double det = Z.determinant();
    if (!(det > 0.0)) throw DegenerateConstraintError("det Z is not positive", 0, 0);
    return det;
}

}  // namespace qcdirac
