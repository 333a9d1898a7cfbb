#include "qcdirac/quantum.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "qcdirac/errors.hpp"

namespace qcdirac {

Matrix AdiabaticFrame::omega() const {
    const int m = n();
    Matrix w(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) w(a, b) = omega(a, b);
    return w;
}

void AdiabaticFrame::derive(const std::vector<Matrix>& grad_h) {
    const int m = n();
    const Eigen::Index N = dofs();
    if (static_cast<Eigen::Index>(grad_h.size()) != N) throw DimensionError("grad_h must have one matrix per dof");
    dh_.resize(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        if (grad_h[k].rows() != m || grad_h[k].cols() != m) throw DimensionError("grad_h matrix has wrong size");
        dh_[k] = U.transpose() * grad_h[k] * U;
    }
    d_.assign(static_cast<std::size_t>(m) * m, Vector::Zero(N));
    Fmat_.assign(static_cast<std::size_t>(m) * m, Vector::Zero(N));
    Fad_.resize(m, N);
    for (int a = 0; a < m; ++a) {
        for (Eigen::Index k = 0; k < N; ++k) Fad_(a, k) = -dh_[k](a, a);
        for (int b = 0; b < m; ++b) {
            if (a == b) continue;
            Vector v(N);
            const double gap = E[b] - E[a];
            for (Eigen::Index k = 0; k < N; ++k) v[k] = dh_[k](a, b) / gap;
            d_[index(a, b)] = v;
        }
    }
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            Fmat_[index(a, b)] = a == b ? force(a) : Vector(hbar * omega(a, b) * d_[index(a, b)]);
}

void AdiabaticFrame::flip(int a) {
    const int m = n();
    U.col(a) *= -1.0;
    for (auto& M : dh_) {
        M.row(a) *= -1.0;
        M.col(a) *= -1.0;
    }
    for (int b = 0; b < m; ++b) {
        if (b == a) continue;
        d_[index(a, b)] *= -1.0;
        d_[index(b, a)] *= -1.0;
        Fmat_[index(a, b)] *= -1.0;
        Fmat_[index(b, a)] *= -1.0;
    }
}

AdiabaticFrame adiabatize(const DiabaticModel& model, const Vector& R, double hbar, const AdiabaticFrame* prev,
                          double gap_floor) {
    if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
    const Matrix h = model.h(R);
    if (h.rows() != model.n || h.cols() != model.n) throw DimensionError("h(R) has wrong size");
    if (!h.allFinite()) throw EvaluationError("h(R) is not finite");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
    if (es.info() != Eigen::Success) throw EvaluationError("eigensolver failed");

    AdiabaticFrame f;
    f.R = R;
    f.E = es.eigenvalues();
    f.U = es.eigenvectors();
    f.hbar = hbar;
    for (int a = 0; a + 1 < model.n; ++a)
        if (f.E[a + 1] - f.E[a] < gap_floor) throw DegeneracyError("adiabatic energies are degenerate", a, a + 1);

    if (prev && prev->n() == model.n) {
        for (int a = 0; a < model.n; ++a)
            if (f.U.col(a).dot(prev->U.col(a)) < 0.0) f.U.col(a) *= -1.0;
    } else {
        for (int a = 0; a < model.n; ++a) {
            for (int i = 0; i < model.n; ++i) {
                if (std::abs(f.U(i, a)) > 1e-12) {
                    if (f.U(i, a) < 0.0) f.U.col(a) *= -1.0;
                    break;
                }
            }
        }
    }
    f.derive(model.grad_h(R));
    return f;
}

void align_to(AdiabaticFrame& frame, const AdiabaticFrame& prev) {
    if (frame.n() != prev.n()) throw DimensionError("frames have different state counts");
    for (int a = 0; a < frame.n(); ++a) {
        const double o = prev.U.col(a).dot(frame.U.col(a));
        if (std::abs(o) < 0.5) throw PathTooCoarse("state overlap " + std::to_string(o) + " between consecutive frames");
        if (o < 0.0) frame.flip(a);
    }
}

void frame_transport(std::vector<AdiabaticFrame>& frames) {
    for (std::size_t k = 1; k < frames.size(); ++k) align_to(frames[k], frames[k - 1]);
}

Matrix constraint_projector(const ConstraintSet& set, const Vector& R) {
    const Eigen::Index N = set.dofs();
    if (set.empty()) return Matrix::Zero(N, N);
    Matrix G(set.size(), N);
    for (int c = 0; c < set.size(); ++c) G.row(c) = set[c].grad(R).transpose();
    const Matrix Z = z_matrix(G, set.masses());
    require_invertible(Z);
    return G.transpose() * Z.ldlt().solve(G * set.masses().cwiseInverse().asDiagonal());
}

double constrained_frequency_literal(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set) {
    return frame.omega(a, b) * (1.0 + set.size());
}

Vector constrained_frequency_projected(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set) {
    const Vector& d = frame.d(a, b);
    if (set.empty()) return frame.omega(a, b) * d;
    return frame.omega(a, b) * (d + constraint_projector(set, frame.R) * d);
}

Vector constrained_frequency_vector(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set,
                                    FrequencyMode mode) {
    if (mode == FrequencyMode::literal) return constrained_frequency_literal(frame, a, b, set) * frame.d(a, b);
    return constrained_frequency_projected(frame, a, b, set);
}

}  // namespace qcdirac
