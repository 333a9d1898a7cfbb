#include "qcdirac/phase_space.hpp"

#include <cmath>
#include <limits>

#include "qcdirac/errors.hpp"

namespace qcdirac {

PhasePoint::PhasePoint(Vector R, Vector P, Vector masses)
    : R_(std::move(R)), P_(std::move(P)), masses_(std::move(masses)) {
    if (R_.size() == 0)
        throw DimensionError("phase point needs at least one degree of freedom");
    if (P_.size() != R_.size() || masses_.size() != R_.size())
        throw DimensionError("R, P and masses must have the same length");
    for (Eigen::Index i = 0; i < masses_.size(); ++i)
        if (!(masses_[i] > 0.0))
            throw InvalidArgument("mass of degree of freedom " + std::to_string(i) + " is not positive");
}

PhasePoint PhasePoint::from_stacked(const Eigen::Ref<const Vector>& x, const Vector& masses) {
    const Eigen::Index N = masses.size();
    if (x.size() != 2 * N)
        throw DimensionError("stacked phase vector has wrong length");
    return {x.head(N), x.tail(N), masses};
}

Vector PhasePoint::stacked() const {
    Vector x(2 * dofs());
    x << R_, P_;
    return x;
}

void PhysicalConstants::validate() const {
    if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
    if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
}

MatrixPhaseFunction MatrixPhaseFunction::from_scalar(const ScalarPhaseFunction& f) {
    MatrixPhaseFunction m;
    m.n = 1;
    m.value = [f](const PhasePoint& X) { return CMatrix::Constant(1, 1, complex(f(X), 0.0)); };
    if (f.gradient) {
        m.gradient = [f](const PhasePoint& X) {
            const Vector g = f.gradient(X);
            std::vector<CMatrix> out(g.size());
            for (Eigen::Index i = 0; i < g.size(); ++i) out[i] = CMatrix::Constant(1, 1, complex(g[i], 0.0));
            return out;
        };
    }
    return m;
}

Matrix symplectic_matrix(Eigen::Index N) {
    if (N < 1) throw DimensionError("symplectic matrix needs N >= 1");
    Matrix B = Matrix::Zero(2 * N, 2 * N);
    B.topRightCorner(N, N).setIdentity();
    B.bottomLeftCorner(N, N) = -Matrix::Identity(N, N);
    return B;
}

double fd_step(double x) {
    static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    return base * std::max(1.0, std::abs(x));
}

namespace {

template <class F>
auto central_difference(const F& eval, const PhasePoint& X, std::optional<double> h) {
    Vector x = X.stacked();
    const Eigen::Index dim = x.size();
    using Value = decltype(eval(X));
    std::vector<Value> out;
    out.reserve(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double xi = x[i];
        const double step = h ? *h : fd_step(xi);
        x[i] = xi + step;
        const Value fp = eval(PhasePoint::from_stacked(x, X.masses()));
        x[i] = xi - step;
        const Value fm = eval(PhasePoint::from_stacked(x, X.masses()));
        x[i] = xi;
        out.push_back((fp - fm) / (2.0 * step));
    }
    return out;
}

}  // namespace

Vector fd_gradient(const ScalarPhaseFunction& f, const PhasePoint& X, std::optional<double> h) {
    if (h && !(*h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
    const auto parts = central_difference(
        [&](const PhasePoint& Y) {
            const double v = f(Y);
            if (!std::isfinite(v)) throw EvaluationError("non-finite function value at stencil point");
            return v;
        },
        X, h);
    return Eigen::Map<const Vector>(parts.data(), static_cast<Eigen::Index>(parts.size()));
}

std::vector<CMatrix> fd_gradient(const MatrixPhaseFunction& f, const PhasePoint& X, std::optional<double> h) {
    if (h && !(*h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
    return central_difference(
        [&](const PhasePoint& Y) -> CMatrix {
            CMatrix v = f(Y);
            if (!v.allFinite()) throw EvaluationError("non-finite matrix value at stencil point");
            return v;
        },
        X, h);
}

Vector gradient_of(const ScalarPhaseFunction& f, const PhasePoint& X) {
    Vector g = f.gradient ? f.gradient(X) : fd_gradient(f, X);
    if (g.size() != 2 * X.dofs()) throw DimensionError("gradient has wrong length");
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i])) throw EvaluationError("non-finite gradient", i);
    return g;
}

std::vector<CMatrix> gradient_of(const MatrixPhaseFunction& f, const PhasePoint& X) {
    std::vector<CMatrix> g = f.gradient ? f.gradient(X) : fd_gradient(f, X);
    if (static_cast<Eigen::Index>(g.size()) != 2 * X.dofs()) throw DimensionError("gradient has wrong length");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g[i].allFinite()) throw EvaluationError("non-finite gradient", static_cast<long>(i));
    return g;
}

double poisson_bracket(const Vector& ga, const Vector& gb) {
    if (ga.size() != gb.size() || ga.size() % 2 != 0) throw DimensionError("gradient lengths differ");
    const Eigen::Index N = ga.size() / 2;
    return ga.head(N).dot(gb.tail(N)) - ga.tail(N).dot(gb.head(N));
}

double poisson_bracket(const ScalarPhaseFunction& a, const ScalarPhaseFunction& b, const PhasePoint& X) {
    return poisson_bracket(gradient_of(a, X), gradient_of(b, X));
}

}  // namespace qcdirac
