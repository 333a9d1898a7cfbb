#include <doctest.h>

#include "helpers.hpp"
#include "qcdirac/dirac.hpp"
#include "qcdirac/errors.hpp"
#include "qcdirac/oracles.hpp"

using namespace qcdirac;
using namespace testing_support;

namespace {

// f(xi) = sigma^2 + 3 sigma_dot + sigma sigma_dot for the first constraint, exact gradient
ScalarPhaseFunction constraint_function(const ConstraintSet& set) {
    ScalarPhaseFunction f;
    f.value = [set](const PhasePoint& X) {
        const double s = set.sigma(X.R())[0], sd = set.sigma_dot(X)[0];
        return s * s + 3.0 * sd + s * sd;
    };
    f.gradient = [set](const PhasePoint& X) {
        const double s = set.sigma(X.R())[0], sd = set.sigma_dot(X)[0];
        const Matrix J = xi_jacobian(set.geometry(X.R()), X);
        return Vector((2.0 * s + sd) * J.row(0).transpose() + (3.0 + s) * J.row(set.size()).transpose());
    };
    return f;
}

MatrixPhaseFunction hamiltonian(const System& s) {
    MatrixPhaseFunction H;
    H.n = s.model.n;
    H.value = [s](const PhasePoint& X) -> CMatrix {
        Matrix h = s.model.h(X.R());
        h.diagonal().array() += X.kinetic_energy();
        return h.cast<complex>();
    };
    H.gradient = [s](const PhasePoint& X) {
        const Eigen::Index N = X.dofs();
        const auto gh = s.model.grad_h(X.R());
        std::vector<CMatrix> g(2 * N);
        for (Eigen::Index i = 0; i < N; ++i) {
            g[i] = gh[i].cast<complex>();
            g[N + i] = CMatrix::Identity(s.model.n, s.model.n) * X.velocity()[i];
        }
        return g;
    };
    return H;
}

}  // namespace

TEST_CASE("B^D structure") {
    CounterRng rng(1, 2);
    SUBCASE("l = 0") {
        DiracEngine e(ConstraintSet::unconstrained(Vector::Ones(3)));
        const PhasePoint X(Vector::Ones(3), Vector::Zero(3), Vector::Ones(3));
        CHECK(b_dirac_matrix(e, X) == symplectic_matrix(3));
        CHECK(e.divergence(X).norm() == 0.0);
        CHECK(measure_weight(e, X) == 1.0);
    }
    for (const char* name : {"dimer-bond", "parabola-bead", "linear-plane"}) {
        CAPTURE(name);
        const System s = gallery(name, 1.3);
        DiracEngine e(s.constraints);
        for (int t = 0; t < 20; ++t) {
            const PhasePoint X = free_point(s.constraints, s.start_R, rng);
            const Matrix B = e.b_dirac(X);
            CHECK((B + B.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
            const Matrix xi = xi_jacobian(s.constraints.geometry(X.R()), X);
            CHECK((B * xi.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
            // position-position block vanishes
            CHECK(B.topLeftCorner(X.dofs(), X.dofs()).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("Dirac bracket dual forms and invariance") {
    CounterRng rng(7, 3);
    for (const char* name : {"dimer-bond", "parabola-bead", "linear-plane"}) {
        CAPTURE(name);
        const System s = gallery(name, 0.8);
        DiracEngine e(s.constraints);
        const auto sigma = ScalarPhaseFunction{[s](const PhasePoint& X) { return s.constraints.sigma(X.R())[0]; },
                                               [s](const PhasePoint& X) {
                                                   Vector g = Vector::Zero(2 * X.dofs());
                                                   g.head(X.dofs()) = s.constraints[0].grad(X.R());
                                                   return g;
                                               }};
        const auto f = constraint_function(s.constraints);
        for (int t = 0; t < 30; ++t) {
            const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
            const auto a = Polynomial::random(rng, 2 * X.dofs()).function();
            const auto b = Polynomial::random(rng, 2 * X.dofs()).function();
            const double d1 = dirac_bracket(e, a, b, X);
            CHECK(std::abs(d1 - dirac_bracket_equiv(e, a, b, X)) <= 1e-9);
            CHECK(std::abs(d1 + dirac_bracket(e, b, a, X)) <= 1e-12);
            CHECK(std::abs(dirac_bracket(e, sigma, b, X)) <= 1e-10);
            CHECK(std::abs(dirac_bracket_equiv(e, sigma, b, X)) <= 1e-10);
            CHECK(std::abs(dirac_bracket(e, f, a, X)) <= 1e-10);
        }
    }
    SUBCASE("l = 0 reduces to Poisson") {
        DiracEngine e(ConstraintSet::unconstrained(Vector::Ones(2)));
        const auto a = Polynomial::random(rng, 4).function(), b = Polynomial::random(rng, 4).function();
        const PhasePoint X(Vector::Constant(2, 0.3), Vector::Constant(2, -0.2), Vector::Ones(2));
        CHECK(dirac_bracket(e, a, b, X) == poisson_bracket(a, b, X));
        CHECK(dirac_bracket_equiv(e, a, b, X) == poisson_bracket(a, b, X));
    }
}

TEST_CASE("Jacobi identity for the Dirac bracket on the manifold") {
    CounterRng rng(13, 0);
    const System s = gallery("parabola-bead");
    DiracEngine e(s.constraints);
    for (int t = 0; t < 5; ++t) {
        const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
        const auto a = Polynomial::random(rng, 4, 3, 2).function();
        const auto b = Polynomial::random(rng, 4, 3, 2).function();
        const auto c = Polynomial::random(rng, 4, 3, 2).function();
        auto inner = [&e](ScalarPhaseFunction f, ScalarPhaseFunction g) {
            return ScalarPhaseFunction{[&e, f, g](const PhasePoint& Y) { return dirac_bracket(e, f, g, Y); }, {}};
        };
        const double jac = dirac_bracket(e, a, inner(b, c), X) + dirac_bracket(e, b, inner(c, a), X) +
                           dirac_bracket(e, c, inner(a, b), X);
        CHECK(std::abs(jac) < 1e-6);
    }
}

TEST_CASE("matrix Dirac bracket") {
    CounterRng rng(17, 0);
    const System s = gallery("dimer-bond");
    DiracEngine e(s.constraints);
    const auto H = hamiltonian(s);
    const auto fI = MatrixPhaseFunction::from_scalar(constraint_function(s.constraints));
    for (int t = 0; t < 20; ++t) {
        const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
        // f(xi) I is invariant; promote to n = 2
        MatrixPhaseFunction f2{2,
                               [fI](const PhasePoint& Y) { return CMatrix(fI(Y)(0, 0) * CMatrix::Identity(2, 2)); },
                               [fI](const PhasePoint& Y) {
                                   auto g = gradient_of(fI, Y);
                                   for (auto& m : g) m = m(0, 0) * CMatrix::Identity(2, 2);
                                   return g;
                               }};
        CHECK(matrix_dirac_bracket(e, H, f2, X, 1.0).cwiseAbs().maxCoeff() <= 1e-10);
        const auto A = PolynomialMatrix::random(rng, 8, 2).function();
        const auto B = PolynomialMatrix::random(rng, 8, 2).function();
        const CMatrix ab = matrix_dirac_bracket(e, A, B, X, 0.7);
        const CMatrix ba = matrix_dirac_bracket(e, B, A, X, 0.7);
        CHECK((ab - ab.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((ab + ba).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("constant diagonal matrices") {
        MatrixPhaseFunction D1{2, [](const PhasePoint&) { return CMatrix(Eigen::Vector2cd(1.0, 2.0).asDiagonal()); }, {}};
        MatrixPhaseFunction D2{2, [](const PhasePoint&) { return CMatrix(Eigen::Vector2cd(-3.0, 0.5).asDiagonal()); }, {}};
        const PhasePoint X(s.start_R, Vector::Ones(4), s.constraints.masses());
        CHECK(matrix_dirac_bracket(e, D1, D2, X, 1.0).norm() == 0.0);
    }
    SUBCASE("dimension mismatch") {
        const auto A = PolynomialMatrix::random(rng, 8, 2).function();
        const auto B = PolynomialMatrix::random(rng, 8, 3).function();
        const PhasePoint X(s.start_R, Vector::Ones(4), s.constraints.masses());
        CHECK_THROWS_AS(matrix_dirac_bracket(e, A, B, X, 1.0), DimensionError);
    }
    SUBCASE("l = 0, n = 1 gives the classical time derivative {chi, H}") {
        DiracEngine e0(ConstraintSet::unconstrained(Vector::Ones(2)));
        const auto h = Polynomial::random(rng, 4).function(), c = Polynomial::random(rng, 4).function();
        const PhasePoint X(Vector::Constant(2, 0.4), Vector::Constant(2, 0.1), Vector::Ones(2));
        const CMatrix r =
            matrix_dirac_bracket(e0, MatrixPhaseFunction::from_scalar(h), MatrixPhaseFunction::from_scalar(c), X, 1.0);
        CHECK(std::abs(r(0, 0) - poisson_bracket(c, h, X)) <= 1e-10);
    }
}

TEST_CASE("compressibility and measure") {
    CounterRng rng(23, 0);
    SUBCASE("dimer: det Z constant, kappa0 zero on manifold") {
        const System s = gallery("dimer-bond");
        DiracEngine e(s.constraints);
        const auto H = hamiltonian(s);
        for (int t = 0; t < 10; ++t) {
            const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
            CHECK(measure_weight(e, X) == doctest::Approx(2.0).epsilon(1e-12));
            CHECK(std::abs(compressibility_kappa0(e, H, X)) < 1e-6);
            CHECK(std::abs(log_det_z_rate(e, X)) < 1e-12);
        }
    }
    SUBCASE("parabola: divergence form equals -d/dt ln det Z") {
        const System s = gallery("parabola-bead", 1.5);
        DiracEngine e(s.constraints);
        const auto H = hamiltonian(s);
        for (int t = 0; t < 10; ++t) {
            const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
            CHECK(std::abs(compressibility_kappa0(e, H, X) - log_det_z_rate(e, X)) < 1e-6);
            // analytic d ln det Z/dR vs FD of ln det Z
            Vector fd(2);
            for (int k = 0; k < 2; ++k) {
                Vector a = X.R(), b = X.R();
                a[k] += 1e-6;
                b[k] -= 1e-6;
                fd[k] = (std::log(measure_weight(e, X.with_R(a))) - std::log(measure_weight(e, X.with_R(b)))) / 2e-6;
            }
            CHECK((fd - e.log_det_z_gradient(X.R())).norm() < 1e-7);
        }
    }
}
