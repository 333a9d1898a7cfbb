#include <doctest.h>

#include "helpers.hpp"
#include "qcdirac/errors.hpp"

using namespace qcdirac;
using namespace testing_support;

namespace {

// {sigma_a, xi} brackets by brute force from scalar functions and FD gradients
ScalarPhaseFunction sigma_fn(const HolonomicConstraint& c) {
    return {[c](const PhasePoint& X) { return c.sigma(X.R()); }, {}};
}
ScalarPhaseFunction sigma_dot_fn(const HolonomicConstraint& c) {
    return {[c](const PhasePoint& X) { return sigma_dot(c, X); }, {}};
}

}  // namespace

TEST_CASE("sigma_dot examples") {
    const HolonomicConstraint plane = linear_plane(Vector::Unit(1, 0), 0.0);
    const PhasePoint X(Vector::Constant(1, 0.0), Vector::Constant(1, 2.0), Vector::Constant(1, 4.0));
    CHECK(sigma_dot(plane, X) == doctest::Approx(0.5));
    CHECK(sigma_dot(plane, X.with_P(Vector::Zero(1))) == 0.0);
    // equal momenta on a bonded pair
    const HolonomicConstraint bond = dimer_bond(2, 0, 1, 1.0);
    Vector R(4), P(4);
    R << 0.1, 0.2, 0.9, -0.3;
    P << 0.7, -0.4, 0.7, -0.4;
    CHECK(std::abs(sigma_dot(bond, PhasePoint(R, P, Vector::Ones(4)))) < 1e-15);
}

TEST_CASE("gallery derivatives agree with finite differences") {
    CounterRng rng(3, 1);
    for (const char* name : {"dimer-bond", "parabola-bead", "linear-plane"}) {
        const System s = gallery(name);
        for (int t = 0; t < 10; ++t) {
            const Vector R = s.start_R + random_vector(rng, s.constraints.dofs());
            const auto& c = s.constraints[0];
            Vector g_fd(R.size());
            for (Eigen::Index k = 0; k < R.size(); ++k) {
                Vector a = R, b = R;
                a[k] += 1e-6;
                b[k] -= 1e-6;
                g_fd[k] = (c.sigma(a) - c.sigma(b)) / 2e-6;
            }
            CHECK((c.grad(R) - g_fd).norm() <= 1e-6 * std::max(1.0, g_fd.norm()));
            HolonomicConstraint no_hess = c;
            no_hess.hessian = nullptr;
            const Matrix H = c.hessian_at(R);
            CHECK((H - H.transpose()).norm() <= 1e-12);
            CHECK((H - no_hess.hessian_at(R)).norm() <= 1e-5 * std::max(1.0, H.norm()));
        }
    }
}

TEST_CASE("Z, Gamma and C") {
    SUBCASE("dimer Z") {
        const System s = gallery("dimer-bond");
        const PhasePoint X(s.start_R, Vector::Zero(4), s.constraints.masses());
        const auto b = constraint_blocks(s.constraints, X);
        REQUIRE(b.Z.rows() == 1);
        CHECK(b.Z(0, 0) == doctest::Approx(2.0));
        CHECK(b.Gamma(0, 0) == 0.0);
    }
    SUBCASE("C against brute-force Poisson brackets, two constraints") {
        // bond plus plane on a 3-particle chain in 2D, distinct masses
        Vector M(6);
        M << 1.0, 1.0, 2.0, 2.0, 0.5, 0.5;
        Vector u = Vector::Zero(6);
        u[1] = 1.0;
        u[5] = 0.3;
        ConstraintSet set({dimer_bond(2, 0, 1, 1.0), dimer_bond(2, 1, 2, 1.3), linear_plane(u, 0.2)}, M);
        CounterRng rng(5, 0);
        for (int t = 0; t < 20; ++t) {
            Vector R(6);
            R << 0, 0, 1, 0, 1, 1.3;
            const PhasePoint X(R + random_vector(rng, 6, 0.3), random_vector(rng, 6), M);
            const auto blocks = constraint_blocks(set, X);
            const auto c = c_matrix_and_inverse(blocks);
            const int l = set.size();
            CHECK((blocks.Z - blocks.Z.transpose()).norm() < 1e-14);
            CHECK((blocks.Gamma + blocks.Gamma.transpose()).norm() < 1e-14);
            CHECK((c.C * c.Cinv - Matrix::Identity(2 * l, 2 * l)).norm() < 1e-10);
            CHECK(c.C.topLeftCorner(l, l).norm() == 0.0);
            for (int a = 0; a < l; ++a)
                for (int b = 0; b < l; ++b) {
                    const auto sa = sigma_fn(set[a]), sb = sigma_fn(set[b]);
                    const auto da = sigma_dot_fn(set[a]), db = sigma_dot_fn(set[b]);
                    CHECK(std::abs(c.C(a, l + b) - poisson_bracket(sa, db, X)) < 1e-8);
                    CHECK(std::abs(c.C(l + a, b) - poisson_bracket(da, sb, X)) < 1e-8);
                    CHECK(std::abs(c.C(l + a, l + b) - poisson_bracket(da, db, X)) < 1e-7);
                }
        }
    }
}

TEST_CASE("degenerate constraints are reported") {
    ConstraintSet set({linear_plane(Vector::Unit(2, 0), 0.0), linear_plane(Vector::Unit(2, 0), 1.0)}, Vector::Ones(2));
    const PhasePoint X(Vector::Zero(2), Vector::Zero(2), Vector::Ones(2));
    try {
        constraint_blocks(set, X);
        FAIL("expected DegenerateConstraintError");
    } catch (const DegenerateConstraintError& e) {
        CHECK(e.first() == 0);
        CHECK(e.second() == 1);
    }
    CHECK_THROWS_AS(lagrange_multipliers(set, X, Vector::Zero(2)), DegenerateConstraintError);
}

TEST_CASE("lagrange multipliers") {
    const System s = gallery("dimer-bond");
    Vector R(4), P(4);
    R << 0, 0, -1, 0;  // r12 = r1 - r2 = (1, 0)
    P << 0, 0.5, 0, -0.5;
    const PhasePoint X(R, P, Vector::Ones(4));
    const Vector lambda = lagrange_multipliers(s.constraints, X, Vector::Zero(4));
    REQUIRE(lambda.size() == 1);
    CHECK(lambda[0] == doctest::Approx(0.5));
    const Vector f = -lambda[0] * s.constraints[0].grad(R);
    CHECK(f[0] == doctest::Approx(-0.5));
    CHECK(f[1] == doctest::Approx(0.0));
    CHECK(lagrange_multipliers(s.constraints, X.with_P(Vector::Zero(4)), Vector::Zero(4))[0] == 0.0);

    Vector u(3);
    u << 1, 2, -1;
    ConstraintSet plane({linear_plane(u, 0.0)}, Vector::Constant(3, 2.0));
    Vector F(3);
    F << 2, -1, 0;  // orthogonal to u
    const PhasePoint Y(Vector::Zero(3), Vector::Constant(3, 1.0), Vector::Constant(3, 2.0));
    CHECK(std::abs(lagrange_multipliers(plane, Y, F)[0]) < 1e-15);

    // sigma-double-dot vanishes under F - G^T lambda
    CounterRng rng(9, 0);
    for (int t = 0; t < 10; ++t) {
        const PhasePoint Z = free_point(s.constraints, s.start_R, rng);
        const Vector Fz = random_vector(rng, 4);
        const auto geo = s.constraints.geometry(Z.R());
        const Vector acc = (Fz - geo.G.transpose() * lagrange_multipliers(geo, Z, Fz)).cwiseQuotient(Z.masses());
        const Vector v = Z.velocity();
        CHECK(std::abs(v.dot(geo.hessians[0] * v) + geo.G.row(0).dot(acc)) < 1e-12);
    }
}

TEST_CASE("unconstrained set") {
    const ConstraintSet set = ConstraintSet::unconstrained(Vector::Ones(3));
    const PhasePoint X(Vector::Ones(3), Vector::Ones(3), Vector::Ones(3));
    const auto b = constraint_blocks(set, X);
    CHECK(b.Z.size() == 0);
    CHECK(c_matrix_and_inverse(b).C.size() == 0);
    CHECK(lagrange_multipliers(set, X, Vector::Ones(3)).size() == 0);
    CHECK(project_momenta(set, X) == X.P());
}

TEST_CASE("projections") {
    CounterRng rng(21, 0);
    for (const char* name : {"dimer-bond", "parabola-bead", "linear-plane"}) {
        const System s = gallery(name, 1.7);
        for (int t = 0; t < 20; ++t) {
            const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
            CHECK(s.constraints.sigma(X.R()).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(s.constraints.sigma_dot(X).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}
