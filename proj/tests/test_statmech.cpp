#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "helpers.hpp"
#include "qcdirac/errors.hpp"
#include "qcdirac/statmech.hpp"

using namespace qcdirac;
using namespace testing_support;

namespace {

double bracket_mp(double beta, double x) {
    using mp = boost::multiprecision::cpp_bin_float_50;
    const mp b(beta), X(x);
    const mp e = exp(-b * X);
    return static_cast<double>(-(1 - e) / X + b / 2 * (1 + e));
}

// exp(-beta h) by Taylor series, independent of any eigen-decomposition
Matrix exp_series(const Matrix& h, double beta) {
    Matrix out = Matrix::Identity(h.rows(), h.cols()), term = out;
    for (int k = 1; k < 60; ++k) {
        term = term * (-beta * h) / k;
        out += term;
    }
    return out;
}

}  // namespace

TEST_CASE("order-hbar bracket against extended precision") {
    for (double beta : {0.5, 1.0, 3.0})
        for (double y : {1e-10, 1e-6, 1e-3, 0.02, 0.2, 0.499, 0.501, 1.0, 5.0})
            for (double sgn : {1.0, -1.0}) {
                const double x = sgn * y / beta;
                const double ref = bracket_mp(beta, x);
                CHECK(std::abs(rho1_bracket(beta, x) - ref) <= 1e-12 * std::abs(ref) + 1e-300);
            }
    CHECK(rho1_bracket(1.0, 0.0) == 0.0);
    // leading behaviour beta^3 x^2 / 12
    CHECK(rho1_bracket(2.0, 1e-4) == doctest::Approx(8.0 * 1e-8 / 12.0).epsilon(1e-4));
}

TEST_CASE("density validation") {
    StationaryDensity sd;
    sd.beta = 0.0;
    CHECK_THROWS_AS(sd.validate(), ConfigError);
    sd.beta = -1.0;
    CHECK_THROWS_AS(sd.validate(), ConfigError);
    sd = {};
    sd.Q = 0.0;
    CHECK_THROWS_AS(sd.validate(), ConfigError);
    sd = {};
    sd.mode = DensityMode::microcanonical;
    sd.beta = -1.0;  // unused in this mode
    CHECK_NOTHROW(sd.validate());
}

TEST_CASE("zeroth-order density") {
    const System s = gallery("none");
    const DiracEngine engine(s.constraints);
    StationaryDensity sd;
    sd.beta = 1.3;
    sd.Q = 2.0;
    CounterRng rng(5, 0);
    const auto rho = rho0_matrix(sd, s.model, engine);
    for (int k = 0; k < 10; ++k) {
        const PhasePoint X = free_point(s.constraints, s.start_R, rng, 1.5);
        const Matrix ref = std::exp(-sd.beta * X.kinetic_energy()) * exp_series(s.model.h(X.R()), sd.beta) / sd.Q;
        CHECK((rho(X).real() - ref).norm() < 1e-12);
        CHECK(rho(X).imag().norm() == 0.0);
        const AdiabaticFrame fr = adiabatize(s.model, X.R());
        CHECK(rho0(sd, X, 0, 1, fr, engine) == 0.0);
    }
}

TEST_CASE("order-hbar density is Hermitian and gauge independent") {
    const System s = gallery("dimer-bond");
    const DiracEngine engine(s.constraints);
    StationaryDensity sd;
    sd.beta = 0.7;
    CounterRng rng(6, 0);
    for (int k = 0; k < 20; ++k) {
        const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
        AdiabaticFrame fr = adiabatize(s.model, X.R());
        const complex r01 = rho1(sd, X, 0, 1, fr, engine);
        const complex r10 = rho1(sd, X, 1, 0, fr, engine);
        CHECK(std::abs(r01 - std::conj(r10)) <= 1e-12 * std::abs(r01));
        CHECK(r01.real() == 0.0);
        CHECK(rho1(sd, X, 1, 1, fr, engine) == 0.0);
        fr.flip(1);
        CHECK(rho1(sd, X, 0, 1, fr, engine) == -r01);
    }
}

TEST_CASE("recursion residuals vanish without constraints") {
    const System s = build_system("none", {{"dofs", 2}}, "two-level-linear", {{"delta", 0.3}}, nlohmann::json{1.7, 0.8});
    const DiracEngine engine(s.constraints);
    StationaryDensity sd;
    sd.beta = 1.3;
    const auto H = hamiltonian_matrix(s.model);
    const auto r0 = rho0_matrix(sd, s.model, engine);
    const auto r1 = rho1_matrix(sd, s.model, engine);
    CounterRng rng(7, 0);
    std::vector<PhasePoint> pts;
    for (int k = 0; k < 20; ++k) pts.push_back(free_point(s.constraints, s.start_R, rng, 1.0));

    const ResidualScan zero = scan_residual(0, r0, r0, H, engine, pts);
    CHECK(zero.evaluated == pts.size());
    CHECK(zero.max_residual < 1e-13);

    const ResidualScan one = scan_residual(1, r0, r1, H, engine, pts);
    CHECK(one.evaluated == pts.size());
    CHECK(one.excluded == 0);
    CHECK(one.max_residual < 1e-7);

    // negative control: drop the bracket factor
    MatrixPhaseFunction wrong = r1;
    wrong.value = [&](const PhasePoint& X) { return CMatrix(2.0 * r1(X)); };
    CHECK(scan_residual(1, r0, wrong, H, engine, pts).max_residual > 1e-3);
}

TEST_CASE("sampler: constraints, equipartition, determinism") {
    const System s = gallery("dimer-bond");
    StationaryDensity sd;
    sd.beta = 2.0;
    SamplerOptions opt;
    opt.chains = 4;
    opt.burn_in = 200;
    opt.thin = 2;
    const SampleSet set = sample_stationary(sd, s.constraints, s.model, s.start_R, 20000, 11, opt);
    REQUIRE(set.samples.size() == 20000);
    CHECK(set.acceptance() > 0.2);
    CHECK(set.projection_failures + set.reverse_failures < set.proposed / 10);

    std::vector<double> twice_ke;
    for (const auto& smp : set.samples) {
        const PhasePoint& X = smp.state.X;
        CHECK(std::abs(s.constraints.sigma(X.R())[0]) <= 1e-10);
        CHECK(std::abs(s.constraints.sigma_dot(X)[0]) <= 1e-12);
        twice_ke.push_back(2.0 * X.kinetic_energy());
    }
    // three tangent momentum directions
    const MeanEstimate ke = mean_and_se(twice_ke);
    CHECK(std::abs(ke.mean - 3.0 / sd.beta) < 4.0 * ke.se);

    opt.parallel = false;
    const SampleSet serial = sample_stationary(sd, s.constraints, s.model, s.start_R, 200, 11, opt);
    opt.parallel = true;
    const SampleSet par = sample_stationary(sd, s.constraints, s.model, s.start_R, 200, 11, opt);
    for (std::size_t i = 0; i < serial.samples.size(); ++i) {
        CHECK(serial.samples[i].state.X.R() == par.samples[i].state.X.R());
        CHECK(serial.samples[i].state.alpha == par.samples[i].state.alpha);
    }

    sd.mode = DensityMode::microcanonical;
    CHECK_THROWS_AS(sample_stationary(sd, s.constraints, s.model, s.start_R, 10, 1, opt), ConfigError);
}

TEST_CASE("sampler marginal on a parabola") {
    const double mx = 1.0, my = 2.0, c = 1.0, beta = 1.0;
    const System s = gallery("parabola-bead", nlohmann::json{mx, my});
    StationaryDensity sd;
    sd.beta = beta;
    SamplerOptions opt;
    opt.chains = 8;
    opt.burn_in = 500;
    opt.thin = 40;
    opt.step = 1.0;
    const std::size_t count = 8000;
    const SampleSet set = sample_stationary(sd, s.constraints, s.model, s.start_R, count, 3, opt);
    CHECK(set.acceptance() > 0.2);

    // marginal of x: surface element in mass-weighted coordinates times the surface Boltzmann sum
    auto density = [&](double x) {
        const double y = c * x * x;
        const Vector E = adiabatize(s.model, Vector(Eigen::Vector2d(x, y))).E;
        return std::sqrt(4.0 * c * c * x * x / mx + 1.0 / my) * (-beta * E.array()).exp().sum();
    };
    auto integrate = [&](double a, double b) {
        const int n = 400;
        const double h = (b - a) / n;
        double acc = density(a) + density(b);
        for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * density(a + i * h);
        return acc * h / 3.0;
    };
    const std::vector<double> edges{-1e9, -1.5, -1.0, -0.6, -0.3, 0.0, 0.3, 0.6, 1.0, 1.5, 1e9};
    const double lo = -6.0, hi = 6.0;
    const double total = integrate(lo, hi);
    std::vector<double> counts(edges.size() - 1, 0.0);
    for (const auto& smp : set.samples) {
        const double x = smp.state.X.R()[0];
        for (std::size_t k = 0; k + 1 < edges.size(); ++k)
            if (x >= edges[k] && x < edges[k + 1]) counts[k] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double p = integrate(std::max(edges[k], lo), std::min(edges[k + 1], hi)) / total;
        const double expect = p * set.samples.size();
        chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
    }
    const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
}

TEST_CASE("orthogonality condition for the order-hbar density") {
    const System s = gallery("dimer-bond");
    const DiracEngine engine(s.constraints);
    StationaryDensity sd;
    sd.beta = 1.0;
    SamplerOptions opt;
    opt.chains = 2;
    opt.burn_in = 100;
    const SampleSet set = sample_stationary(sd, s.constraints, s.model, s.start_R, 400, 9, opt);
    for (auto mode : {FrequencyMode::projected, FrequencyMode::literal}) {
        const FredholmEstimate est = fredholm_check(sd, engine, s.model, set.samples, mode);
        REQUIRE(est.per_test.size() == 3);
        for (const auto& e : est.per_test) CHECK(std::abs(e.mean) <= 3.0 * e.se + 1e-12);
        CHECK(est.max_parity_violation < 1e-9);
    }

    // negative control: a real off-diagonal density does not satisfy it
    const AdiabaticDensity real_rho = [&](const PhasePoint& X, const AdiabaticFrame& fr) {
        CMatrix m(2, 2);
        m << 0.0, X.P()[0], X.P()[0], 0.0;
        (void)fr;
        return m;
    };
    const auto& X = set.samples[0].state.X;
    const AdiabaticFrame fr = adiabatize(s.model, X.R());
    CHECK(std::abs(fredholm_integrand(real_rho, X, fr, 0, s.constraints, FrequencyMode::projected)) > 0.0);
}
