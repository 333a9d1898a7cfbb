#include <doctest.h>

#include "helpers.hpp"
#include "qcdirac/errors.hpp"
#include "qcdirac/observables.hpp"
#include "qcdirac/reference.hpp"
#include "qcdirac/response.hpp"

using namespace qcdirac;
using namespace testing_support;

namespace {

// A = u . P (times identity)
MatrixPhaseFunction momentum_coupling(const Vector& u, int n) {
    MatrixPhaseFunction f;
    f.n = n;
    f.value = [u, n](const PhasePoint& X) { return CMatrix(u.dot(X.P()) * CMatrix::Identity(n, n)); };
    f.gradient = [u, n](const PhasePoint& X) {
        std::vector<CMatrix> g(2 * X.dofs(), CMatrix::Zero(n, n));
        for (Eigen::Index k = 0; k < X.dofs(); ++k) g[X.dofs() + k] = u[k] * CMatrix::Identity(n, n);
        return g;
    };
    return f;
}

}  // namespace

TEST_CASE("perturbation compressibility") {
    CounterRng rng(21, 0);
    SUBCASE("position-only coupling gives exactly zero") {
        for (const char* name : {"dimer-bond", "parabola-bead", "linear-plane"}) {
            const System s = gallery(name);
            const DiracEngine engine(s.constraints);
            const auto A = make_observable("position:0", s.model, s.constraints.dofs());
            for (int k = 0; k < 10; ++k) {
                const PhasePoint X = admissible_point(s.constraints, s.start_R, rng);
                CHECK(kappa_A(engine, A, X).cwiseAbs().maxCoeff() == 0.0);
            }
        }
    }
    SUBCASE("no constraints") {
        const System s = gallery("none");
        const DiracEngine engine(s.constraints);
        const auto A = momentum_coupling(Vector::Ones(1), 2);
        CHECK(kappa_A(engine, A, free_point(s.constraints, s.start_R, rng)).norm() == 0.0);
    }
    SUBCASE("closed form against the divergence of B^D") {
        const System s = gallery("parabola-bead", nlohmann::json{1.0, 2.5});
        const DiracEngine engine(s.constraints);
        const auto A = momentum_coupling(Vector(Eigen::Vector2d(0.7, -1.3)), 2);
        double largest = 0.0;
        for (int k = 0; k < 30; ++k) {
            const PhasePoint X = admissible_point(s.constraints, s.start_R, rng, 1.0);
            const CMatrix a = kappa_A(engine, A, X), b = kappa_A_divergence(engine, A, X);
            CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-5);
            largest = std::max(largest, a.cwiseAbs().maxCoeff());
        }
        CHECK(largest > 1e-2);  // the comparison is not between zeros
    }
}

TEST_CASE("thermal density gradient") {
    const System s = build_system("none", {{"dofs", 2}}, "two-level-linear", {{"delta", 0.4}}, nlohmann::json{1.0, 1.5});
    const auto r0 = thermal_rho0(0.8, s.model);
    CounterRng rng(22, 0);
    for (int k = 0; k < 10; ++k) {
        const PhasePoint X = free_point(s.constraints, s.start_R, rng, 1.0);
        const auto ga = r0.gradient(X), gf = fd_gradient(r0, X);
        for (std::size_t i = 0; i < ga.size(); ++i) CHECK((ga[i] - gf[i]).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("response source terms") {
    const System s = gallery("parabola-bead", nlohmann::json{1.0, 2.5});
    const DiracEngine engine(s.constraints);
    StationaryDensity sd;
    sd.beta = 1.2;
    CounterRng rng(23, 0);
    const auto Ap = momentum_coupling(Vector(Eigen::Vector2d(0.7, -1.3)), 2);
    const auto Ar = make_observable("position:1", s.model, 2);
    for (int k = 0; k < 10; ++k) {
        const PhasePoint X = admissible_point(s.constraints, s.start_R, rng, 1.0);
        const ResponseSource p = response_source(sd, s.model, engine, Ap, X, 1.0, true);
        // the det Z derivative and the compressibility term cancel for the canonical density
        CHECK(p.kappa.cwiseAbs().maxCoeff() > 1e-4);
        CHECK((p.measure + p.kappa).cwiseAbs().maxCoeff() <= 1e-10 * p.kappa.cwiseAbs().maxCoeff());
        CHECK((p.kappa - p.kappa.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
        const CMatrix sum = p.bracket + p.measure + p.kappa;
        CHECK((sum - sum.adjoint()).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, sum.cwiseAbs().maxCoeff()));

        const ResponseSource r = response_source(sd, s.model, engine, Ar, X, 1.0, true);
        CHECK(r.measure.cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.kappa.cwiseAbs().maxCoeff() == 0.0);
    }
    sd.mode = DensityMode::microcanonical;
    CHECK_THROWS_AS(response_source(sd, s.model, engine, Ar, admissible_point(s.constraints, s.start_R, rng), 1.0, true),
                    ConfigError);
}

TEST_CASE("bracket source integrates to zero on a grid") {
    // one classical dof, no constraints: Tr' int dX iL_A rho = 0 by parts
    const System s = gallery("none", 1.3);
    const DiracEngine engine(s.constraints);
    StationaryDensity sd;
    sd.beta = 0.9;
    for (const char* a : {"position:0", "momentum:0", "energy"}) {
        const auto A = make_observable(a, s.model, 1);
        const int nr = 121, np = 121;
        const double R0 = -7.0, R1 = 7.0, P0 = -9.0, P1 = 9.0;
        const double hr = (R1 - R0) / (nr - 1), hp = (P1 - P0) / (np - 1);
        double acc = 0.0, scale = 0.0;
        for (int i = 0; i < nr; ++i)
            for (int j = 0; j < np; ++j) {
                const PhasePoint X(Vector::Constant(1, R0 + i * hr), Vector::Constant(1, P0 + j * hp), Vector::Constant(1, 1.3));
                const ResponseSource src = response_source(sd, s.model, engine, A, X, 1.0, true);
                const double w = (i == 0 || i == nr - 1 ? 0.5 : 1.0) * (j == 0 || j == np - 1 ? 0.5 : 1.0);
                acc += w * src.bracket.trace().real();
                scale += w * src.bracket.cwiseAbs().sum();
            }
        CHECK(std::abs(acc) <= 1e-6 * scale);
    }
}

TEST_CASE("convolution") {
    std::vector<double> t;
    for (int k = 0; k <= 3000; ++k) t.push_back(1e-3 * k);
    std::vector<double> phi(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) phi[k] = std::exp(-t[k]);

    const Convolution step = convolve_response(t, phi, [](double) { return 1.0; });
    CHECK_FALSE(step.coarse_grid);
    for (std::size_t k = 0; k < t.size(); k += 250) CHECK(std::abs(step.values[k] - (1.0 - std::exp(-t[k]))) <= 1e-4);

    const Convolution zero = convolve_response(t, phi, [](double) { return 0.0; });
    for (double v : zero.values) CHECK(v == 0.0);

    const std::vector<double> none(t.size(), 0.0);
    for (double v : convolve_response(t, none, [](double) { return 1.0; }).values) CHECK(v == 0.0);

    // single-bin impulse at tau = 0: the trapezoid weight of the first node is half a bin
    const double A = 5.0, h = 1e-3;
    const Convolution kick = convolve_response(t, phi, [&](double tau) { return tau == 0.0 ? A : 0.0; });
    for (std::size_t k = 1; k < t.size(); k += 100) CHECK(kick.values[k] == doctest::Approx(phi[k] * A * h / 2).epsilon(1e-12));
    CHECK(kick.coarse_grid);

    const Convolution fast = convolve_response(t, phi, [](double tau) { return std::sin(5000.0 * tau); });
    CHECK(fast.coarse_grid);

    std::vector<double> bad = t;
    bad[3] += 1e-4;
    CHECK_THROWS_AS(convolve_response(bad, phi, [](double) { return 1.0; }), InvalidArgument);
}

TEST_CASE("response function estimator") {
    const System s = gallery("dimer-bond");
    StationaryDensity sd;
    sd.beta = 1.0;
    Dynamics dyn{s.model, s.constraints, {}, 1.0};
    dyn.cfg.dt = 5e-3;
    const TimeGrid grid{0.5, 0.1};
    const auto B = make_observable("identity", s.model, 4);
    const Perturbation pert{make_observable("position:0", s.model, 4), [](double) { return 0.0; }};
    ResponseOptions opt;
    opt.samples = 200;
    opt.seed = 4;
    const ResponseSeries r = response_phi(B, pert, sd, dyn, grid, s.start_R, opt);
    std::size_t failed = 0;
    for (const auto& [kind, count] : r.failures) failed += count;
    CHECK(r.used + r.truncated + failed == 200);
    CHECK(r.used >= 190);
    CHECK(r.max_measure_term == 0.0);
    CHECK(r.max_kappa_term == 0.0);
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        CHECK(std::abs(r.total.mean[k]) <= 3.0 * r.total.se[k] + 1e-12);
        CHECK(r.measure.mean[k] == 0.0);
        CHECK(r.kappa.mean[k] == 0.0);
    }
    // zero force gives zero response change
    const Convolution dB = convolve_response(r.times, r.total.mean, pert.force);
    for (double v : dB.values) CHECK(v == 0.0);

    // bitwise independent of the thread layout
    opt.parallel = false;
    const ResponseSeries serial = response_phi(B, pert, sd, dyn, grid, s.start_R, opt);
    CHECK(serial.total.mean == r.total.mean);

    sd.mode = DensityMode::microcanonical;
    CHECK_THROWS_AS(response_phi(B, pert, sd, dyn, grid, s.start_R, opt), ConfigError);
}

TEST_CASE("unconstrained regression against the reference code") {
    const System s = build_system("none", {{"dofs", 1}}, "two-level-linear", {{"delta", 0.2}}, 1.0);
    Dynamics dyn{s.model, s.constraints, {}, 1.0};
    dyn.cfg.dt = 2e-3;
    const reference::Dynamics ref{s.model, s.constraints.masses(), dyn.cfg.dt, 1.0, dyn.cfg.max_hops, true,
                                  dyn.cfg.gap_floor};
    const TimeGrid grid{1.0, 0.1};
    const std::vector<MatrixPhaseFunction> obs{make_observable("population:0", s.model, 1),
                                               make_observable("position:0", s.model, 1)};

    SUBCASE("propagator: identical hops for identical streams") {
        const InitialSampler init = [&](std::size_t, CounterRng& rng) {
            TrajectoryState st{PhasePoint(Vector::Constant(1, -1.0 + 0.5 * rng.uniform()),
                                          Vector::Constant(1, 2.0 + rng.uniform()), s.constraints.masses())};
            return st;
        };
        EnsembleOptions eo;
        eo.trajectories = 200;
        eo.seed = 8;
        const EnsembleResult gen = propagate_ensemble(init, dyn, obs, grid, eo, true);
        const reference::Ensemble rr = reference::propagate(init, ref, obs, grid, 200, 8);
        REQUIRE(gen.records.size() == rr.trajectories.size());
        std::size_t total_hops = 0;
        for (std::size_t i = 0; i < rr.trajectories.size(); ++i) {
            CHECK(gen.records[i].hops == rr.trajectories[i].hops);
            total_hops += rr.trajectories[i].hops.back();
        }
        CHECK(total_hops > 20);
        for (std::size_t o = 0; o < obs.size(); ++o)
            for (std::size_t k = 0; k < gen.times.size(); ++k)
                CHECK(std::abs(gen.mean[o][k] - rr.mean[o][k]) < 1e-9);
    }

    SUBCASE("stationary sampler against plain Metropolis") {
        StationaryDensity sd;
        sd.beta = 1.5;
        SamplerOptions so;
        so.thin = 5;
        so.step = 0.8;
        const auto gen = sample_stationary(sd, s.constraints, s.model, s.start_R, 20000, 3, so).samples;
        const auto ref_s = reference::sample_canonical(s.model, s.constraints.masses(), sd.beta, s.start_R, 20000, 3, 500, 5, 0.8);
        auto moments = [&](const std::vector<StationarySample>& v) {
            std::vector<double> e, x2;
            for (const auto& smp : v) {
                const AdiabaticFrame fr = adiabatize(s.model, smp.state.X.R());
                e.push_back(adiabatic_energy(smp.state.X, fr, smp.state.alpha));
                x2.push_back(smp.state.X.R()[0] * smp.state.X.R()[0]);
            }
            return std::pair{mean_and_se(e), mean_and_se(x2)};
        };
        const auto [eg, xg] = moments(gen);
        const auto [er, xr] = moments(ref_s);
        // generous: chains are correlated
        CHECK(std::abs(eg.mean - er.mean) < 6.0 * std::hypot(eg.se, er.se));
        CHECK(std::abs(xg.mean - xr.mean) < 6.0 * std::hypot(xg.se, xr.se));
    }

    SUBCASE("response estimator") {
        StationaryDensity sd;
        sd.beta = 1.0;
        const auto samples = reference::sample_canonical(s.model, s.constraints.masses(), 1.0, s.start_R, 100, 5);
        const auto B = make_observable("position:0", s.model, 1);
        const auto A = make_observable("energy", s.model, 1);
        const TimeGrid g{0.4, 0.1};
        const ResponseSeries gen = response_phi_from_samples(B, A, sd, dyn, g, samples, 6, true, true);
        const reference::Response rr = reference::response(B, A, 1.0, ref, g, samples, 6, true);
        for (std::size_t k = 0; k < gen.times.size(); ++k) {
            CHECK(std::abs(gen.total.mean[k] - rr.mean[k]) <= 1e-6 * (1.0 + std::abs(rr.mean[k])));
            CHECK(gen.measure.mean[k] == 0.0);
            CHECK(gen.kappa.mean[k] == 0.0);
        }
    }
}
