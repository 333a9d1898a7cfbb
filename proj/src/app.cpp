#include "qcdirac/app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "qcdirac/dirac.hpp"
#include "qcdirac/errors.hpp"
#include "qcdirac/observables.hpp"
#include "qcdirac/oracles.hpp"
#include "qcdirac/propagator.hpp"
#include "qcdirac/response.hpp"
#include "qcdirac/statmech.hpp"

namespace qcdirac {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Vector uniform_vector(CounterRng& rng, Eigen::Index n, double scale) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * (2.0 * rng.uniform() - 1.0);
    return v;
}

PhasePoint admissible(const ConstraintSet& set, const Vector& start, CounterRng& rng) {
    for (int tries = 0; tries < 1000; ++tries) {
        const auto R = project_positions(set, start + uniform_vector(rng, set.dofs(), 0.5));
        if (!R) continue;
        const PhasePoint X(*R, uniform_vector(rng, set.dofs(), 1.0), set.masses());
        return X.with_P(project_momenta(set, X));
    }
    throw RunError("could not find an admissible point near the start configuration");
}

PhasePoint off_manifold(const ConstraintSet& set, const Vector& start, CounterRng& rng) {
    return {start + uniform_vector(rng, set.dofs(), 0.5), uniform_vector(rng, set.dofs(), 1.0), set.masses()};
}

CheckItem verdict(std::string name, double measured, double tol, std::string detail = {}) {
    const bool ok = std::isfinite(measured) && measured <= tol;
    return {std::move(name), ok ? "pass" : "fail", measured, tol, std::move(detail)};
}

CheckItem skipped(std::string name, std::string why) { return {std::move(name), "skipped", 0.0, 0.0, std::move(why)}; }

StationaryDensity canonical(const RunConfig& c) {
    StationaryDensity sd;
    sd.beta = c.beta;
    sd.validate();
    return sd;
}

SamplerOptions sampler_options(const RunConfig& c) {
    SamplerOptions o;
    o.chains = c.sample.chains;
    o.burn_in = c.sample.burn_in;
    o.thin = c.sample.thin;
    o.step = c.sample.step;
    return o;
}

Dynamics dynamics(const RunConfig& c, const System& s) { return {s.model, s.constraints, c.integrator, c.hbar}; }

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_row(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt(v[i]);
    }
    return out + "\n";
}

json failures_json(const std::map<std::string, std::size_t>& f) {
    json j = json::object();
    for (const auto& [k, v] : f) j[k] = v;
    return j;
}

std::function<double(double)> force_function(const ForceConfig& f) {
    const double A = f.amplitude, w = f.frequency;
    if (f.kind == "step") return [A](double t) { return t >= 0.0 ? A : 0.0; };
    if (f.kind == "impulse") return [A](double t) { return t == 0.0 ? A : 0.0; };
    if (f.kind == "sine") return [A, w](double t) { return A * std::sin(w * t); };
    return [](double) { return 0.0; };
}

// ---- individual checks ----

CheckItem check_model_gradient(const System& s, std::size_t points, std::uint64_t seed) {
    CounterRng rng(seed, 100);
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const Vector R = s.start_R + uniform_vector(rng, s.start_R.size(), 0.5);
        const auto g = s.model.grad_h(R);
        for (Eigen::Index k = 0; k < R.size(); ++k) {
            const double h = fd_step(R[k]);
            Vector a = R, b = R;
            a[k] += h;
            b[k] -= h;
            const Matrix fd = (s.model.h(a) - s.model.h(b)) / (2.0 * h);
            worst = std::max(worst, (fd - g[k]).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
        }
    }
    return verdict("model-gradient", worst, 1e-6, "analytic dh/dR against central differences");
}

CheckItem check_constraint_gradient(const System& s, std::size_t points, std::uint64_t seed) {
    const auto& set = s.constraints;
    if (set.empty()) return skipped("constraint-gradient", "no constraints");
    CounterRng rng(seed, 101);
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const Vector R = s.start_R + uniform_vector(rng, set.dofs(), 0.5);
        for (const auto& c : set.constraints()) {
            const Vector g = c.grad(R);
            const Matrix H = c.hessian_at(R);
            for (Eigen::Index k = 0; k < R.size(); ++k) {
                const double h = fd_step(R[k]);
                Vector a = R, b = R;
                a[k] += h;
                b[k] -= h;
                const double fd = (c.sigma(a) - c.sigma(b)) / (2.0 * h);
                const Vector fdh = (c.grad(a) - c.grad(b)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(fd)));
                worst = std::max(worst, (fdh - H.col(k)).cwiseAbs().maxCoeff() / std::max(1.0, fdh.cwiseAbs().maxCoeff()));
            }
        }
    }
    return verdict("constraint-gradient", worst, 1e-6, "gradient and Hessian against central differences");
}

CheckItem check_dual_form(const System& s, const DiracEngine& e, std::size_t points, std::uint64_t seed) {
    if (s.constraints.empty()) return skipped("dual-form-bracket", "no constraints");
    CounterRng rng(seed, 102);
    double worst = 0.0;
    const Eigen::Index dim = 2 * s.constraints.dofs();
    for (std::size_t t = 0; t < points; ++t) {
        const PhasePoint X = admissible(s.constraints, s.start_R, rng);
        const auto a = Polynomial::random(rng, dim).function();
        const auto b = Polynomial::random(rng, dim).function();
        worst = std::max(worst, std::abs(dirac_bracket(e, a, b, X) - dirac_bracket_equiv(e, a, b, X)));
    }
    return verdict("dual-form-bracket", worst, 1e-9, "projector form against the C^-1 form, random polynomials");
}

CheckItem check_annihilation(const System& s, const DiracEngine& e, std::size_t points, std::uint64_t seed) {
    if (s.constraints.empty()) return skipped("constraint-annihilation", "no constraints");
    CounterRng rng(seed, 103);
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const PhasePoint X = off_manifold(s.constraints, s.start_R, rng);
        const Matrix xi = xi_jacobian(s.constraints.geometry(X.R()), X);
        worst = std::max(worst, (e.b_dirac(X) * xi.transpose()).cwiseAbs().maxCoeff());
    }
    return verdict("constraint-annihilation", worst, 1e-9, "max |B^D dxi/dX|");
}

CheckItem check_reduction(const System& s, const DiracEngine& e, std::size_t points, std::uint64_t seed) {
    CounterRng rng(seed, 104);
    const Eigen::Index N = s.constraints.dofs();
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const PhasePoint X = off_manifold(s.constraints, s.start_R, rng);
        worst = std::max(worst, (e.b_dirac(X) - symplectic_matrix(N)).cwiseAbs().maxCoeff());
        const auto a = Polynomial::random(rng, 2 * N).function();
        const auto b = Polynomial::random(rng, 2 * N).function();
        worst = std::max(worst, std::abs(dirac_bracket(e, a, b, X) - poisson_bracket(a, b, X)));
    }
    return verdict("bracket-reduction", worst, 1e-13, "without constraints the Dirac bracket is the Poisson bracket");
}

CheckItem check_invariance(const System& s, const DiracEngine& e, double hbar, std::size_t points,
                           std::uint64_t seed) {
    if (s.constraints.empty()) return skipped("constraint-invariance", "no constraints");
    CounterRng rng(seed, 105);
    const auto H = hamiltonian_matrix(s.model);
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const PhasePoint X = admissible(s.constraints, s.start_R, rng);
        const Polynomial f = Polynomial::random(rng, 2 * s.constraints.size(), 4, 3);
        const auto chi = constraint_function(s.constraints, f, s.model.n);
        worst = std::max(worst, matrix_dirac_bracket(e, H, chi, X, hbar).cwiseAbs().maxCoeff());
    }
    return verdict("constraint-invariance", worst, 1e-10, "max |(H0, f(sigma, sigma_dot))_D|");
}

CheckItem check_kappa0(const System& s, const DiracEngine& e, std::size_t points, std::uint64_t seed) {
    CounterRng rng(seed, 106);
    const auto H = hamiltonian_matrix(s.model);
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const PhasePoint X = admissible(s.constraints, s.start_R, rng);
        worst = std::max(worst, std::abs(compressibility_kappa0(e, H, X) - log_det_z_rate(e, X)));
    }
    return verdict("kappa0-dual", worst, 1e-5, "divergence form against -d/dt ln det Z");
}

CheckItem check_hellmann_feynman(const System& s, double hbar, std::size_t points, std::uint64_t seed) {
    CounterRng rng(seed, 107);
    double worst = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
        const Vector R = s.start_R + uniform_vector(rng, s.start_R.size(), 0.5);
        const AdiabaticFrame fr = adiabatize(s.model, R, hbar);
        for (Eigen::Index k = 0; k < R.size(); ++k) {
            const double h = fd_step(R[k]);
            Vector a = R, b = R;
            a[k] += h;
            b[k] -= h;
            const Vector dE = (adiabatize(s.model, a, hbar).E - adiabatize(s.model, b, hbar).E) / (2.0 * h);
            for (int c = 0; c < fr.n(); ++c)
                worst = std::max(worst, std::abs(fr.force(c)[k] + dE[c]) / std::max(1.0, std::abs(dE[c])));
        }
    }
    return verdict("hellmann-feynman", worst, 1e-6, "adiabatic forces against -dE/dR");
}

CheckItem check_jumps(const System& s, const IntegratorConfig& cfg, double hbar, std::size_t points,
                      std::uint64_t seed) {
    CounterRng rng(seed, 108);
    double worst = 0.0;
    std::size_t rule_mismatch = 0, accepted = 0, frustrated = 0;
    for (std::size_t t = 0; t < points; ++t) {
        PhasePoint X = admissible(s.constraints, s.start_R, rng);
        X = X.with_P(2.0 * X.P());
        const AdiabaticFrame fr = adiabatize(s.model, X.R(), hbar);
        for (int a = 0; a < fr.n(); ++a)
            for (int b = 0; b < fr.n(); ++b) {
                if (a == b) continue;
                const JumpRule rule = jump_rule(fr, a, b, s.constraints, X, cfg.frequency_mode);
                if (rule.direction.norm() == 0.0) continue;
                const double pd = X.P().dot(rule.direction);
                const bool expect = pd * pd + rule.shift < 0.0;
                bool threw = false;
                try {
                    const PhasePoint Y = momentum_jump(X, rule.direction, rule.shift);
                    const double pd2 = Y.P().dot(rule.direction);
                    worst = std::max(worst, std::abs(pd2 * pd2 - pd * pd - rule.shift) /
                                                std::max(1.0, std::abs(rule.shift)));
                    ++accepted;
                } catch (const FrustratedHop&) {
                    threw = true;
                    ++frustrated;
                }
                if (threw != expect || rule.frustrated != expect) ++rule_mismatch;
            }
    }
    CheckItem item = verdict("momentum-jump", rule_mismatch ? INFINITY : worst, 1e-12,
                             std::to_string(accepted) + " accepted, " + std::to_string(frustrated) + " frustrated, " +
                                 std::to_string(rule_mismatch) + " frustration-rule mismatches");
    return item;
}

CheckItem check_fredholm(const RunConfig& c, const System& s, const DiracEngine& e) {
    const StationaryDensity sd = canonical(c);
    const std::size_t n = std::max<std::size_t>(c.check.points * 10, 100);
    const SampleSet set = sample_stationary(sd, s.constraints, s.model, s.start_R, n, c.seed, sampler_options(c));
    const FredholmEstimate est = fredholm_check(sd, e, s.model, set.samples, c.integrator.frequency_mode);
    // measured: worst |mean| in units of (3 se + 1e-12)
    double worst = 0.0;
    for (const auto& m : est.per_test) worst = std::max(worst, std::abs(m.mean) / (3.0 * m.se + 1e-12));
    return verdict("fredholm", worst, 1.0, std::to_string(n) + " samples; f in {1, H, H^2}; |mean| / (3 se)");
}

CheckItem check_kappa_A(const RunConfig& c, const System& s, const DiracEngine& e) {
    CounterRng rng(c.seed, 109);
    const auto A = make_observable("momentum:0", s.model, s.constraints.dofs());
    double worst = 0.0;
    for (std::size_t t = 0; t < c.check.points; ++t) {
        const PhasePoint X = admissible(s.constraints, s.start_R, rng);
        worst = std::max(worst, (kappa_A(e, A, X) - kappa_A_divergence(e, A, X)).cwiseAbs().maxCoeff());
    }
    return verdict("kappa-A-dual", worst, 1e-5, "closed form against the divergence form, A = momentum:0");
}

}  // namespace

// ---- report ----

bool CheckReport::passed() const {
    for (const auto& i : items)
        if (i.status == "fail") return false;
    return true;
}

const CheckItem* CheckReport::find(const std::string& name) const {
    for (const auto& i : items)
        if (i.name == name) return &i;
    return nullptr;
}

json CheckReport::to_json() const {
    json j;
    j["passed"] = passed();
    j["checks"] = json::array();
    for (const auto& i : items)
        j["checks"].push_back({{"name", i.name},
                               {"status", i.status},
                               {"measured", i.measured},
                               {"tolerance", i.tolerance},
                               {"detail", i.detail}});
    return j;
}

System build_system(const RunConfig& c) {
    try {
        return qcdirac::build_system(c.constraints, c.constraint_params, c.model, c.model_params, c.masses);
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

CheckReport run_check(const RunConfig& c) { return run_check(c, build_system(c)); }

CheckReport run_check(const RunConfig& c, const System& s) {
    const DiracEngine e(s.constraints);
    const std::size_t n = c.check.points;
    CheckReport r;
    auto guarded = [&r](const std::string& name, auto&& fn) {
        try {
            r.items.push_back(fn());
        } catch (const std::exception& ex) {
            r.items.push_back({name, "fail", INFINITY, 0.0, std::string("error: ") + ex.what()});
        }
    };
    guarded("model-gradient", [&] { return check_model_gradient(s, n, c.seed); });
    guarded("constraint-gradient", [&] { return check_constraint_gradient(s, n, c.seed); });
    guarded("dual-form-bracket", [&] { return check_dual_form(s, e, n, c.seed); });
    guarded("constraint-annihilation", [&] { return check_annihilation(s, e, n, c.seed); });
    if (s.constraints.empty()) guarded("bracket-reduction", [&] { return check_reduction(s, e, n, c.seed); });
    guarded("constraint-invariance", [&] { return check_invariance(s, e, c.hbar, n, c.seed); });
    guarded("kappa0-dual", [&] { return check_kappa0(s, e, n, c.seed); });
    guarded("hellmann-feynman", [&] { return check_hellmann_feynman(s, c.hbar, n, c.seed); });
    guarded("momentum-jump", [&] { return check_jumps(s, c.integrator, c.hbar, n, c.seed); });
    guarded("fredholm", [&] { return check_fredholm(c, s, e); });
    guarded("kappa-A-dual", [&] { return check_kappa_A(c, s, e); });
    return r;
}

// ---- commands ----

namespace {

Artifacts run_propagate(const RunConfig& c, const System& s) {
    const auto& pc = c.propagate;
    const Eigen::Index N = s.constraints.dofs();
    std::vector<MatrixPhaseFunction> obs;
    for (const auto& name : pc.observables) obs.push_back(make_observable(name, s.model, N));
    if (pc.initial.surface >= s.model.n) throw ConfigError("field propagate.initial.surface: out of range");

    InitialSampler initial;
    double acceptance = -1.0;
    if (pc.initial.kind == "stationary") {
        if (!pc.initial.R.empty() || !pc.initial.P.empty())
            throw ConfigError("field propagate.initial: R and P only apply to kind 'point'");
        auto set = std::make_shared<SampleSet>(sample_stationary(canonical(c), s.constraints, s.model, s.start_R,
                                                                 c.trajectories, c.seed, sampler_options(c)));
        acceptance = set->acceptance();
        const int surf = pc.initial.surface;
        initial = [set, surf](std::size_t i, CounterRng&) {
            TrajectoryState st = set->samples.at(i).state;
            if (surf >= 0) st.alpha = st.alpha2 = surf;
            return st;
        };
    } else {
        auto to_vec = [N](const std::vector<double>& v, const char* field) {
            if (static_cast<Eigen::Index>(v.size()) != N)
                throw ConfigError(std::string("field propagate.initial.") + field + ": expected " + std::to_string(N) +
                                  " entries");
            return Vector(Eigen::Map<const Vector>(v.data(), N));
        };
        Vector R = pc.initial.R.empty() ? s.start_R : to_vec(pc.initial.R, "R");
        const auto proj = project_positions(s.constraints, R);
        if (!proj) throw ConfigError("field propagate.initial.R: cannot be projected onto the constraints");
        R = *proj;
        Vector P = pc.initial.P.empty() ? Vector::Zero(N) : to_vec(pc.initial.P, "P");
        PhasePoint X(R, P, s.constraints.masses());
        X = X.with_P(project_momenta(s.constraints, X));
        const int surf = std::max(pc.initial.surface, 0);
        initial = [X, surf](std::size_t, CounterRng&) {
            TrajectoryState st{X};
            st.alpha = st.alpha2 = surf;
            return st;
        };
    }

    const TimeGrid grid{pc.t_end, pc.interval};
    const EnsembleResult res =
        propagate_ensemble(initial, dynamics(c, s), obs, grid, {c.trajectories, c.seed, true});

    Artifacts a;
    std::string header = "time";
    for (const auto& name : pc.observables)
        header += "," + name + ".re," + name + ".im," + name + ".se_re," + name + ".se_im";
    a.series = header + ",mean_hops,max_sigma,max_sigma_dot\n";
    for (std::size_t k = 0; k < res.times.size(); ++k) {
        std::vector<double> row{res.times[k]};
        for (std::size_t o = 0; o < obs.size(); ++o) {
            row.push_back(res.mean[o][k].real());
            row.push_back(res.mean[o][k].imag());
            row.push_back(res.se_re[o][k]);
            row.push_back(res.se_im[o][k]);
        }
        row.push_back(res.mean_hops[k]);
        row.push_back(res.max_sigma[k]);
        row.push_back(res.max_sigma_dot[k]);
        a.series += csv_row(row);
    }
    json sm;
    sm["command"] = "propagate";
    sm["trajectories"] = c.trajectories;
    sm["used"] = res.used;
    sm["truncated"] = res.truncated;
    sm["failures"] = failures_json(res.failures);
    if (acceptance >= 0.0) sm["sampler_acceptance"] = acceptance;
    double ms = 0.0, msd = 0.0;
    for (double v : res.max_sigma) ms = std::max(ms, v);
    for (double v : res.max_sigma_dot) msd = std::max(msd, v);
    sm["max_abs_sigma"] = ms;
    sm["max_abs_sigma_dot"] = msd;
    json fin = json::object();
    if (!res.times.empty())
        for (std::size_t o = 0; o < obs.size(); ++o)
            fin[pc.observables[o]] = {{"re", res.mean[o].back().real()}, {"im", res.mean[o].back().imag()}};
    sm["final"] = fin;
    a.summary = sm.dump(2) + "\n";
    return a;
}

Artifacts run_sample(const RunConfig& c, const System& s) {
    const StationaryDensity sd = canonical(c);
    const SampleSet set =
        sample_stationary(sd, s.constraints, s.model, s.start_R, c.sample.count, c.seed, sampler_options(c));
    const Eigen::Index N = s.constraints.dofs();
    const int l = s.constraints.size();

    Artifacts a;
    std::string header;
    for (Eigen::Index i = 0; i < N; ++i) header += "R" + std::to_string(i) + ",";
    for (Eigen::Index i = 0; i < N; ++i) header += "P" + std::to_string(i) + ",";
    a.series = header + "surface,weight\n";
    std::vector<double> twice_k(set.samples.size());
    double ms = 0.0, msd = 0.0;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const auto& smp = set.samples[i];
        const PhasePoint& X = smp.state.X;
        std::vector<double> row(X.R().data(), X.R().data() + N);
        row.insert(row.end(), X.P().data(), X.P().data() + N);
        row.push_back(smp.state.alpha);
        row.push_back(smp.weight);
        a.series += csv_row(row);
        twice_k[i] = 2.0 * X.kinetic_energy();
        if (l > 0) {
            ms = std::max(ms, s.constraints.sigma(X.R()).cwiseAbs().maxCoeff());
            msd = std::max(msd, s.constraints.sigma_dot(X).cwiseAbs().maxCoeff());
        }
    }
    const MeanEstimate eq = mean_and_se(twice_k);
    const double expected = static_cast<double>(N - l) / c.beta;
    json sm;
    sm["command"] = "sample";
    sm["samples"] = set.samples.size();
    sm["acceptance"] = set.acceptance();
    sm["proposed"] = set.proposed;
    sm["projection_failures"] = set.projection_failures;
    sm["reverse_failures"] = set.reverse_failures;
    sm["max_abs_sigma"] = ms;
    sm["max_abs_sigma_dot"] = msd;
    sm["equipartition"] = {{"mean_p_dot_v", eq.mean},
                           {"se", eq.se},
                           {"expected", expected},
                           {"within_3se", std::abs(eq.mean - expected) <= 3.0 * eq.se}};
    if (c.sample.fredholm) {
        const DiracEngine e(s.constraints);
        const FredholmEstimate est = fredholm_check(sd, e, s.model, set.samples, c.integrator.frequency_mode);
        const char* names[] = {"1", "H", "H^2"};
        json f = json::array();
        for (std::size_t k = 0; k < est.per_test.size(); ++k)
            f.push_back({{"f", names[k]},
                         {"mean", est.per_test[k].mean},
                         {"se", est.per_test[k].se},
                         {"within_3se", std::abs(est.per_test[k].mean) <= 3.0 * est.per_test[k].se + 1e-12}});
        sm["fredholm"] = f;
    }
    a.summary = sm.dump(2) + "\n";
    return a;
}

Artifacts run_respond(const RunConfig& c, const System& s) {
    const auto& rc = c.respond;
    const Eigen::Index N = s.constraints.dofs();
    const auto B = make_observable(rc.B, s.model, N);
    const Perturbation pert{make_observable(rc.A, s.model, N), force_function(rc.force)};
    ResponseOptions opt;
    opt.samples = rc.samples;
    opt.seed = c.seed;
    opt.order_hbar = rc.order_hbar;
    opt.sampler = sampler_options(c);
    const ResponseSeries r = response_phi(B, pert, canonical(c), dynamics(c, s), {rc.t_end, rc.interval}, s.start_R, opt);
    const Convolution conv = convolve_response(r.times, r.total.mean, pert.force);

    Artifacts a;
    a.series = "time,bracket,measure,compressibility,total,total_se,delta_B\n";
    for (std::size_t k = 0; k < r.times.size(); ++k)
        a.series += csv_row({r.times[k], r.bracket.mean[k], r.measure.mean[k], r.kappa.mean[k], r.total.mean[k],
                             r.total.se[k], conv.values[k]});
    json sm;
    sm["command"] = "respond";
    sm["samples"] = rc.samples;
    sm["used"] = r.used;
    sm["truncated"] = r.truncated;
    sm["failures"] = failures_json(r.failures);
    sm["sampler_acceptance"] = r.acceptance;
    sm["max_measure_term"] = r.max_measure_term;
    sm["max_compressibility_term"] = r.max_kappa_term;
    sm["max_measure_plus_compressibility"] = r.max_measure_plus_kappa;
    sm["max_antihermitian_source"] = r.max_antihermitian;
    sm["coarse_force_grid"] = conv.coarse_grid;
    a.summary = sm.dump(2) + "\n";
    return a;
}

}  // namespace

Artifacts run_command(const RunConfig& c, const std::string& command) {
    const System s = build_system(c);
    Artifacts a;
    if (command == "propagate")
        a = run_propagate(c, s);
    else if (command == "sample")
        a = run_sample(c, s);
    else if (command == "respond")
        a = run_respond(c, s);
    else
        throw ConfigError("unknown command '" + command + "'");
    a.echo = config_echo(c);
    return a;
}

void write_artifacts(const Artifacts& art, const fs::path& out) {
    const fs::path target = out.empty() ? fs::path(".") : out;
    const fs::path parent = fs::absolute(target).parent_path();
    const fs::path staging = parent / ("." + fs::absolute(target).filename().string() + ".staging-" +
                                       std::to_string(static_cast<long>(::getpid())));
    auto put = [&staging](const char* name, const std::string& bytes) {
        const fs::path p = staging / name;
        std::ofstream f(p, std::ios::binary);
        f << bytes;
        f.close();
        if (!f) throw RunError("cannot write " + p.string());
    };
    std::error_code ec;
    try {
        fs::create_directories(parent, ec);
        if (ec) throw RunError("cannot create " + parent.string() + ": " + ec.message());
        fs::remove_all(staging, ec);
        if (!fs::create_directory(staging, ec) || ec)
            throw RunError("cannot create " + staging.string() + ": " + ec.message());
        std::vector<const char*> names;
        if (!art.series.empty()) {
            put("series.csv", art.series);
            names.push_back("series.csv");
        }
        put("summary.json", art.summary);
        names.push_back("summary.json");
        put("config.echo", art.echo);
        names.push_back("config.echo");

        if (!fs::exists(target)) {
            fs::rename(staging, target, ec);
            if (ec) throw RunError("cannot move outputs to " + target.string() + ": " + ec.message());
            return;
        }
        if (!fs::is_directory(target)) throw RunError("output path " + target.string() + " is not a directory");
        for (const char* n : names) {
            fs::rename(staging / n, target / n, ec);
            if (ec) throw RunError("cannot move " + (staging / n).string() + " to " + target.string() + ": " +
                                   ec.message());
        }
        fs::remove_all(staging, ec);
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
}

}  // namespace qcdirac
