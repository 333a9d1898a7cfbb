#include "qcdirac/response.hpp"

#include <cmath>
#include <optional>

#include "qcdirac/errors.hpp"
#include "qcdirac/parallel.hpp"

namespace qcdirac {

CMatrix kappa_A(const DiracEngine& engine, const MatrixPhaseFunction& A, const PhasePoint& X) {
    const int n = A.n;
    if (engine.constraints().empty()) return CMatrix::Zero(n, n);
    const auto gA = gradient_of(A, X);
    const Matrix BD = engine.b_dirac(X);
    const Vector gz = engine.log_det_z_gradient(X.R());
    const Eigen::Index N = X.dofs();
    CMatrix out = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < N; ++i) {
        if (gz[i] == 0.0) continue;
        for (Eigen::Index j = 0; j < 2 * N; ++j)
            if (BD(i, j) != 0.0) out -= gz[i] * BD(i, j) * gA[j];
    }
    return out;
}

CMatrix kappa_A_divergence(const DiracEngine& engine, const MatrixPhaseFunction& A, const PhasePoint& X) {
    const auto gA = gradient_of(A, X);
    const Vector div = engine.divergence(X);
    CMatrix out = CMatrix::Zero(A.n, A.n);
    for (Eigen::Index j = 0; j < div.size(); ++j) out += div[j] * gA[j];
    return out;
}

ResponseSource response_source(const StationaryDensity& sd, const DiabaticModel& model, const DiracEngine& engine,
                               const MatrixPhaseFunction& A, const PhasePoint& X, double hbar, bool order_hbar) {
    sd.validate();
    if (sd.mode != DensityMode::canonical) throw ConfigError("response needs the canonical density");
    if (A.n != model.n) throw DimensionError("perturbation and model have different quantum dimensions");

    const MatrixPhaseFunction r0 = thermal_rho0(sd.beta, model);
    MatrixPhaseFunction rt = r0;
    if (order_hbar) {
        const MatrixPhaseFunction r1 = thermal_rho1(sd.beta, model);
        rt.value = [r0, r1, hbar](const PhasePoint& Y) { return CMatrix(r0(Y) + hbar * r1(Y)); };
        rt.gradient = [r0, r1, hbar](const PhasePoint& Y) {
            auto g = r0.gradient(Y);
            const auto g1 = fd_gradient(r1, Y);
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += hbar * g1[k];
            return g;
        };
    }

    const double detZ = measure_weight(engine, X);
    const CMatrix rho = rt(X);
    const Eigen::Index N = X.dofs();
    const int n = model.n;
    ResponseSource out;
    out.bracket = detZ * matrix_dirac_bracket(engine, A, rt, X, hbar);
    if (engine.constraints().empty()) {
        out.measure = CMatrix::Zero(n, n);
        out.kappa = CMatrix::Zero(n, n);
    } else {
        const Vector gz = detZ * engine.log_det_z_gradient(X.R());
        std::vector<CMatrix> gd(2 * N, CMatrix::Zero(n, n));
        for (Eigen::Index k = 0; k < N; ++k) gd[k] = gz[k] * CMatrix::Identity(n, n);
        const CMatrix AZ = matrix_bracket(gradient_of(A, X), engine.b_dirac(X), gd);
        out.measure = -0.5 * (AZ * rho + rho * AZ);
        const CMatrix k = kappa_A(engine, A, X);
        out.kappa = 0.5 * detZ * (k * rho + rho * k);
    }
    const AdiabaticFrame fr = adiabatize(model, X.R());
    out.density = detZ * (-sd.beta * (fr.E.array() + X.kinetic_energy())).exp().sum();
    return out;
}

namespace {

struct SampleContribution {
    // [term][time], terms: bracket, measure, kappa
    std::vector<std::vector<complex>> values;
    bool truncated = false;
    std::string failure;
    double measure = 0.0, kappa = 0.0, cancel = 0.0, antiherm = 0.0;
};

TermSeries reduce(const std::vector<std::vector<complex>>& per_sample) {
    TermSeries t;
    if (per_sample.empty()) return t;
    const std::size_t m = per_sample.size(), T = per_sample.front().size();
    std::vector<double> re(m), im(m);
    for (std::size_t k = 0; k < T; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            re[j] = per_sample[j][k].real();
            im[j] = per_sample[j][k].imag();
        }
        const MeanEstimate r = mean_and_se(re);
        t.mean.push_back(r.mean);
        t.se.push_back(r.se);
        t.mean_imag.push_back(mean_and_se(im).mean);
    }
    return t;
}

}  // namespace

ResponseSeries response_phi_from_samples(const MatrixPhaseFunction& B, const MatrixPhaseFunction& A,
                                         const StationaryDensity& sd, const Dynamics& dyn, const TimeGrid& grid,
                                         const std::vector<StationarySample>& samples, std::uint64_t seed,
                                         bool parallel, bool order_hbar) {
    sd.validate();
    if (sd.mode != DensityMode::canonical) throw ConfigError("response needs the canonical density");
    dyn.cfg.validate();
    const auto [spr, records] = grid.layout(dyn.cfg.dt);
    const DiracEngine engine(dyn.set);
    const int n = dyn.model.n;
    const std::size_t S = samples.size();
    std::vector<SampleContribution> slots(S);

    for_each_index(S, parallel, [&](std::size_t i) {
        SampleContribution& c = slots[i];
        c.values.assign(3, std::vector<complex>(records, complex(0.0, 0.0)));
        try {
            const PhasePoint& X = samples[i].state.X;
            const ResponseSource src = response_source(sd, dyn.model, engine, A, X, dyn.hbar, order_hbar);
            const AdiabaticFrame fr = adiabatize(dyn.model, X.R(), dyn.hbar, nullptr, dyn.cfg.gap_floor);
            const CMatrix U = fr.U.cast<complex>();
            const CMatrix W[3] = {U.transpose() * src.bracket * U, U.transpose() * src.measure * U,
                                  U.transpose() * src.kappa * U};
            c.measure = src.measure.cwiseAbs().maxCoeff();
            c.kappa = src.kappa.cwiseAbs().maxCoeff();
            c.cancel = (src.measure + src.kappa).cwiseAbs().maxCoeff();
            const CMatrix sum = src.bracket + src.measure + src.kappa;
            c.antiherm = (sum - sum.adjoint()).cwiseAbs().maxCoeff();
            const double scale = samples[i].weight / src.density;

            for (int a = 0; a < n; ++a)
                for (int a2 = 0; a2 < n; ++a2) {
                    if (W[0](a, a2) == 0.0 && W[1](a, a2) == 0.0 && W[2](a, a2) == 0.0) continue;
                    CounterRng rng(seed, static_cast<std::uint64_t>(i) * n * n + a * n + a2);
                    TrajectoryState st{X};
                    st.alpha = a2;
                    st.alpha2 = a;
                    st.stream = i;
                    const TrajectoryRecord rec = run_trajectory(dyn, st, rng, {B}, grid);
                    if (rec.truncated) {
                        c.truncated = true;
                        return;
                    }
                    for (int t = 0; t < 3; ++t)
                        for (long k = 0; k < records; ++k) c.values[t][k] -= scale * rec.values[0][k] * W[t](a, a2);
                }
        } catch (const InvalidArgument&) {
            throw;
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            c.failure = failure_kind(e);
        }
    });

    ResponseSeries out;
    for (long k = 0; k < records; ++k) out.times.push_back(static_cast<double>(k * spr) * dyn.cfg.dt);
    std::vector<std::vector<complex>> terms[3], total;
    for (std::size_t i = 0; i < S; ++i) {
        const auto& c = slots[i];
        if (!c.failure.empty()) {
            ++out.failures[c.failure];
            continue;
        }
        if (c.truncated) {
            ++out.truncated;
            continue;
        }
        for (int t = 0; t < 3; ++t) terms[t].push_back(c.values[t]);
        std::vector<complex> sum(records);
        for (long k = 0; k < records; ++k) sum[k] = c.values[0][k] + c.values[1][k] + c.values[2][k];
        total.push_back(std::move(sum));
        out.max_measure_term = std::max(out.max_measure_term, c.measure);
        out.max_kappa_term = std::max(out.max_kappa_term, c.kappa);
        out.max_measure_plus_kappa = std::max(out.max_measure_plus_kappa, c.cancel);
        out.max_antihermitian = std::max(out.max_antihermitian, c.antiherm);
    }
    out.used = total.size();
    if (out.used == 0) throw RunError("no usable samples for the response estimate");
    out.bracket = reduce(terms[0]);
    out.measure = reduce(terms[1]);
    out.kappa = reduce(terms[2]);
    out.total = reduce(total);
    return out;
}

ResponseSeries response_phi(const MatrixPhaseFunction& B, const Perturbation& pert, const StationaryDensity& sd,
                            const Dynamics& dyn, const TimeGrid& grid, const Vector& start_R,
                            const ResponseOptions& options) {
    sd.validate();
    if (sd.mode != DensityMode::canonical) throw ConfigError("response needs the canonical density");
    SamplerOptions so = options.sampler;
    so.parallel = options.parallel;
    const SampleSet set = sample_stationary(sd, dyn.set, dyn.model, start_R, options.samples, options.seed, so);
    ResponseSeries out = response_phi_from_samples(B, pert.A, sd, dyn, grid, set.samples, options.seed,
                                                   options.parallel, options.order_hbar);
    out.acceptance = set.acceptance();
    return out;
}

Convolution convolve_response(const std::vector<double>& times, const std::vector<double>& phi,
                              const std::function<double(double)>& force) {
    if (times.size() != phi.size()) throw DimensionError("response series and time grid differ in length");
    Convolution out;
    if (times.empty()) return out;
    if (times.front() != 0.0) throw InvalidArgument("response grid must start at t = 0");
    const std::size_t T = times.size();
    const double h = T > 1 ? times[1] - times[0] : 0.0;
    for (std::size_t k = 1; k < T; ++k)
        if (!(times[k] > times[k - 1]) || std::abs((times[k] - times[k - 1]) - h) > 1e-9 * std::max(1.0, h))
            throw InvalidArgument("response grid must be uniform and increasing");

    std::vector<double> F(T);
    double fmax = 0.0;
    for (std::size_t j = 0; j < T; ++j) {
        F[j] = force(times[j]);
        fmax = std::max(fmax, std::abs(F[j]));
    }
    for (std::size_t j = 0; j + 1 < T && fmax > 0.0; ++j) {
        const double mid = force(0.5 * (times[j] + times[j + 1]));
        if (std::abs(mid - 0.5 * (F[j] + F[j + 1])) > 1e-2 * fmax) {
            out.coarse_grid = true;
            break;
        }
    }

    out.values.assign(T, 0.0);
    for (std::size_t k = 1; k < T; ++k) {
        double acc = 0.5 * (phi[k] * F[0] + phi[0] * F[k]);
        for (std::size_t j = 1; j < k; ++j) acc += phi[k - j] * F[j];
        out.values[k] = h * acc;
    }
    return out;
}

}  // namespace qcdirac
