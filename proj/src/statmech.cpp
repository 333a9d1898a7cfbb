#include "qcdirac/statmech.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "qcdirac/errors.hpp"

namespace qcdirac {

void StationaryDensity::validate() const {
    if (!(Q > 0.0) || !std::isfinite(Q)) throw ConfigError("density normalization Q must be positive");
    if (!(delta_width > 0.0) || !std::isfinite(delta_width)) throw ConfigError("delta width must be positive");
    if (mode == DensityMode::canonical && (!(beta > 0.0) || !std::isfinite(beta)))
        throw ConfigError("canonical density needs a positive finite beta");
    if (mode == DensityMode::microcanonical && !std::isfinite(energy_shell))
        throw ConfigError("microcanonical density needs a finite energy shell");
}

double adiabatic_energy(const PhasePoint& X, const AdiabaticFrame& frame, int a) {
    return X.kinetic_energy() + frame.E[a];
}

double softened_delta(double x, double w) {
    return std::exp(-0.5 * (x / w) * (x / w)) / (w * std::sqrt(2.0 * std::numbers::pi));
}

namespace {

// det Z / Q times the softened constraint deltas.
double manifold_factor(const StationaryDensity& sd, const PhasePoint& X, const DiracEngine& engine) {
    const auto& set = engine.constraints();
    double f = measure_weight(engine, X) / sd.Q;
    if (set.empty()) return f;
    const Vector s = set.sigma(X.R());
    const Vector sd_ = set.sigma_dot(X);
    for (Eigen::Index p = 0; p < s.size(); ++p)
        f *= softened_delta(s[p], sd.delta_width) * softened_delta(sd_[p], sd.delta_width);
    return f;
}

double surface_weight(const StationaryDensity& sd, double energy) {
    if (sd.mode == DensityMode::canonical) return std::exp(-sd.beta * energy);
    return softened_delta(energy - sd.energy_shell, sd.delta_width);
}

}  // namespace

double rho0(const StationaryDensity& sd, const PhasePoint& X, int a, int b, const AdiabaticFrame& frame,
            const DiracEngine& engine) {
    sd.validate();
    if (a < 0 || b < 0 || a >= frame.n() || b >= frame.n()) throw InvalidArgument("surface index out of range");
    if (a != b) return 0.0;
    return manifold_factor(sd, X, engine) * surface_weight(sd, adiabatic_energy(X, frame, a));
}

double rho1_bracket(double beta, double x) {
    const double y = beta * x;
    if (std::abs(y) < 0.5) {
        // sum_m (-1)^m (m - 1) / (2 (m + 1)!) y^m, m >= 2
        double s = 0.0, yp = y, fact = 2.0;
        for (int m = 2; m <= 24; ++m) {
            yp *= y;
            fact *= (m + 1);
            s += ((m % 2) ? -1.0 : 1.0) * (m - 1) / (2.0 * fact) * yp;
        }
        return beta * s;
    }
    const double e = std::exp(-y);
    return -(1.0 - e) / x + 0.5 * beta * (1.0 + e);
}

complex rho1(const StationaryDensity& sd, const PhasePoint& X, int a, int b, const AdiabaticFrame& frame,
             const DiracEngine& engine) {
    sd.validate();
    if (sd.mode != DensityMode::canonical) throw ConfigError("order-hbar density is defined for the canonical mode");
    if (a < 0 || b < 0 || a >= frame.n() || b >= frame.n()) throw InvalidArgument("surface index out of range");
    if (a == b) return 0.0;
    const double vd = X.velocity().dot(frame.d(a, b));
    const double r0b = rho0(sd, X, b, b, frame, engine);
    return complex(0.0, -vd * r0b * rho1_bracket(sd.beta, frame.E[a] - frame.E[b]));
}

MatrixPhaseFunction rho0_matrix(const StationaryDensity& sd, const DiabaticModel& model, const DiracEngine& engine) {
    sd.validate();
    MatrixPhaseFunction f;
    f.n = model.n;
    f.value = [sd, model, engine](const PhasePoint& X) {
        const AdiabaticFrame fr = adiabatize(model, X.R());
        CMatrix out = CMatrix::Zero(model.n, model.n);
        for (int a = 0; a < model.n; ++a)
            out += rho0(sd, X, a, a, fr, engine) * (fr.U.col(a) * fr.U.col(a).transpose()).cast<complex>();
        return out;
    };
    return f;
}

MatrixPhaseFunction rho1_matrix(const StationaryDensity& sd, const DiabaticModel& model, const DiracEngine& engine) {
    sd.validate();
    MatrixPhaseFunction f;
    f.n = model.n;
    f.value = [sd, model, engine](const PhasePoint& X) {
        const AdiabaticFrame fr = adiabatize(model, X.R());
        CMatrix ad(model.n, model.n);
        for (int a = 0; a < model.n; ++a)
            for (int b = 0; b < model.n; ++b) ad(a, b) = rho1(sd, X, a, b, fr, engine);
        const CMatrix U = fr.U.cast<complex>();
        return CMatrix(U * ad * U.transpose());
    };
    return f;
}

MatrixPhaseFunction thermal_rho0(double beta, const DiabaticModel& model) {
    if (!(beta > 0.0)) throw ConfigError("canonical density needs a positive beta");
    MatrixPhaseFunction f;
    f.n = model.n;
    f.value = [beta, model](const PhasePoint& X) {
        const AdiabaticFrame fr = adiabatize(model, X.R());
        const Vector w = (-beta * (fr.E.array() + X.kinetic_energy())).exp().matrix();
        return CMatrix((fr.U * w.asDiagonal() * fr.U.transpose()).cast<complex>());
    };
    // In the adiabatic basis d_k(sum_a w_a |a><a|)_{ce} = delta_ce dw_c/dR_k + (w_e - w_c) d^k_ce.
    f.gradient = [beta, model](const PhasePoint& X) {
        const AdiabaticFrame fr = adiabatize(model, X.R());
        const int n = model.n;
        const Eigen::Index N = X.dofs();
        const Vector w = (-beta * (fr.E.array() + X.kinetic_energy())).exp().matrix();
        const Vector v = X.velocity();
        std::vector<CMatrix> g(2 * N);
        for (Eigen::Index k = 0; k < N; ++k) {
            Matrix m = Matrix::Zero(n, n);
            for (int c = 0; c < n; ++c)
                for (int e = 0; e < n; ++e)
                    m(c, e) = c == e ? beta * fr.forces()(c, k) * w[c] : (w[e] - w[c]) * fr.d(c, e)[k];
            g[k] = (fr.U * m * fr.U.transpose()).cast<complex>();
            g[N + k] = (fr.U * (-beta * v[k] * w).asDiagonal() * fr.U.transpose()).cast<complex>();
        }
        return g;
    };
    return f;
}

MatrixPhaseFunction thermal_rho1(double beta, const DiabaticModel& model) {
    if (!(beta > 0.0)) throw ConfigError("canonical density needs a positive beta");
    MatrixPhaseFunction f;
    f.n = model.n;
    f.value = [beta, model](const PhasePoint& X) {
        const AdiabaticFrame fr = adiabatize(model, X.R());
        const Vector v = X.velocity();
        CMatrix ad = CMatrix::Zero(model.n, model.n);
        for (int a = 0; a < model.n; ++a)
            for (int b = 0; b < model.n; ++b) {
                if (a == b) continue;
                const double w = std::exp(-beta * (fr.E[b] + X.kinetic_energy()));
                ad(a, b) = complex(0.0, -v.dot(fr.d(a, b)) * w * rho1_bracket(beta, fr.E[a] - fr.E[b]));
            }
        const CMatrix U = fr.U.cast<complex>();
        return CMatrix(U * ad * U.transpose());
    };
    return f;
}

MatrixPhaseFunction hamiltonian_matrix(const DiabaticModel& model) {
    MatrixPhaseFunction f;
    f.n = model.n;
    f.value = [model](const PhasePoint& X) {
        Matrix h = model.h(X.R());
        h.diagonal().array() += X.kinetic_energy();
        return CMatrix(h.cast<complex>());
    };
    f.gradient = [model](const PhasePoint& X) {
        const Eigen::Index N = X.dofs();
        const auto gh = model.grad_h(X.R());
        std::vector<CMatrix> g(2 * N);
        const Vector v = X.velocity();
        for (Eigen::Index k = 0; k < N; ++k) {
            g[k] = gh[k].cast<complex>();
            g[N + k] = CMatrix::Identity(model.n, model.n) * v[k];
        }
        return g;
    };
    return f;
}

CMatrix recursion_residual(int order, const MatrixPhaseFunction& rho_prev, const MatrixPhaseFunction& rho_next,
                           const MatrixPhaseFunction& H0, const DiracEngine& engine, const PhasePoint& X) {
    if (order < 0) throw InvalidArgument("recursion order must be non-negative");
    const CMatrix H = H0(X);
    const CMatrix rn = rho_next(X);
    if (order == 0) return H * rn - rn * H;

    const complex I(0.0, 1.0);
    const auto gH = gradient_of(H0, X);
    const auto gr = gradient_of(rho_prev, X);
    const Matrix BD = engine.b_dirac(X);
    const Vector div = engine.divergence(X);
    CMatrix kappa = CMatrix::Zero(H.rows(), H.cols());
    for (Eigen::Index j = 0; j < div.size(); ++j) kappa += div[j] * gH[j];
    const CMatrix rp = rho_prev(X);
    return I * (H * rn - rn * H) - 0.5 * (matrix_bracket(gH, BD, gr) - matrix_bracket(gr, BD, gH)) +
           0.5 * (kappa * rp + rp * kappa);
}

ResidualScan scan_residual(int order, const MatrixPhaseFunction& rho_prev, const MatrixPhaseFunction& rho_next,
                           const MatrixPhaseFunction& H0, const DiracEngine& engine,
                           const std::vector<PhasePoint>& points) {
    ResidualScan out;
    for (const auto& X : points) {
        try {
            const CMatrix r = recursion_residual(order, rho_prev, rho_next, H0, engine, X);
            if (!r.allFinite()) {
                ++out.excluded;
                continue;
            }
            out.max_residual = std::max(out.max_residual, r.cwiseAbs().maxCoeff());
            ++out.evaluated;
        } catch (const EvaluationError&) {
            ++out.excluded;
        }
    }
    return out;
}

// ---- sampling ----

Vector tangent_momenta(const ConstraintSet& set, const Vector& R, double beta, CounterRng& rng) {
    std::normal_distribution<double> normal;
    Vector P(R.size());
    for (Eigen::Index i = 0; i < R.size(); ++i) P[i] = std::sqrt(set.masses()[i] / beta) * normal(rng);
    if (set.empty()) return P;
    return project_momenta(set, PhasePoint(R, P, set.masses()));
}

namespace {

Vector surface_energies(const DiabaticModel& model, const Vector& R) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.h(R), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EvaluationError("electronic Hamiltonian diagonalization failed", 0);
    return es.eigenvalues();
}

// Columns span the tangent space of the surface in mass-weighted coordinates.
Matrix tangent_basis(const ConstraintSet& set, const Vector& R, const Vector& inv_sqrt_m) {
    const Eigen::Index N = set.dofs();
    if (set.empty()) return Matrix::Identity(N, N);
    const Matrix Gq = set.geometry(R).G * inv_sqrt_m.asDiagonal();
    Eigen::HouseholderQR<Matrix> qr(Gq.transpose());
    const Matrix Q = qr.householderQ() * Matrix::Identity(N, N);
    return Q.rightCols(N - set.size());
}

Matrix normal_directions(const ConstraintSet& set, const Vector& R) {
    if (set.empty()) return Matrix(set.dofs(), 0);
    return set.masses().cwiseInverse().asDiagonal() * set.geometry(R).G.transpose();
}

int gibbs_surface(const Vector& E, double beta, CounterRng& rng) {
    Vector w = (-beta * (E.array() - E.minCoeff())).exp().matrix();
    double u = rng.uniform() * w.sum();
    for (Eigen::Index a = 0; a < w.size(); ++a) {
        if (u < w[a]) return static_cast<int>(a);
        u -= w[a];
    }
    return static_cast<int>(w.size()) - 1;
}

struct ChainOutput {
    std::vector<StationarySample> samples;
    std::size_t proposed = 0, accepted = 0, projection_failures = 0, reverse_failures = 0;
};

ChainOutput run_chain(const StationaryDensity& sd, const ConstraintSet& set, const DiabaticModel& model,
                      const Vector& start, std::size_t count, const SamplerOptions& opt, CounterRng rng,
                      std::uint64_t stream) {
    ChainOutput out;
    const Vector sqrt_m = set.masses().cwiseSqrt();
    const Vector inv_sqrt_m = sqrt_m.cwiseInverse();
    const double s = opt.step;
    std::normal_distribution<double> normal;

    Vector R = start;
    Vector E = surface_energies(model, R);
    int alpha = gibbs_surface(E, sd.beta, rng);
    Matrix T = tangent_basis(set, R, inv_sqrt_m);
    Matrix Nrm = normal_directions(set, R);

    const std::size_t total = opt.burn_in + count * opt.thin;
    for (std::size_t it = 0; it < total; ++it) {
        ++out.proposed;
        Vector xi(T.cols());
        for (Eigen::Index k = 0; k < xi.size(); ++k) xi[k] = s * normal(rng);
        const Vector v = T * xi;
        const double u = rng.uniform();

        const auto Rn = project_along(set, R + inv_sqrt_m.cwiseProduct(v), Nrm);
        if (!Rn) {
            ++out.projection_failures;
        } else {
            const Matrix Tn = tangent_basis(set, *Rn, inv_sqrt_m);
            const Matrix Nn = normal_directions(set, *Rn);
            const Vector vr = Tn.transpose() * (sqrt_m.cwiseProduct(R - *Rn));
            const auto back = project_along(set, *Rn + inv_sqrt_m.cwiseProduct(Tn * vr), Nn);
            if (!back || (*back - R).norm() > 1e-8) {
                ++out.reverse_failures;
            } else {
                const Vector En = surface_energies(model, *Rn);
                const double log_ratio =
                    -sd.beta * (En[alpha] - E[alpha]) - (vr.squaredNorm() - v.squaredNorm()) / (2.0 * s * s);
                if (std::log(u) < log_ratio) {
                    ++out.accepted;
                    R = *Rn;
                    E = En;
                    T = Tn;
                    Nrm = Nn;
                }
            }
        }
        alpha = gibbs_surface(E, sd.beta, rng);

        if (it >= opt.burn_in && (it - opt.burn_in + 1) % opt.thin == 0) {
            StationarySample smp{TrajectoryState{PhasePoint(R, tangent_momenta(set, R, sd.beta, rng), set.masses())}};
            smp.state.alpha = smp.state.alpha2 = alpha;
            smp.state.stream = stream;
            out.samples.push_back(std::move(smp));
        }
    }
    return out;
}

}  // namespace

SampleSet sample_stationary(const StationaryDensity& sd, const ConstraintSet& set, const DiabaticModel& model,
                            const Vector& start_R, std::size_t count, std::uint64_t seed,
                            const SamplerOptions& options, std::uint64_t stream_base) {
    sd.validate();
    if (sd.mode != DensityMode::canonical) throw ConfigError("the sampler supports the canonical density only");
    if (options.chains == 0 || options.thin == 0) throw ConfigError("sampler needs at least one chain and thin >= 1");
    if (!(options.step > 0.0)) throw ConfigError("sampler step must be positive");
    if (start_R.size() != set.dofs()) throw DimensionError("start configuration has the wrong length");

    const auto start = project_positions(set, start_R);
    if (!start) throw ProjectionFailure("sampler start point could not be projected onto the constraint surface");

    const std::size_t chains = options.chains;
    std::vector<ChainOutput> outs(chains);
    for_each_index(chains, options.parallel, [&](std::size_t c) {
        const std::size_t n = count / chains + (c < count % chains ? 1 : 0);
        const std::uint64_t stream = stream_base + c;
        outs[c] = run_chain(sd, set, model, *start, n, options, CounterRng(seed, stream), stream);
    });

    SampleSet result;
    for (auto& o : outs) {
        result.proposed += o.proposed;
        result.accepted += o.accepted;
        result.projection_failures += o.projection_failures;
        result.reverse_failures += o.reverse_failures;
        for (auto& smp : o.samples) result.samples.push_back(std::move(smp));
    }
    return result;
}

// ---- Fredholm condition ----

double fredholm_integrand(const AdiabaticDensity& rho, const PhasePoint& X, const AdiabaticFrame& frame, int a,
                          const ConstraintSet& set, FrequencyMode mode) {
    const int n = frame.n();
    const Vector v = X.velocity();
    const CMatrix r = rho(X, frame);

    // directional momentum derivative of rho(b, b2) along u, frame held fixed
    auto dP = [&](const Vector& u, int b, int b2) -> complex {
        const double un = u.norm();
        if (un == 0.0) return 0.0;
        const double eps = 1e-5 * (1.0 + X.P().norm()) / un;
        const CMatrix rp = rho(X.with_P(X.P() + eps * u), frame);
        const CMatrix rm = rho(X.with_P(X.P() - eps * u), frame);
        return (rp(b, b2) - rm(b, b2)) / (2.0 * eps);
    };
    auto term = [&](int x, int y, int b, int b2) -> complex {
        // -(v.d_xy) rho - (hbar/2) (omega^D d_xy) . dP rho
        const Vector w = constrained_frequency_vector(frame, x, y, set, mode);
        return -v.dot(frame.d(x, y)) * r(b, b2) - 0.5 * frame.hbar * dP(w, b, b2);
    };

    double total = 0.0;
    for (int b = 0; b < n; ++b)
        for (int b2 = 0; b2 < b; ++b2) {
            complex val = 0.0;
            if (b2 == a) val += term(a, b, b, b2);
            if (b == a) val += term(a, b2, b, b2);
            total += 2.0 * val.real();
        }
    return total;
}

FredholmEstimate fredholm_check(const StationaryDensity& sd, const DiracEngine& engine, const DiabaticModel& model,
                                const std::vector<StationarySample>& samples, FrequencyMode mode, bool parallel) {
    sd.validate();
    const auto& set = engine.constraints();
    const AdiabaticDensity rho = [&](const PhasePoint& X, const AdiabaticFrame& fr) {
        CMatrix m(fr.n(), fr.n());
        for (int a = 0; a < fr.n(); ++a)
            for (int b = 0; b < fr.n(); ++b) m(a, b) = rho1(sd, X, a, b, fr, engine);
        return m;
    };

    const std::size_t S = samples.size();
    std::vector<std::vector<double>> vals(3, std::vector<double>(S));
    std::vector<double> parity(S);
    for_each_index(S, parallel, [&](std::size_t i) {
        const auto& st = samples[i].state;
        const AdiabaticFrame fr = adiabatize(model, st.X.R());
        const int a = st.alpha;
        const double g = fredholm_integrand(rho, st.X, fr, a, set, mode);
        const PhasePoint Xm = st.X.with_P(-st.X.P());
        parity[i] = std::abs(g + fredholm_integrand(rho, Xm, fr, a, set, mode));
        const double norm = rho0(sd, st.X, a, a, fr, engine);
        const double H = adiabatic_energy(st.X, fr, a);
        const double base = samples[i].weight * g / norm;
        vals[0][i] = base;
        vals[1][i] = base * H;
        vals[2][i] = base * H * H;
    });

    FredholmEstimate out;
    for (auto& v : vals) out.per_test.push_back(mean_and_se(v));
    for (double p : parity) out.max_parity_violation = std::max(out.max_parity_violation, p);
    return out;
}

}  // namespace qcdirac
