#include "qcdirac/reference.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "qcdirac/errors.hpp"
#include "qcdirac/parallel.hpp"

namespace qcdirac::reference {

namespace {

struct Frame {
    Vector E;
    Matrix U;
    std::vector<Matrix> dh;  // adiabatic basis

    Vector d(int a, int b) const {
        Vector out(static_cast<Eigen::Index>(dh.size()));
        for (std::size_t k = 0; k < dh.size(); ++k) out[k] = dh[k](a, b) / (E[b] - E[a]);
        return out;
    }
};

Frame diagonalize(const DiabaticModel& model, const Vector& R, double gap_floor, const Frame* prev) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.h(R));
    Frame f;
    f.E = es.eigenvalues();
    f.U = es.eigenvectors();
    for (int k = 0; k + 1 < model.n; ++k)
        if (f.E[k + 1] - f.E[k] < gap_floor) throw DegeneracyError("adiabatic energies are degenerate", k, k + 1);
    for (int a = 0; a < model.n; ++a) {
        double s = 1.0;
        if (prev) {
            const double o = f.U.col(a).dot(prev->U.col(a));
            if (std::abs(o) < 0.5) throw PathTooCoarse("adiabatic states changed too much in one step");
            s = o < 0.0 ? -1.0 : 1.0;
        } else {
            for (int i = 0; i < model.n; ++i)
                if (std::abs(f.U(i, a)) > 1e-12) {
                    s = f.U(i, a) < 0.0 ? -1.0 : 1.0;
                    break;
                }
        }
        if (s < 0.0) f.U.col(a) *= -1.0;
    }
    for (const Matrix& g : model.grad_h(R)) f.dh.push_back(f.U.transpose() * g * f.U);
    return f;
}

struct PairForce {
    Vector F;
    double omega;
};

PairForce pair_force(const DiabaticModel& model, const Vector& R, int a, int a2, double hbar, double gap_floor) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.h(R));
    const Vector& E = es.eigenvalues();
    for (int k = 0; k + 1 < model.n; ++k)
        if (E[k + 1] - E[k] < gap_floor) throw DegeneracyError("adiabatic energies are degenerate", k, k + 1);
    const auto gh = model.grad_h(R);
    const auto ua = es.eigenvectors().col(a), ub = es.eigenvectors().col(a2);
    PairForce out{Vector(R.size()), (E[a] - E[a2]) / hbar};
    for (Eigen::Index k = 0; k < R.size(); ++k) out.F[k] = -0.5 * (ua.dot(gh[k] * ua) + ub.dot(gh[k] * ub));
    return out;
}

complex element(const CMatrix& chi, const Frame& f, int b, int b2) {
    const CMatrix U = f.U.cast<complex>();
    return (U.col(b).adjoint() * chi * U.col(b2))(0, 0);
}

}  // namespace

Trajectory run(const Dynamics& dyn, const PhasePoint& X0, int alpha, int alpha2, CounterRng& rng,
               const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid) {
    const auto [spr, records] = grid.layout(dyn.dt);
    const Vector& M = dyn.masses;
    Vector R = X0.R(), P = X0.P();
    complex weight(1.0, 0.0);
    int hops = 0;
    Trajectory tr;
    tr.values.assign(observables.size(), std::vector<complex>(records));
    tr.hops.assign(records, 0);

    Frame frame = diagonalize(dyn.model, R, dyn.gap_floor, nullptr);
    auto record = [&](long k) {
        const PhasePoint X(R, P, M);
        for (std::size_t o = 0; o < observables.size(); ++o)
            tr.values[o][k] = weight * element(observables[o](X), frame, alpha, alpha2);
        tr.hops[k] = hops;
    };
    record(0);

    const double h = dyn.dt;
    const long total = spr * (records - 1);
    for (long step = 1; step <= total; ++step) {
        // RK4 on the mean surface of the pair, with the phase integrated alongside
        auto f = [&](const Vector& r) { return pair_force(dyn.model, r, alpha, alpha2, dyn.hbar, dyn.gap_floor); };
        const PairForce f1 = f(R);
        const Vector k1r = P.cwiseQuotient(M), k1p = f1.F;
        const Vector R2 = R + 0.5 * h * k1r, P2 = P + 0.5 * h * k1p;
        const PairForce f2 = f(R2);
        const Vector k2r = P2.cwiseQuotient(M), k2p = f2.F;
        const Vector R3 = R + 0.5 * h * k2r, P3 = P + 0.5 * h * k2p;
        const PairForce f3 = f(R3);
        const Vector k3r = P3.cwiseQuotient(M), k3p = f3.F;
        const Vector R4 = R + h * k3r, P4 = P + h * k3p;
        const PairForce f4 = f(R4);
        const Vector k4r = P4.cwiseQuotient(M), k4p = f4.F;
        R = R + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        P = P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        const double theta = (h / 6.0) * (f1.omega + 2.0 * f2.omega + 2.0 * f3.omega + f4.omega);
        if (!R.allFinite() || !P.allFinite()) throw StepRejected("non-finite state after step; reduce dt");
        if (alpha != alpha2) weight *= std::exp(complex(0.0, theta));

        frame = diagonalize(dyn.model, R, dyn.gap_floor, &frame);

        if (dyn.hopping) {
            struct Cand {
                bool second;
                int to;
                double amp;
                Vector dir;
                double shift;
            };
            std::vector<Cand> cands;
            const Vector v = P.cwiseQuotient(M);
            auto collect = [&](bool second, int from) {
                for (int b = 0; b < dyn.model.n; ++b) {
                    if (b == from) continue;
                    const Vector d = frame.d(from, b);
                    const double amp = h * v.dot(d);
                    if (amp == 0.0) continue;
                    const double norm = d.norm();
                    const double vd = v.dot(d);
                    Vector dir = Vector::Zero(R.size());
                    double shift = 0.0;
                    if (norm > 0.0 && vd != 0.0) {
                        dir = d / norm;
                        const double pd = P.dot(dir);
                        shift = dyn.hbar * ((frame.E[from] - frame.E[b]) / dyn.hbar) * norm * pd / vd;
                        if (pd * pd + shift < 0.0) continue;  // frustrated
                    }
                    cands.push_back({second, b, amp, std::move(dir), shift});
                }
            };
            collect(false, alpha);
            collect(true, alpha2);
            if (!cands.empty()) {
                double sum = 0.0;
                for (const auto& c : cands) sum += std::abs(c.amp);
                const double u = rng.uniform() * (1.0 + sum);
                if (u < 1.0) {
                    weight *= 1.0 + sum;
                } else {
                    std::size_t k = cands.size() - 1;
                    double acc = 1.0;
                    for (std::size_t i = 0; i < cands.size(); ++i) {
                        acc += std::abs(cands[i].amp);
                        if (u < acc) {
                            k = i;
                            break;
                        }
                    }
                    if (hops >= dyn.max_hops) {
                        tr.truncated = true;
                        return tr;
                    }
                    const Cand& c = cands[k];
                    weight *= (c.amp < 0.0 ? -1.0 : 1.0) * (1.0 + sum);
                    ++hops;
                    (c.second ? alpha2 : alpha) = c.to;
                    const double pd = P.dot(c.dir);
                    const double arg = pd * pd + c.shift;
                    if (arg < 0.0) throw FrustratedHop("momentum jump needs (P.d)^2 + shift >= 0");
                    P = P + ((pd < 0.0 ? -1.0 : 1.0) * std::sqrt(arg) - pd) * c.dir;
                }
            }
        }
        if (!std::isfinite(std::abs(weight))) throw EvaluationError("trajectory weight is not finite");
        if (step % spr == 0) record(step / spr);
    }
    return tr;
}

Ensemble propagate(const InitialSampler& initial, const Dynamics& dyn,
                   const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid, std::size_t count,
                   std::uint64_t seed) {
    Ensemble out;
    for (std::size_t i = 0; i < count; ++i) {
        CounterRng rng(seed, i);
        const TrajectoryState s = initial(i, rng);
        Trajectory tr = run(dyn, s.X, s.alpha, s.alpha2, rng, observables, grid);
        if (tr.truncated) {
            ++out.truncated;
            continue;
        }
        out.trajectories.push_back(std::move(tr));
    }
    const auto [spr, records] = grid.layout(dyn.dt);
    out.mean.assign(observables.size(), std::vector<complex>(records, complex(0.0, 0.0)));
    if (out.trajectories.empty()) return out;
    for (std::size_t o = 0; o < observables.size(); ++o)
        for (long k = 0; k < records; ++k) {
            std::vector<double> re, im;
            for (const auto& t : out.trajectories) {
                re.push_back(t.values[o][k].real());
                im.push_back(t.values[o][k].imag());
            }
            out.mean[o][k] = complex(mean_and_se(re).mean, mean_and_se(im).mean);
        }
    return out;
}

std::vector<StationarySample> sample_canonical(const DiabaticModel& model, const Vector& masses, double beta,
                                               const Vector& start, std::size_t count, std::uint64_t seed,
                                               std::size_t burn_in, std::size_t thin, double step) {
    CounterRng rng(seed, 0);
    std::normal_distribution<double> normal;
    auto energies = [&](const Vector& R) {
        return Eigen::SelfAdjointEigenSolver<Matrix>(model.h(R), Eigen::EigenvaluesOnly).eigenvalues().eval();
    };
    auto gibbs = [&](const Vector& E) {
        const Vector w = (-beta * (E.array() - E.minCoeff())).exp().matrix();
        double u = rng.uniform() * w.sum();
        for (Eigen::Index a = 0; a < w.size(); ++a) {
            if (u < w[a]) return static_cast<int>(a);
            u -= w[a];
        }
        return static_cast<int>(w.size()) - 1;
    };
    Vector R = start;
    Vector E = energies(R);
    int alpha = gibbs(E);
    std::vector<StationarySample> out;
    for (std::size_t it = 0; out.size() < count; ++it) {
        Vector Rn = R;
        for (Eigen::Index i = 0; i < R.size(); ++i) Rn[i] += step * normal(rng);
        const Vector En = energies(Rn);
        if (std::log(rng.uniform()) < -beta * (En[alpha] - E[alpha])) {
            R = Rn;
            E = En;
        }
        alpha = gibbs(E);
        if (it >= burn_in && (it - burn_in + 1) % thin == 0) {
            Vector P(R.size());
            for (Eigen::Index i = 0; i < R.size(); ++i) P[i] = std::sqrt(masses[i] / beta) * normal(rng);
            StationarySample s{TrajectoryState{PhasePoint(R, P, masses)}};
            s.state.alpha = s.state.alpha2 = alpha;
            out.push_back(std::move(s));
        }
    }
    return out;
}

Response response(const MatrixPhaseFunction& B, const MatrixPhaseFunction& A, double beta, const Dynamics& dyn,
                  const TimeGrid& grid, const std::vector<StationarySample>& samples, std::uint64_t seed,
                  bool order_hbar) {
    const auto [spr, records] = grid.layout(dyn.dt);
    const int n = dyn.model.n;
    const MatrixPhaseFunction r0 = thermal_rho0(beta, dyn.model);
    const MatrixPhaseFunction r1 = thermal_rho1(beta, dyn.model);
    const complex I(0.0, 1.0);

    std::vector<std::vector<double>> per_sample;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const PhasePoint& X = samples[i].state.X;
        const Eigen::Index N = X.dofs();
        CMatrix rho = r0(X);
        auto grho = r0.gradient(X);
        if (order_hbar) {
            rho += dyn.hbar * r1(X);
            const auto g1 = fd_gradient(r1, X);
            for (std::size_t k = 0; k < grho.size(); ++k) grho[k] += dyn.hbar * g1[k];
        }
        const CMatrix a = A(X);
        const auto ga = gradient_of(A, X);
        // {F, G} = dF/dR dG/dP - dF/dP dG/dR, operator order kept
        auto poisson = [&](const std::vector<CMatrix>& gf, const std::vector<CMatrix>& gg) {
            CMatrix s = CMatrix::Zero(n, n);
            for (Eigen::Index k = 0; k < N; ++k) s += gf[k] * gg[N + k] - gf[N + k] * gg[k];
            return s;
        };
        const CMatrix W = (I / dyn.hbar) * (a * rho - rho * a) - 0.5 * (poisson(ga, grho) - poisson(grho, ga));

        const Frame fr = diagonalize(dyn.model, X.R(), dyn.gap_floor, nullptr);
        const CMatrix U = fr.U.cast<complex>();
        const CMatrix Wad = U.transpose() * W * U;
        const double density = (-beta * (fr.E.array() + X.kinetic_energy())).exp().sum();
        const double scale = samples[i].weight / density;

        std::vector<complex> acc(records, complex(0.0, 0.0));
        bool truncated = false;
        for (int al = 0; al < n && !truncated; ++al)
            for (int al2 = 0; al2 < n; ++al2) {
                if (Wad(al, al2) == 0.0) continue;
                CounterRng rng(seed, static_cast<std::uint64_t>(i) * n * n + al * n + al2);
                const Trajectory tr = run(dyn, X, al2, al, rng, {B}, grid);
                if (tr.truncated) {
                    truncated = true;
                    break;
                }
                for (long k = 0; k < records; ++k) acc[k] -= scale * tr.values[0][k] * Wad(al, al2);
            }
        if (truncated) continue;
        std::vector<double> re(records);
        for (long k = 0; k < records; ++k) re[k] = acc[k].real();
        per_sample.push_back(std::move(re));
    }

    Response out;
    std::vector<double> col(per_sample.size());
    for (long k = 0; k < records; ++k) {
        for (std::size_t j = 0; j < per_sample.size(); ++j) col[j] = per_sample[j][k];
        const MeanEstimate m = mean_and_se(col);
        out.mean.push_back(m.mean);
        out.se.push_back(m.se);
    }
    return out;
}

}  // namespace qcdirac::reference
