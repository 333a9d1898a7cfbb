#include "qcdirac/propagator.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "qcdirac/errors.hpp"
#include "qcdirac/observables.hpp"
#include "qcdirac/parallel.hpp"

namespace qcdirac {

void IntegratorConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (!(constraint_tol > 0.0)) throw InvalidArgument("constraint_tol must be positive");
    if (max_hops < 0) throw InvalidArgument("max_hops must be nonnegative");
    if (!(gap_floor > 0.0)) throw InvalidArgument("gap_floor must be positive");
}

namespace {

struct SurfaceForce {
    Vector F;
    double omega = 0.0;
};

using PairForce = std::function<SurfaceForce(const Vector&)>;

SurfaceForce pair_force(const DiabaticModel& model, const Vector& R, int a, int a2, double hbar, double gap_floor) {
    const Matrix h = model.h(R);
    if (!h.allFinite()) throw EvaluationError("h(R) is not finite");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Vector& E = es.eigenvalues();
    for (int k = 0; k + 1 < model.n; ++k)
        if (E[k + 1] - E[k] < gap_floor) throw DegeneracyError("adiabatic energies are degenerate", k, k + 1);
    const auto gh = model.grad_h(R);
    const auto ua = es.eigenvectors().col(a), ub = es.eigenvectors().col(a2);
    SurfaceForce out;
    out.F.resize(R.size());
    for (Eigen::Index k = 0; k < R.size(); ++k)
        out.F[k] = -0.5 * (ua.dot(gh[k] * ua) + ub.dot(gh[k] * ub));
    out.omega = (E[a] - E[a2]) / hbar;
    return out;
}

void accelerations(const ConstraintSet& set, const Vector& R, const Vector& P, const Vector& M, const PairForce& force,
                   Vector& dR, Vector& dP, double& dtheta) {
    SurfaceForce sf = force(R);
    dR = P.cwiseQuotient(M);
    if (set.empty()) {
        dP = std::move(sf.F);
    } else {
        const ConstraintGeometry geo = set.geometry(R);
        const Vector lambda = lagrange_multipliers(geo, PhasePoint(R, P, M), sf.F);
        dP = sf.F - geo.G.transpose() * lambda;
    }
    dtheta = sf.omega;
}

// One step of size h; returns the phase increment.
double integrate_step(PhasePoint& X, const ConstraintSet& set, const PairForce& force, const IntegratorConfig& cfg,
                      double h, StepDrift* drift) {
    const Vector& M = X.masses();
    const Vector& R = X.R();
    const Vector& P = X.P();
    Vector s0, sd0;
    if (!set.empty()) {
        s0 = set.sigma(R);
        sd0 = set.sigma_dot(X);
    }
    Vector Rn, Pn;
    double theta = 0.0;
    if (cfg.scheme == Scheme::rk4) {
        Vector k1r, k1p, k2r, k2p, k3r, k3p, k4r, k4p;
        double w1, w2, w3, w4;
        accelerations(set, R, P, M, force, k1r, k1p, w1);
        accelerations(set, R + 0.5 * h * k1r, P + 0.5 * h * k1p, M, force, k2r, k2p, w2);
        accelerations(set, R + 0.5 * h * k2r, P + 0.5 * h * k2p, M, force, k3r, k3p, w3);
        accelerations(set, R + h * k3r, P + h * k3p, M, force, k4r, k4p, w4);
        Rn = R + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        Pn = P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        theta = (h / 6.0) * (w1 + 2.0 * w2 + 2.0 * w3 + w4);
    } else {
        // RATTLE: position constraint solved along M^-1 G(R)^T, momenta projected at the end
        const SurfaceForce f0 = force(R);
        Vector Ru = R + h * X.velocity() + (0.5 * h * h) * f0.F.cwiseQuotient(M);
        if (!set.empty()) {
            const ConstraintGeometry geo = set.geometry(R);
            const Matrix dir = M.cwiseInverse().asDiagonal() * geo.G.transpose();
            auto proj = project_along(set, Ru, dir, 1e-12, 50);
            if (!proj) throw StepRejected("position projection did not converge; reduce dt");
            Ru = *proj;
        }
        Rn = Ru;
        const SurfaceForce f1 = force(Rn);
        Pn = M.cwiseProduct(Rn - R) / h + 0.5 * h * f1.F;
        if (!set.empty()) Pn = project_momenta(set, PhasePoint(Rn, Pn, M));
        theta = 0.5 * h * (f0.omega + f1.omega);
    }
    if (!Rn.allFinite() || !Pn.allFinite()) throw StepRejected("non-finite state after step; reduce dt");
    PhasePoint Y(std::move(Rn), std::move(Pn), M);
    StepDrift d;
    if (!set.empty()) {
        const Vector s1 = set.sigma(Y.R());
        const Vector sd1 = set.sigma_dot(Y);
        if (cfg.scheme == Scheme::rk4) {
            d.sigma = (s1 - s0 - h * sd0).cwiseAbs().maxCoeff();
            d.sigma_dot = (sd1 - sd0).cwiseAbs().maxCoeff();
        } else {
            d.sigma = s1.cwiseAbs().maxCoeff();
            d.sigma_dot = sd1.cwiseAbs().maxCoeff();
        }
        if (std::max(d.sigma, d.sigma_dot) > 10.0 * cfg.constraint_tol)
            throw StepRejected("constraint drift " + std::to_string(std::max(d.sigma, d.sigma_dot)) +
                               " exceeds 10x tolerance; reduce dt");
    }
    if (drift) {
        drift->sigma = std::max(drift->sigma, d.sigma);
        drift->sigma_dot = std::max(drift->sigma_dot, d.sigma_dot);
    }
    X = std::move(Y);
    return theta;
}

}  // namespace

PhasePoint constrained_classical_step(const PhasePoint& X, const ConstraintSet& set, const ForceField& F,
                                      const IntegratorConfig& cfg, StepDrift* drift) {
    cfg.validate();
    if (X.dofs() != set.dofs()) throw DimensionError("phase point does not match constraint set");
    PhasePoint Y = X;
    integrate_step(Y, set, [&F](const Vector& R) { return SurfaceForce{F(R), 0.0}; }, cfg, cfg.dt, drift);
    return Y;
}

TrajectoryState adiabatic_segment(const TrajectoryState& state, const DiabaticModel& model, const ConstraintSet& set,
                                  const IntegratorConfig& cfg, double duration, double hbar, StepDrift* drift) {
    cfg.validate();
    if (!(duration >= 0.0)) throw InvalidArgument("segment duration must be nonnegative");
    if (!(hbar > 0.0)) throw InvalidArgument("hbar must be positive");
    TrajectoryState out = state;
    if (duration == 0.0) return out;
    const long steps = std::max(1L, static_cast<long>(std::ceil(duration / cfg.dt - 1e-9)));
    const double h = duration / static_cast<double>(steps);
    const int a = state.alpha, a2 = state.alpha2;
    const PairForce force = [&](const Vector& R) { return pair_force(model, R, a, a2, hbar, cfg.gap_floor); };
    double theta = 0.0;
    for (long k = 0; k < steps; ++k) theta += integrate_step(out.X, set, force, cfg, h, drift);
    if (a != a2) out.weight *= std::exp(complex(0.0, theta));
    out.time += duration;
    return out;
}

PhasePoint momentum_jump(const PhasePoint& X, const Vector& d_hat, double shift) {
    if (d_hat.size() != X.dofs()) throw DimensionError("jump direction has wrong length");
    if (std::abs(d_hat.norm() - 1.0) > 1e-10) throw InvalidArgument("jump direction must be a unit vector");
    const double pd = X.P().dot(d_hat);
    const double arg = pd * pd + shift;
    if (arg < 0.0) throw FrustratedHop("momentum jump needs (P.d)^2 + shift >= 0");
    const double dP = (pd < 0.0 ? -1.0 : 1.0) * std::sqrt(arg) - pd;
    return X.with_P(X.P() + dP * d_hat);
}

JumpRule jump_rule(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set, const PhasePoint& X,
                   FrequencyMode mode) {
    const Vector& d = frame.d(a, b);
    Vector D;
    if (mode == FrequencyMode::literal || set.empty())
        D = (1.0 + set.size()) * d;
    else
        D = d + constraint_projector(set, X.R()) * d;
    JumpRule rule;
    const double norm = D.norm();
    const double vd = X.velocity().dot(d);
    if (!(norm > 0.0) || vd == 0.0) {
        rule.direction = Vector::Zero(X.dofs());
        return rule;
    }
    rule.direction = D / norm;
    const double pd = X.P().dot(rule.direction);
    rule.shift = frame.hbar * frame.omega(a, b) * norm * pd / vd;
    rule.frustrated = pd * pd + rule.shift < 0.0;
    return rule;
}

HopOutcome hop_decision(const TrajectoryState& state, const AdiabaticFrame& frame, const ConstraintSet& set,
                        const IntegratorConfig& cfg, CounterRng& rng) {
    struct Candidate {
        bool second;
        int to;
        double amp;
        JumpRule rule;
    };
    HopOutcome out;
    out.alpha = state.alpha;
    out.alpha2 = state.alpha2;
    const Vector v = state.X.velocity();
    std::vector<Candidate> cands;
    auto collect = [&](bool second, int from) {
        for (int b = 0; b < frame.n(); ++b) {
            if (b == from) continue;
            const double amp = cfg.dt * v.dot(frame.d(from, b));
            if (amp == 0.0) continue;
            JumpRule rule = jump_rule(frame, from, b, set, state.X, cfg.frequency_mode);
            if (rule.frustrated) {
                ++out.frustrated;
                continue;
            }
            cands.push_back({second, b, amp, std::move(rule)});
        }
    };
    collect(false, state.alpha);
    collect(true, state.alpha2);
    if (cands.empty()) return out;

    double total = 0.0;
    for (const auto& c : cands) total += std::abs(c.amp);
    const double u = rng.uniform() * (1.0 + total);
    if (u < 1.0) {
        out.weight_factor = 1.0 + total;
        return out;
    }
    std::size_t k = cands.size() - 1;
    double acc = 1.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        acc += std::abs(cands[i].amp);
        if (u < acc) {
            k = i;
            break;
        }
    }
    if (state.hops >= cfg.max_hops) {
        out.truncated = true;
        return out;
    }
    const Candidate& c = cands[k];
    out.weight_factor = (c.amp < 0.0 ? -1.0 : 1.0) * (1.0 + total);
    out.hopped = true;
    (c.second ? out.alpha2 : out.alpha) = c.to;
    PhasePoint Y = momentum_jump(state.X, c.rule.direction, c.rule.shift);
    if (cfg.project_after_jump && !set.empty()) Y = Y.with_P(project_momenta(set, Y));
    out.X = std::move(Y);
    return out;
}

void apply(TrajectoryState& state, const HopOutcome& hop) {
    state.alpha = hop.alpha;
    state.alpha2 = hop.alpha2;
    state.weight *= hop.weight_factor;
    if (hop.hopped) ++state.hops;
    if (hop.truncated) state.truncated = true;
    if (hop.X) state.X = *hop.X;
}

std::pair<long, long> TimeGrid::layout(double dt) const {
    if (!(t_end >= 0.0) || !(interval > 0.0)) throw InvalidArgument("time grid needs t_end >= 0 and interval > 0");
    const double ratio = interval / dt;
    const long spr = std::lround(ratio);
    if (spr < 1 || std::abs(ratio - static_cast<double>(spr)) > 1e-9 * ratio)
        throw InvalidArgument("record interval must be a whole number of steps");
    const long records = std::lround(std::floor(t_end / interval + 1e-9)) + 1;
    return {spr, records};
}

TrajectoryRecord run_trajectory(const Dynamics& dyn, TrajectoryState state, CounterRng& rng,
                                const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid) {
    const auto [spr, records] = grid.layout(dyn.cfg.dt);
    const auto& set = dyn.set;
    TrajectoryRecord rec;
    rec.values.assign(observables.size(), std::vector<complex>(records, complex(0.0, 0.0)));
    rec.hops.assign(records, 0);
    rec.max_sigma.assign(records, 0.0);
    rec.max_sigma_dot.assign(records, 0.0);

    AdiabaticFrame frame = adiabatize(dyn.model, state.X.R(), dyn.hbar, nullptr, dyn.cfg.gap_floor);
    double ms = 0.0, msd = 0.0;
    auto violations = [&] {
        if (set.empty()) return;
        ms = std::max(ms, set.sigma(state.X.R()).cwiseAbs().maxCoeff());
        msd = std::max(msd, set.sigma_dot(state.X).cwiseAbs().maxCoeff());
    };
    auto record = [&](long k) {
        for (std::size_t o = 0; o < observables.size(); ++o)
            rec.values[o][k] = state.weight * adiabatic_element(observables[o](state.X), frame, state.alpha, state.alpha2);
        rec.hops[k] = state.hops;
        rec.max_sigma[k] = ms;
        rec.max_sigma_dot[k] = msd;
    };
    violations();
    record(0);
    const long total = spr * (records - 1);
    for (long step = 1; step <= total; ++step) {
        state = adiabatic_segment(state, dyn.model, set, dyn.cfg, dyn.cfg.dt, dyn.hbar);
        AdiabaticFrame next = adiabatize(dyn.model, state.X.R(), dyn.hbar, &frame, dyn.cfg.gap_floor);
        align_to(next, frame);
        frame = std::move(next);
        if (dyn.cfg.hopping) {
            const HopOutcome hop = hop_decision(state, frame, set, dyn.cfg, rng);
            if (hop.truncated) {
                rec.truncated = true;
                return rec;
            }
            apply(state, hop);
        }
        if (!std::isfinite(std::abs(state.weight))) throw EvaluationError("trajectory weight is not finite");
        violations();
        if (step % spr == 0) record(step / spr);
    }
    return rec;
}

std::string failure_kind(const std::exception& e) {
    if (dynamic_cast<const DegeneracyError*>(&e)) return "degeneracy";
    if (dynamic_cast<const StepRejected*>(&e)) return "step-rejected";
    if (dynamic_cast<const PathTooCoarse*>(&e)) return "path-too-coarse";
    if (dynamic_cast<const ProjectionFailure*>(&e)) return "projection-failure";
    if (dynamic_cast<const DegenerateConstraintError*>(&e)) return "degenerate-constraint";
    if (dynamic_cast<const FrustratedHop*>(&e)) return "frustrated";
    if (dynamic_cast<const EvaluationError*>(&e)) return "evaluation";
    return "other";
}

EnsembleResult propagate_ensemble(const InitialSampler& initial, const Dynamics& dyn,
                                  const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid,
                                  const EnsembleOptions& options, bool keep_records) {
    dyn.cfg.validate();
    const auto [spr, records] = grid.layout(dyn.cfg.dt);
    const std::size_t n = options.trajectories;
    std::vector<std::optional<TrajectoryRecord>> slots(n);
    std::vector<std::string> failed(n);

    for_each_index(n, options.parallel, [&](std::size_t i) {
        CounterRng rng(options.seed, i);
        try {
            TrajectoryState s = initial(i, rng);
            s.stream = i;
            slots[i] = run_trajectory(dyn, std::move(s), rng, observables, grid);
        } catch (const InvalidArgument&) {
            throw;
        } catch (const Error& e) {
            failed[i] = failure_kind(e);
        }
    });

    EnsembleResult out;
    for (long k = 0; k < records; ++k) out.times.push_back(static_cast<double>(k * spr) * dyn.cfg.dt);
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < n; ++i) {
        if (!failed[i].empty()) {
            ++out.failures[failed[i]];
        } else if (slots[i]->truncated) {
            ++out.truncated;
        } else {
            used.push_back(i);
        }
    }
    out.used = used.size();
    if (used.empty()) throw RunError("all trajectories were truncated or failed");

    const std::size_t m = used.size();
    std::vector<double> re(m), im(m);
    out.mean.assign(observables.size(), {});
    out.se_re.assign(observables.size(), {});
    out.se_im.assign(observables.size(), {});
    for (std::size_t o = 0; o < observables.size(); ++o) {
        for (long k = 0; k < records; ++k) {
            for (std::size_t j = 0; j < m; ++j) {
                const complex z = slots[used[j]]->values[o][k];
                re[j] = z.real();
                im[j] = z.imag();
            }
            const MeanEstimate r = mean_and_se(re), i = mean_and_se(im);
            out.mean[o].emplace_back(r.mean, i.mean);
            out.se_re[o].push_back(r.se);
            out.se_im[o].push_back(i.se);
        }
    }
    for (long k = 0; k < records; ++k) {
        double ms = 0.0, msd = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            re[j] = slots[used[j]]->hops[k];
            ms = std::max(ms, slots[used[j]]->max_sigma[k]);
            msd = std::max(msd, slots[used[j]]->max_sigma_dot[k]);
        }
        out.mean_hops.push_back(mean_and_se(re).mean);
        out.max_sigma.push_back(ms);
        out.max_sigma_dot.push_back(msd);
    }
    if (keep_records)
        for (std::size_t i : used) out.records.push_back(std::move(*slots[i]));
    return out;
}

}  // namespace qcdirac
