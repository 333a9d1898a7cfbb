#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "qcdirac/constraints.hpp"
#include "qcdirac/quantum.hpp"
#include "qcdirac/rng.hpp"

namespace qcdirac {

enum class Scheme { rk4, velocity_verlet_projected };

struct IntegratorConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::rk4;
    double constraint_tol = 1e-8;
    int max_hops = 50;
    FrequencyMode frequency_mode = FrequencyMode::projected;
    bool hopping = true;
    // Re-project momenta onto sigma_dot = 0 after each accepted jump.
    bool project_after_jump = false;
    double gap_floor = kDefaultGapFloor;

    void validate() const;
};

/// Position-only force field F(R) for the classical step.
using ForceField = std::function<Vector(const Vector&)>;

struct StepDrift {
    double sigma = 0.0;      // max |sigma_new - sigma_old - dt sigma_dot_old|
    double sigma_dot = 0.0;  // max |sigma_dot_new - sigma_dot_old|
};

/// One step of R' = P/M, P' = F - G^T lambda with exact multipliers. Throws StepRejected
/// when the step's constraint drift exceeds 10 x constraint_tol.
PhasePoint constrained_classical_step(const PhasePoint& X, const ConstraintSet& set, const ForceField& F,
                                      const IntegratorConfig& cfg, StepDrift* drift = nullptr);

struct TrajectoryState {
    PhasePoint X;
    int alpha = 0;
    int alpha2 = 0;
    complex weight{1.0, 0.0};
    double time = 0.0;
    std::uint64_t stream = 0;
    int hops = 0;
    bool truncated = false;
};

/// Evolves X on the mean surface (F^a + F^a')/2 with pair multipliers, for `duration`
/// split into ceil(duration / dt) equal steps, and multiplies the weight by exp(i int omega_aa' dt).
TrajectoryState adiabatic_segment(const TrajectoryState& state, const DiabaticModel& model, const ConstraintSet& set,
                                  const IntegratorConfig& cfg, double duration, double hbar = 1.0,
                                  StepDrift* drift = nullptr);

/// P' = P + dP d_hat, dP = sign(P.d_hat) sqrt((P.d_hat)^2 + shift) - P.d_hat, sign(0) = +1.
/// Throws FrustratedHop when the square-root argument is negative.
PhasePoint momentum_jump(const PhasePoint& X, const Vector& d_hat, double shift);

/// Jump direction and shift for the transition a -> b of one index of the pair.
struct JumpRule {
    Vector direction;  // unit vector
    double shift = 0.0;
    bool frustrated = false;
};
JumpRule jump_rule(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set, const PhasePoint& X,
                   FrequencyMode mode);

struct HopOutcome {
    int alpha = 0;
    int alpha2 = 0;
    double weight_factor = 1.0;
    bool hopped = false;
    bool truncated = false;
    int frustrated = 0;  // vetoed candidates
    std::optional<PhasePoint> X;  // set when momenta changed
};

/// Samples the short-time transition step 1 - J dt at the end of a segment.
HopOutcome hop_decision(const TrajectoryState& state, const AdiabaticFrame& frame, const ConstraintSet& set,
                        const IntegratorConfig& cfg, CounterRng& rng);

/// Applies an outcome to the state.
void apply(TrajectoryState& state, const HopOutcome& hop);

// ---- trajectories and ensembles ----

struct TimeGrid {
    double t_end = 1.0;
    double interval = 0.1;
    // Steps per record and record count for a given dt; throws InvalidArgument when
    // `interval` is not a whole number of steps.
    std::pair<long, long> layout(double dt) const;
};

struct TrajectoryRecord {
    std::vector<std::vector<complex>> values;  // [observable][time]
    std::vector<int> hops;                     // per record
    std::vector<double> max_sigma;             // running max |sigma|
    std::vector<double> max_sigma_dot;
    bool truncated = false;
};

struct Dynamics {
    DiabaticModel model;
    ConstraintSet set;
    IntegratorConfig cfg;
    double hbar = 1.0;
};

/// Runs one trajectory from `state`, recording weight x chi^{b b'}(X_t) for every observable.
/// Continues to consume `rng` for hop decisions.
TrajectoryRecord run_trajectory(const Dynamics& dyn, TrajectoryState state, CounterRng& rng,
                                const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid);

using InitialSampler = std::function<TrajectoryState(std::size_t index, CounterRng& rng)>;

struct EnsembleOptions {
    std::size_t trajectories = 100;
    std::uint64_t seed = 1;
    bool parallel = true;
};

struct EnsembleResult {
    std::vector<double> times;
    std::vector<std::vector<complex>> mean;  // [observable][time]
    std::vector<std::vector<double>> se_re;
    std::vector<std::vector<double>> se_im;
    std::vector<double> mean_hops;
    std::vector<double> max_sigma;
    std::vector<double> max_sigma_dot;
    std::size_t used = 0;
    std::size_t truncated = 0;
    std::map<std::string, std::size_t> failures;  // by error kind
    std::vector<TrajectoryRecord> records;        // only when keep_records
};

/// Monte Carlo average over independent trajectories; trajectory i draws from stream (seed, i).
/// The reduction is a fixed pairwise tree over trajectory index, so results do not depend on
/// the thread count or on `parallel`.
EnsembleResult propagate_ensemble(const InitialSampler& initial, const Dynamics& dyn,
                                  const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid,
                                  const EnsembleOptions& options, bool keep_records = false);

/// Name of the error class for failure bookkeeping.
std::string failure_kind(const std::exception& e);

}  // namespace qcdirac
