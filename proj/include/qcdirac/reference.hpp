#pragma once

// Plain serial implementation of unconstrained (no constraints) quantum-classical surface hopping,
// stationary sampling and response. Written against Eigen directly, without the constraint and
// Dirac machinery, and kept as the comparison target for the l = 0 code paths.

#include "qcdirac/propagator.hpp"
#include "qcdirac/statmech.hpp"

namespace qcdirac::reference {

struct Dynamics {
    DiabaticModel model;
    Vector masses;
    double dt = 1e-3;
    double hbar = 1.0;
    int max_hops = 50;
    bool hopping = true;
    double gap_floor = kDefaultGapFloor;
};

struct Trajectory {
    std::vector<std::vector<complex>> values;  // [observable][record]
    std::vector<int> hops;
    bool truncated = false;
};

/// Same random-draw pattern as the general propagator: one uniform per step with a live candidate.
Trajectory run(const Dynamics& dyn, const PhasePoint& X, int alpha, int alpha2, CounterRng& rng,
               const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid);

struct Ensemble {
    std::vector<std::vector<complex>> mean;  // [observable][record]
    std::vector<Trajectory> trajectories;    // untruncated only
    std::size_t truncated = 0;
};

/// Trajectory i draws its start and hops from stream (seed, i).
Ensemble propagate(const InitialSampler& initial, const Dynamics& dyn,
                   const std::vector<MatrixPhaseFunction>& observables, const TimeGrid& grid, std::size_t count,
                   std::uint64_t seed);

/// Random-walk Metropolis on exp(-beta E_a(R)) with Gibbs surface moves and Gaussian momenta.
std::vector<StationarySample> sample_canonical(const DiabaticModel& model, const Vector& masses, double beta,
                                               const Vector& start, std::size_t count, std::uint64_t seed,
                                               std::size_t burn_in = 500, std::size_t thin = 10, double step = 0.5);

/// Unconstrained response: Phi(t) = -Tr' int B(t) iL_A rho with Poisson brackets, same sample/pair
/// stream layout as the general estimator. Returns the mean (real part) and standard error per record.
struct Response {
    std::vector<double> mean, se;
};
Response response(const MatrixPhaseFunction& B, const MatrixPhaseFunction& A, double beta, const Dynamics& dyn,
                  const TimeGrid& grid, const std::vector<StationarySample>& samples, std::uint64_t seed,
                  bool order_hbar);

}  // namespace qcdirac::reference
