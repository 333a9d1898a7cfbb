#pragma once

#include <cstdint>
#include <vector>

#include "qcdirac/dirac.hpp"
#include "qcdirac/parallel.hpp"
#include "qcdirac/propagator.hpp"
#include "qcdirac/quantum.hpp"

namespace qcdirac {

enum class DensityMode { canonical, microcanonical };

struct StationaryDensity {
    DensityMode mode = DensityMode::canonical;
    double beta = 1.0;
    double energy_shell = 0.0;  // microcanonical only
    double Q = 1.0;
    double delta_width = 1e-3;  // Gaussian width of the softened deltas

    void validate() const;
};

/// H_0^a = P^2/2M + E_a
double adiabatic_energy(const PhasePoint& X, const AdiabaticFrame& frame, int a);

/// Gaussian of width w, unit mass.
double softened_delta(double x, double w);

/// Order-hbar^0 density element (a, b); zero off the diagonal. Constraint deltas are softened.
double rho0(const StationaryDensity& sd, const PhasePoint& X, int a, int b, const AdiabaticFrame& frame,
            const DiracEngine& engine);

/// [(1 - e^{-beta x}) / (-x) + (beta/2)(1 + e^{-beta x})] for x = E_a - E_b, with a series branch
/// near x = 0 where the two terms cancel (the bracket vanishes like beta^3 x^2 / 12).
double rho1_bracket(double beta, double x);

/// Order-hbar density element -i (P/M).d_ab rho0_b [bracket].
complex rho1(const StationaryDensity& sd, const PhasePoint& X, int a, int b, const AdiabaticFrame& frame,
             const DiracEngine& engine);

/// Densities as diabatic-basis matrix functions (gauge independent).
MatrixPhaseFunction rho0_matrix(const StationaryDensity& sd, const DiabaticModel& model, const DiracEngine& engine);
MatrixPhaseFunction rho1_matrix(const StationaryDensity& sd, const DiabaticModel& model, const DiracEngine& engine);
/// The canonical densities with det Z, Q and the constraint deltas left out:
/// exp(-beta K) exp(-beta h) (analytic gradient) and the matching order-hbar term.
MatrixPhaseFunction thermal_rho0(double beta, const DiabaticModel& model);
MatrixPhaseFunction thermal_rho1(double beta, const DiabaticModel& model);
/// P^2/2M + h(R) with analytic gradient.
MatrixPhaseFunction hamiltonian_matrix(const DiabaticModel& model);

/// Left minus right side of the order-by-order stationarity equations at X:
///   order 0:      [H0, rho_next]
///   order n + 1:  i[H0, rho_next] - (1/2)({H0, rho_prev}_D - {rho_prev, H0}_D) + (1/2)[kappa0, rho_prev]_+
CMatrix recursion_residual(int order, const MatrixPhaseFunction& rho_prev, const MatrixPhaseFunction& rho_next,
                           const MatrixPhaseFunction& H0, const DiracEngine& engine, const PhasePoint& X);

struct ResidualScan {
    double max_residual = 0.0;
    std::size_t evaluated = 0;
    std::size_t excluded = 0;  // points where a derivative was not finite
};
ResidualScan scan_residual(int order, const MatrixPhaseFunction& rho_prev, const MatrixPhaseFunction& rho_next,
                           const MatrixPhaseFunction& H0, const DiracEngine& engine,
                           const std::vector<PhasePoint>& points);

// ---- sampling ----

struct SamplerOptions {
    std::size_t chains = 8;
    std::size_t burn_in = 500;
    std::size_t thin = 10;
    double step = 0.3;  // tangent proposal width in mass-weighted coordinates
    bool parallel = true;
};

struct StationarySample {
    TrajectoryState state;
    double weight = 1.0;
};

struct SampleSet {
    std::vector<StationarySample> samples;
    std::size_t proposed = 0;
    std::size_t accepted = 0;
    std::size_t projection_failures = 0;  // forward Newton did not converge
    std::size_t reverse_failures = 0;     // reverse projection missed the start point
    double acceptance() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

/// Samples (R, P, a) from det Z exp(-beta H0^a) delta(xi) (canonical mode).
/// Positions: manifold Metropolis in q = M^{1/2} R, where the target is exp(-beta E_a) on surface
/// measure; surface index: Gibbs; momenta: Gaussian, projected onto sigma_dot = 0.
/// Chain c uses stream (seed, stream_base + c); samples are concatenated in chain order.
SampleSet sample_stationary(const StationaryDensity& sd, const ConstraintSet& set, const DiabaticModel& model,
                            const Vector& start_R, std::size_t count, std::uint64_t seed,
                            const SamplerOptions& options = {}, std::uint64_t stream_base = 1ULL << 40);

/// Momenta from N(0, M/beta), projected onto the tangent space.
Vector tangent_momenta(const ConstraintSet& set, const Vector& R, double beta, CounterRng& rng);

// ---- Fredholm condition ----

using AdiabaticDensity = std::function<CMatrix(const PhasePoint&, const AdiabaticFrame&)>;

/// sum_{b > b'} 2 Re(J^D_{aa, bb'} rho^{bb'}) at X, with the momentum derivative by central differences.
double fredholm_integrand(const AdiabaticDensity& rho, const PhasePoint& X, const AdiabaticFrame& frame, int a,
                          const ConstraintSet& set, FrequencyMode mode);

struct FredholmEstimate {
    std::vector<MeanEstimate> per_test;  // one per f in {1, H, H^2}
    double max_parity_violation = 0.0;   // |g(X) + g(X with -P)| over samples
};

/// Monte Carlo estimate of the orthogonality integral for f in {1, H0, H0^2}, in units of the
/// sampler's normalization, using the order-hbar density.
FredholmEstimate fredholm_check(const StationaryDensity& sd, const DiracEngine& engine, const DiabaticModel& model,
                                const std::vector<StationarySample>& samples, FrequencyMode mode, bool parallel = true);

}  // namespace qcdirac
