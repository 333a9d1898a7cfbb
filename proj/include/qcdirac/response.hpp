#pragma once

#include <map>
#include <string>

#include "qcdirac/propagator.hpp"
#include "qcdirac/statmech.hpp"

namespace qcdirac {

/// H(t) = H0 - A F(t)
struct Perturbation {
    MatrixPhaseFunction A;
    std::function<double(double)> force;
};

/// Extra compressibility of the perturbation, -{ln det Z, A}_D. Zero for l = 0 and for A = A(R).
CMatrix kappa_A(const DiracEngine& engine, const MatrixPhaseFunction& A, const PhasePoint& X);
/// Same quantity from its definition sum_ij (dB^D_ij/dX_i)(dA/dX_j), B^D differentiated numerically.
CMatrix kappa_A_divergence(const DiracEngine& engine, const MatrixPhaseFunction& A, const PhasePoint& X);

/// iL_A rho + (1/2)[kappa_A, rho]_+ for the canonical density (order hbar optional), split into
/// the bracket acting on everything but det Z, the part from differentiating det Z, and the
/// compressibility part. Diabatic basis; the constraint deltas are left out because every Dirac
/// bracket with a constraint function vanishes.
struct ResponseSource {
    CMatrix bracket;
    CMatrix measure;
    CMatrix kappa;
    double density = 0.0;  // det Z sum_a exp(-beta H0^a), the sampled weight at X
};
ResponseSource response_source(const StationaryDensity& sd, const DiabaticModel& model, const DiracEngine& engine,
                               const MatrixPhaseFunction& A, const PhasePoint& X, double hbar, bool order_hbar);

struct ResponseOptions {
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
    bool parallel = true;
    bool order_hbar = true;
    SamplerOptions sampler;
};

struct TermSeries {
    std::vector<double> mean;
    std::vector<double> se;
    std::vector<double> mean_imag;
};

struct ResponseSeries {
    std::vector<double> times;
    TermSeries total, bracket, measure, kappa;
    std::size_t used = 0;
    std::size_t truncated = 0;
    std::map<std::string, std::size_t> failures;
    double max_measure_term = 0.0;     // max |entry| over samples
    double max_kappa_term = 0.0;
    double max_measure_plus_kappa = 0.0;
    double max_antihermitian = 0.0;    // of the summed source
    double acceptance = 0.0;           // sampler
};

/// Phi_BA(t) = -Tr' int dX B(X; t) (iL_A rho + (1/2)[kappa_A, rho]_+), estimated by sampling X from
/// the order-zero density and running one trajectory per surface pair (a, a'), B(t)_{a'a} weighted by
/// the pair's source element. Sample i, pair p uses stream (seed, i n^2 + p).
ResponseSeries response_phi_from_samples(const MatrixPhaseFunction& B, const MatrixPhaseFunction& A,
                                         const StationaryDensity& sd, const Dynamics& dyn, const TimeGrid& grid,
                                         const std::vector<StationarySample>& samples, std::uint64_t seed,
                                         bool parallel, bool order_hbar);

/// Samples the stationary density (streams above 2^40) and calls response_phi_from_samples.
ResponseSeries response_phi(const MatrixPhaseFunction& B, const Perturbation& pert, const StationaryDensity& sd,
                            const Dynamics& dyn, const TimeGrid& grid, const Vector& start_R,
                            const ResponseOptions& options);

struct Convolution {
    std::vector<double> values;  // Delta B at each grid time
    bool coarse_grid = false;    // F changes noticeably inside a grid cell
};

/// Delta B(t_k) = int_0^t_k Phi(t_k - tau) F(tau) dtau by the trapezoid rule on a uniform grid from 0.
Convolution convolve_response(const std::vector<double>& times, const std::vector<double>& phi,
                              const std::function<double(double)>& force);

}  // namespace qcdirac
