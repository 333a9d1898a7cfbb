// Times the ensemble propagator and the stationary sampler with and without the OpenMP loops.
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "qcdirac/gallery.hpp"
#include "qcdirac/observables.hpp"
#include "qcdirac/parallel.hpp"
#include "qcdirac/propagator.hpp"
#include "qcdirac/statmech.hpp"

using namespace qcdirac;

namespace {

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t trajectories = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 256;
    const System s = build_system("dimer-bond", nullptr, "two-level-linear", nullptr, nullptr);
    const Dynamics dyn{s.model, s.constraints, IntegratorConfig{}, 1.0};
    const std::vector<MatrixPhaseFunction> obs{make_observable("population:0", s.model, s.constraints.dofs())};
    const TimeGrid grid{1.0, 0.1};
    StationaryDensity sd;
    const SampleSet starts = sample_stationary(sd, s.constraints, s.model, s.start_R, trajectories, 1);
    const InitialSampler initial = [&starts](std::size_t i, CounterRng&) { return starts.samples[i].state; };

    EnsembleResult serial, parallel;
    const double ts = seconds([&] { serial = propagate_ensemble(initial, dyn, obs, grid, {trajectories, 1, false}); });
    const double tp = seconds([&] { parallel = propagate_ensemble(initial, dyn, obs, grid, {trajectories, 1, true}); });
    const bool same = serial.mean == parallel.mean;
    std::printf("propagate  %zu trajectories  serial %.3fs  openmp(%d) %.3fs  speedup %.2f  identical %s\n",
                trajectories, ts, max_threads(), tp, ts / tp, same ? "yes" : "no");

    SamplerOptions so;
    so.parallel = false;
    SampleSet a, b;
    const double ss = seconds([&] { a = sample_stationary(sd, s.constraints, s.model, s.start_R, 8000, 2, so); });
    so.parallel = true;
    const double sp = seconds([&] { b = sample_stationary(sd, s.constraints, s.model, s.start_R, 8000, 2, so); });
    std::printf("sample     8000 points        serial %.3fs  openmp(%d) %.3fs  speedup %.2f\n", ss, max_threads(), sp,
                ss / sp);
    return same ? 0 : 1;
}
