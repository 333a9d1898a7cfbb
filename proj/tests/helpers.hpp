#pragma once

#include "qcdirac/constraints.hpp"
#include "qcdirac/gallery.hpp"
#include "qcdirac/rng.hpp"

namespace testing_support {

using namespace qcdirac;

inline Vector random_vector(CounterRng& rng, Eigen::Index n, double scale = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * (2.0 * rng.uniform() - 1.0);
    return v;
}

// Random point on {sigma = 0, sigma_dot = 0} near the gallery start.
inline PhasePoint admissible_point(const ConstraintSet& set, const Vector& start, CounterRng& rng,
                                   double spread = 0.5) {
    for (;;) {
        const auto R = project_positions(set, start + random_vector(rng, set.dofs(), spread));
        if (!R) continue;
        const PhasePoint X(*R, random_vector(rng, set.dofs()), set.masses());
        return X.with_P(project_momenta(set, X));
    }
}

// Random point, constraints not imposed.
inline PhasePoint free_point(const ConstraintSet& set, const Vector& start, CounterRng& rng, double spread = 0.5) {
    return {start + random_vector(rng, set.dofs(), spread), random_vector(rng, set.dofs()), set.masses()};
}

inline System gallery(const std::string& constraint, const nlohmann::json& masses = nullptr,
                      const std::string& model = "two-level-linear") {
    return build_system(constraint, nullptr, model, nullptr, masses);
}

}  // namespace testing_support
