#pragma once

#include <string>

#include <json.hpp>

#include "qcdirac/constraints.hpp"
#include "qcdirac/quantum.hpp"

namespace qcdirac {

// Constraints, with the dof count they imply and an on-manifold starting configuration.
struct ConstraintChoice {
    std::vector<HolonomicConstraint> constraints;
    Eigen::Index dofs = 0;
    Vector start;
};

// sigma = (|r_i - r_j|^2 - a^2) / 2 for particles in `dim` dimensions.
HolonomicConstraint dimer_bond(int dim, int i, int j, double bond);
// sigma = R_y - c R_x^2
HolonomicConstraint parabola_bead(int x, int y, double curvature);
// sigma = u . R - b
HolonomicConstraint linear_plane(const Vector& normal, double offset);

/// Gallery lookup by name: dimer-bond, parabola-bead, linear-plane, none.
///   dimer-bond:    particles (2), dim (2), bond (1.0), pair ([0, 1])
///   parabola-bead: curvature (1.0), dofs (2); sigma uses coordinates 0 and 1
///   linear-plane:  normal ([1, 1]), offset (0.0)
///   none:          dofs (1)
ConstraintChoice make_constraints(const std::string& name, const nlohmann::json& params);

/// Model lookup by name, N the number of classical dofs:
///   two-level-linear:   h = [[c R_k, delta], [delta, -c R_k]] + (k/2)|R|^2 I; coupling c (1.0), delta (0.1),
///                       spring k (1.0), coord (0)
///   two-level-constant: h = [[eps, delta], [delta, -eps]] + (k/2)|R|^2 I; epsilon (0.5), delta (0.1), spring (1.0)
DiabaticModel make_model(const std::string& name, const nlohmann::json& params, Eigen::Index dofs);

struct System {
    ConstraintSet constraints;
    DiabaticModel model;
    Vector start_R;
};

/// masses: number (uniform) or array of length N; defaults to 1.
System build_system(const std::string& constraint, const nlohmann::json& constraint_params, const std::string& model,
                    const nlohmann::json& model_params, const nlohmann::json& masses = nullptr);

}  // namespace qcdirac
