#pragma once

#include <string>

#include "qcdirac/quantum.hpp"

namespace qcdirac {

/// Observables in the diabatic basis, by name:
///   identity, population:k (adiabatic projector), diabatic:k, position:i, momentum:i, energy
MatrixPhaseFunction make_observable(const std::string& name, const DiabaticModel& model, Eigen::Index dofs);

/// <b| chi |b2> with the adiabatic states of `frame`.
complex adiabatic_element(const CMatrix& chi, const AdiabaticFrame& frame, int b, int b2);

}  // namespace qcdirac
