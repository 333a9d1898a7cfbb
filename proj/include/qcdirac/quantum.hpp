#pragma once

#include <vector>

#include "qcdirac/constraints.hpp"
#include "qcdirac/phase_space.hpp"

namespace qcdirac {

/// Real symmetric n x n electronic Hamiltonian h(R) in a fixed diabatic basis.
struct DiabaticModel {
    int n = 2;
    std::function<Matrix(const Vector&)> h;
    std::function<std::vector<Matrix>(const Vector&)> grad_h;  // N matrices dh/dR_k
};

inline constexpr double kDefaultGapFloor = 1e-10;

class AdiabaticFrame {
public:
    Vector R;
    Vector E;  // ascending
    Matrix U;  // columns are adiabatic states in the diabatic basis
    double hbar = 1.0;

    int n() const noexcept { return static_cast<int>(E.size()); }
    Eigen::Index dofs() const noexcept { return R.size(); }

    /// <a| dh/dR_k |b> for every k.
    const std::vector<Matrix>& dh() const noexcept { return dh_; }
    /// d_ab = <a|dh|b> / (E_b - E_a), zero on the diagonal.
    const Vector& d(int a, int b) const { return d_[index(a, b)]; }
    /// F^a = -<a|dh|a>
    Vector force(int a) const { return Fad_.row(a).transpose(); }
    const Matrix& forces() const noexcept { return Fad_; }
    /// F^ab = F^a delta_ab + hbar omega_ab d_ab
    const Vector& force(int a, int b) const { return Fmat_[index(a, b)]; }
    /// (E_a - E_b) / hbar
    double omega(int a, int b) const { return (E[a] - E[b]) / hbar; }
    Matrix omega() const;

    /// Flips the sign of state a and everything derived from it.
    void flip(int a);

    // Fills dh, d, forces from U, E and the diabatic gradients.
    void derive(const std::vector<Matrix>& grad_h_diabatic);

private:
    std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * E.size() + b; }

    std::vector<Matrix> dh_;
    std::vector<Vector> d_;
    Matrix Fad_;
    std::vector<Vector> Fmat_;
};

/// Diagonalizes h(R). Columns are sign-aligned with `prev` when given, otherwise the
/// first non-negligible component of each column is made positive.
AdiabaticFrame adiabatize(const DiabaticModel& model, const Vector& R, double hbar = 1.0,
                          const AdiabaticFrame* prev = nullptr, double gap_floor = kDefaultGapFloor);

/// Flips columns so that consecutive frames have positive overlap diagonals.
/// Throws PathTooCoarse when |<a_k|a_k+1>| < 0.5.
void frame_transport(std::vector<AdiabaticFrame>& frames);
/// Aligns `frame` against `prev` in place, with the same coarse-path check.
void align_to(AdiabaticFrame& frame, const AdiabaticFrame& prev);

enum class FrequencyMode { literal, projected };

/// P_c = G^T Z^-1 G M^-1, the mass-weighted projector onto constraint gradients.
Matrix constraint_projector(const ConstraintSet& set, const Vector& R);

/// omega_ab (1 + l)
double constrained_frequency_literal(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set);
/// omega_ab (1 + P_c) d_ab
Vector constrained_frequency_projected(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set);
/// The vector omega^D d that enters the transition operator: omega_ab (1 + l) d_ab in literal mode,
/// the projected vector otherwise.
Vector constrained_frequency_vector(const AdiabaticFrame& frame, int a, int b, const ConstraintSet& set,
                                    FrequencyMode mode);

}  // namespace qcdirac
