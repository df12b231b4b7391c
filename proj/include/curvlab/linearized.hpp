#pragma once

#include "curvlab/diffusion.hpp"
#include "curvlab/report.hpp"

#include <vector>

namespace curvlab {

enum class Direction { forward, backward };

/// Solution of a linearized equation on the time grid of a diffusion trajectory.
struct LinearizedTrajectory {
  Direction direction = Direction::forward;
  std::vector<double> times;
  std::vector<Field> fields;
  /// Frozen coefficient ᾱ_k on [t_k, t_{k+1}].
  std::vector<Field> coefficients;
  /// Backward only: residual of the energy identity at each t_k (zero at the final time).
  std::vector<double> energy_residual;
};

/// Interval averages of P′(ρ) along the linear interpolant of consecutive states:
/// (P(ρ_{k+1}) − P(ρ_k))/(ρ_{k+1} − ρ_k), or P′(ρ_k) where the states agree.
std::vector<Field> interval_coefficients(const DiffusionTrajectory& traj);

/// Implicit steps (I − τ diag(ᾱ_k)Δ)φ_k = φ_{k+1} − τψ_k from φ_K = φ_T.
/// psi is empty (ψ ≡ 0) or holds one field per interval.
LinearizedTrajectory backward_solve(const DiffusionTrajectory& traj, const Field& phi_T,
                                    const std::vector<Field>& psi = {});

/// Steps (I − τΔ diag(ᾱ_k))w_{k+1} = w_k, the m-adjoint of the backward step.
LinearizedTrajectory forward_linearized_solve(const DiffusionTrajectory& traj, const Field& w0);

/// Σ w_k φ_k m is constant along the grid.
CheckReport pairing_check(const FiniteSpace& space, const LinearizedTrajectory& fwd,
                          const LinearizedTrajectory& bwd);

/// Difference quotients (S_t(ρ̄+εw̄) − S_tρ̄)/ε against the forward linearized solution;
/// errors must not grow as ε decreases.
CheckReport perturbation_derivative_check(const FiniteSpace& space, const EntropyModel& model,
                                          const DensityField& rho_bar, const Field& w_bar,
                                          const std::vector<double>& eps_list, double t,
                                          int n = 4096);

/// max_k ‖(w_{k+1} − w_k)/τ − Δ(ᾱ_k w_{k+1})‖_∞ for w_k = (ρ_{k+1} − ρ_k)/τ.
double time_derivative_residual(const DiffusionTrajectory& traj);

}  // namespace curvlab
