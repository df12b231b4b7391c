#pragma once

#include "curvlab/entropy.hpp"
#include "curvlab/report.hpp"
#include "curvlab/space.hpp"

#include <vector>

namespace curvlab {

struct StepDiagnostics {
  int newton_iterations = 0;
  double residual = 0.0;
};

/// Backward-Euler trajectory of ∂ₜρ = ΔP(ρ): states[k] is the density at times[k].
struct DiffusionTrajectory {
  FiniteSpace space;
  EntropyModel model;
  std::vector<double> times;
  std::vector<Field> states;
  std::vector<StepDiagnostics> steps;

  int step_count() const { return static_cast<int>(steps.size()); }
  double tau() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  DensityField density(int k) const { return DensityField(space, states[k]); }
};

/// Solves ρ′ − τΔP(ρ′) = ρ by Newton iteration on z = P(ρ′).
DensityField resolvent_step(const FiniteSpace& space, const EntropyModel& model,
                            const DensityField& rho, double tau, StepDiagnostics* diag = nullptr);

/// ρₜ ≈ J_{t/n}ⁿ ρ₀, recording every step.
DiffusionTrajectory evolve(const FiniteSpace& space, const EntropyModel& model,
                           const DensityField& rho0, double t, int n);

/// L¹ contraction of the positive part along the grid, order preservation for ordered data,
/// and the dual-norm contraction ‖u_t‖² + 2a∫‖u‖²_{L²} ≤ ‖u_0‖² when the masses agree.
CheckReport l1_contraction_check(const FiniteSpace& space, const EntropyModel& model,
                                 const DensityField& rho1, const DensityField& rho2, double t,
                                 int n);

struct ConvexFunction {
  ScalarFn W;
  ScalarFn dW;
};

/// ∫W(ρ_t) + Σ τ E(P(ρ), W′(ρ)) = ∫W(ρ₀) up to the time-discretization residual;
/// the margin is the smallest per-step decay of ∫W(ρ).
CheckReport entropy_dissipation_report(const DiffusionTrajectory& traj, const ConvexFunction& W);

/// 4E(√ρ, √ρ).
double fisher_information(const FiniteSpace& space, const DensityField& rho);

}  // namespace curvlab
