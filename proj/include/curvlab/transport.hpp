#pragma once

#include "curvlab/entropy.hpp"
#include "curvlab/report.hpp"
#include "curvlab/space.hpp"

#include <vector>

namespace curvlab {

/// Curve of probability densities on s ∈ [0,1], optionally with potentials and
/// velocity densities filled by curve_velocity.
struct MeasureCurve {
  FiniteSpace space;
  std::vector<double> times;
  std::vector<Field> densities;
  std::vector<Field> potentials;
  std::vector<Field> velocity2;
  /// Largest per-component mass defect removed from each ℓ_s.
  std::vector<double> compatibility_defects;

  int size() const { return static_cast<int>(times.size()); }
  bool has_velocity() const { return velocity2.size() == times.size(); }
};

/// Validates times (0 = s₀ < … < s_J = 1) and unit masses.
MeasureCurve make_curve(const FiniteSpace& space, std::vector<double> times,
                        std::vector<Field> densities);

struct Coupling {
  Eigen::MatrixXd plan;
  double cost = 0.0;
  /// Dual potentials certifying optimality: u_i + v_j ≤ d²(i,j) with equality on the plan.
  Field u;
  Field v;
  double duality_gap = 0.0;
  double min_reduced_cost = 0.0;
  int pivots = 0;
};

struct W2Result {
  double distance = 0.0;
  Coupling coupling;
};

/// Exact W₂ by the transportation simplex (northwest corner start, Dantzig pricing,
/// lowest-index ties). Inputs are densities with respect to m.
W2Result w2_distance(const FiniteSpace& space, const DensityField& mu0, const DensityField& mu1);

/// Atom of a monotone coupling on a 1-D grid: mass moved from point i to point j
/// along a displacement of signed length `shift` (lifted on the circle).
struct QuantilePiece {
  int i;
  int j;
  double mass;
  double shift;
};

/// Optimal monotone coupling on a path or circle grid.
std::vector<QuantilePiece> quantile_coupling(const FiniteSpace& space, const DensityField& mu0,
                                             const DensityField& mu1);
/// W₂ via quantile_coupling; requires a tagged grid.
double w2_grid(const FiniteSpace& space, const DensityField& mu0, const DensityField& mu1);
/// w2_grid on tagged grids, w2_distance otherwise.
double wasserstein2(const FiniteSpace& space, const DensityField& mu0, const DensityField& mu1);

/// ∫Q₁φ dμ₁ − ∫φ dμ₀.
double kantorovich_dual_bound(const FiniteSpace& space, const DensityField& mu0,
                              const DensityField& mu1, const Field& phi);

/// Displacement interpolation of the quantile functions with J steps, re-binned linearly.
MeasureCurve geodesic_1d(const FiniteSpace& space, const DensityField& rho0,
                         const DensityField& rho1, int J);

/// Fills φ_s = weighted_poisson(ρ_s, ℓ_s) and v²_s = Γ(φ_s) (zero off the support), with
/// ℓ_s the centered difference quotient (one-sided at the ends).
MeasureCurve curve_velocity(const MeasureCurve& curve);

MeasureCurve reverse_curve(const MeasureCurve& curve);

/// max_j |W₂(μ₀,μ_{s_j}) − s_j W₂(μ₀,μ₁)|.
double constant_speed_defect(const MeasureCurve& curve);

enum class ActionWeight { constant, omega, identity, green };

/// Σ_s Δs·weight(s)·Σ_x Q(ρ_s)v²_sρ_s m with trapezoid weights in s; `t` is the Green pole.
double weighted_action(const MeasureCurve& curve, const EntropyModel& model, ActionWeight weight,
                       double t = 0.5);
/// Σ_s Δs Σ_x v²_sρ_s m.
double kinetic_action(const MeasureCurve& curve);
/// A_Q(μ) − A_{ωQ}(μ) − A_{ωQ}(μ reversed).
double time_reversal_residual(const MeasureCurve& curve, const EntropyModel& model);

/// U_N(μ_t) ≤ (1−t)U_N(μ₀) + tU_N(μ₁) − K A^{(t)}_{Q_N} at every grid time (N = ∞ uses the
/// logarithmic entropy). With sigma_form, also the distortion-coefficient form along the
/// optimal coupling of the endpoints.
CheckReport cdstar_convexity_check(const MeasureCurve& curve, double K, double N,
                                   bool sigma_form = false, double tol = -1.0);

/// Discrete EVI along the implicit flow: per step
/// ½[W₂²(μ_{k+1},ν) − W₂²(μ_k,ν)]/τ + U(μ_{k+1}) ≤ U(ν) − K A_{ωQ}(μ_{k+1},ν).
CheckReport evi_check(const FiniteSpace& space, const EntropyModel& model, const DensityField& rho,
                      const DensityField& nu, double K, double T, int n, int J = 16,
                      double tol = -1.0);

/// W₂(μ_t,ν_t) ≤ e^{−Λt}W₂(μ₀,ν₀)(1+tol) with Λ = inf K Q.
CheckReport contraction_check(const FiniteSpace& space, const EntropyModel& model,
                              const DensityField& rho, const DensityField& sigma, double K,
                              double T, int n, double tol = -1.0);

/// uniform evolves every slice by S_t, scaled evolves slice s by S_{st}.
enum class ActionFlow { uniform, scaled };

/// ½A₂(t) + K∫A_Q ≤ ½A₂(0) (uniform) or its energy variant with the identity weight and the
/// entropy of the end slices (scaled).
CheckReport curve_action_monotonicity_check(const MeasureCurve& curve, const EntropyModel& model,
                                            double K, double T, int n,
                                            ActionFlow flow = ActionFlow::uniform,
                                            double tol = -1.0);

}  // namespace curvlab
