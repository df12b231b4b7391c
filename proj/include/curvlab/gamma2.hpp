#pragma once

#include "curvlab/diffusion.hpp"
#include "curvlab/entropy.hpp"
#include "curvlab/report.hpp"
#include "curvlab/space.hpp"
#include "curvlab/weighted.hpp"

#include <vector>

namespace curvlab {

/// Evaluation of Γ₂(f;φ) or the outcome of a BE(K,N) scan.
struct Gamma2Report {
  double value = 0.0;
  /// ∫ ½Γ(f)Δφ + Δf Γ(f,φ) + φ(Δf)² dm.
  double alternative = 0.0;
  /// Pointwise density γ₂(f) with Γ₂(f;φ) = Σ γ₂(f)φm.
  Field pointwise;

  double K = 0.0;
  double N = kInf;
  bool holds = true;
  int worst_point = -1;
  /// Smallest eigenvalue over all points of the localized form.
  double margin = 0.0;
  Field witness;
  std::vector<double> point_margins;

  const char* verdict() const { return holds ? "pass" : "fail"; }
};

/// ½ Σ [Γ(f,g)Δφ − Γ(f,Δg)φ − Γ(g,Δf)φ] m.
double gamma2_form(const FiniteSpace& space, const Field& f, const Field& g, const Field& phi);
double gamma2_form(const FiniteSpace& space, const Field& f, const Field& phi);
double gamma2_form_alt(const FiniteSpace& space, const Field& f, const Field& phi);
/// γ₂(f) = ½ΔΓ(f) − Γ(f,Δf).
Field gamma2_density(const FiniteSpace& space, const Field& f);
Gamma2Report gamma2_report(const FiniteSpace& space, const Field& f, const Field& phi);

/// C_x with Γ(f,g)(x) = fᵀ C_x g.
Eigen::MatrixXd gamma_matrix(const FiniteSpace& space, int x);
/// G_z with γ₂(f)(z) = fᵀ G_z f.
Eigen::MatrixXd gamma2_matrix(const FiniteSpace& space, int z);

/// BE(K,N) by positive semidefiniteness of γ₂ − KΓ − (1/N)(Δ·)² at every point, on the
/// coordinates within graph distance 2 of the point with f(z) = 0.
Gamma2Report be_check(const FiniteSpace& space, double K, double N = kInf);
/// Largest K with BE(K,N) (bisection to 1e-9); −∞ when none.
double optimal_curvature(const FiniteSpace& space, double N = kInf);
/// Smallest N with BE(K,N); +∞ if only N=∞ works, NaN if BE(K,∞) fails.
double optimal_dimension(const FiniteSpace& space, double K);

/// Γ₂(f;P(φ)) + ∫R(φ)(Δf)² − K∫Γ(f)P(φ).
CheckReport nonlinear_be_check(const FiniteSpace& space, const EntropyModel& model, double K,
                               double N, const Field& f, const Field& phi, double tol = 1e-12);

/// LHS − RHS of the Hamiltonian derivative identity; exact for linear P.
CheckReport hamiltonian_residual(const FiniteSpace& space, const EntropyModel& model,
                                 const Field& rho, const Field& phi, double tol = 1e-12);

/// e^{2Λ(s−t)}E*_{ρ_s}(w_s) ≤ E*_{ρ_t}(w_t) for all grid times t < s along the forward
/// linearized flow. Margins are relative to E*_{ρ_0}(w_0).
CheckReport dual_action_decay_check(const DiffusionTrajectory& diff, const Field& w0,
                                    double Lambda, double tol = -1.0);

}  // namespace curvlab
