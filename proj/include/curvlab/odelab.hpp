#pragma once

#include "curvlab/report.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace curvlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// ẋ = 𝔣(x) with Lagrangian ½⟨G(x)w,w⟩ and Hamiltonian ½⟨φ,H(x)φ⟩, H = G⁻¹.
struct FlowSystem {
  std::string name;
  int dim = 0;
  std::function<Vec(const Vec&)> field;
  std::function<Mat(const Vec&)> jacobian;
  std::function<Mat(const Vec&)> metric;
  /// ∂G/∂x_k.
  std::function<Mat(const Vec&, int)> metric_derivative;
  /// Set for gradient systems 𝔣 = −H∇U.
  std::function<double(const Vec&)> potential;
  std::function<Vec(const Vec&)> gradient;

  bool potential_mode() const { return static_cast<bool>(potential) && static_cast<bool>(gradient); }
};

/// G SPD at every sample and, in potential mode, |𝔣 + H∇U| ≤ 1e-10.
void validate_system(const FlowSystem& sys, const std::vector<Vec>& samples);

FlowSystem linear_system(const Mat& A);
/// U = ½xᵀSx with flat metric.
FlowSystem quadratic_potential_system(const Mat& S);
/// 𝔣 = −θ(x − μ), flat metric.
FlowSystem ou_system(double theta, const Vec& mean);
/// Scalar toy: 𝔣 = −x with mobility h(x) = 1 + x², i.e. G = 1/h.
FlowSystem nonlinear_mobility_system();
/// Registry lookup: linear, quadratic-potential, ou, nonlinear-mobility.
FlowSystem system_by_name(const std::string& name, int dim = 2);
std::vector<std::string> system_names();

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<Vec> x;
  std::vector<Vec> w;
  std::vector<Vec> phi;
  std::vector<double> pairing;
};

/// RK4 for x; w advanced by the RK4 transition matrix of the linearized system and φ pulled
/// back by its transpose, so ⟨w_k, φ_k⟩ is constant up to round-off.
OdeTrajectory integrate_system(const FlowSystem& sys, const Vec& x0, const Vec& w0, const Vec& phiT,
                               double T, int n);

/// S_T x by RK4.
Vec flow_map(const FlowSystem& sys, const Vec& x0, double T, int n);

struct HamiltonianDerivatives {
  Vec dx;
  Vec dphi;
};
HamiltonianDerivatives hamiltonian_derivatives(const FlowSystem& sys, const Vec& x, const Vec& phi);

/// ⟨H_x, 𝔣⟩ − ⟨H_φ, D𝔣ᵀφ⟩ ≥ 0 on the samples; the analytic H_x is cross-checked by central
/// differences (diagnostic fd_mismatch).
CheckReport hamiltonian_monotonicity_check(const FlowSystem& sys,
                                           const std::vector<std::pair<Vec, Vec>>& samples,
                                           double tol = 1e-12);

/// Discrete action Σ ½ΔyᵀG(midpoint)Δy·M of the polygon x0, interior..., x1.
/// `interior` stacks the M−1 interior nodes; grad (if given) receives the gradient.
double collocation_objective(const FlowSystem& sys, const Vec& x0, const Vec& x1,
                             const Vec& interior, Vec* grad = nullptr);

struct CostResult {
  double cost = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<Vec> path;
};

/// C(x0,x1) by quasi-Newton minimization of the collocation action over M segments, started
/// from the straight segment.
CostResult collocation_cost(const FlowSystem& sys, const Vec& x0, const Vec& x1, int M = 64);

/// C(S_T x0, S_T x1) ≤ C(x0, x1)(1 + tol).
CheckReport cost_contraction_check(const FlowSystem& sys, const Vec& x0, const Vec& x1, double T,
                                   int n, double tol = 1e-8, int M = 64);

/// C(x0, S_t x1) + t(U(S_t x1) − U(x0)) ≤ C(x0, x1).
CheckReport convexity_contraction_check(const FlowSystem& sys, const Vec& x0, const Vec& x1,
                                        double t, int n = 1000, double tol = 1e-8, int M = 64);

}  // namespace curvlab
