#include "curvlab/linearized.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace curvlab {

namespace {

/// Factorizes A_k = M diag(ᾱ_k)⁻¹ − τ_k K, shared by the forward and backward steps.
class StepSolver {
 public:
  explicit StepSolver(const FiniteSpace& space) : space_(space) {
    A_ = -space.stiffness();
    solver_.analyzePattern(A_);
  }

  void factor(const Field& alpha, double tau) {
    const int n = space_.n();
    for (int x = 0; x < n; ++x)
      if (!(alpha[x] > 0) || !std::isfinite(alpha[x]))
        throw NumericalError("linearized step: coefficient is not positive and finite");
    A_ = -tau * space_.stiffness();
    for (int x = 0; x < n; ++x) A_.coeffRef(x, x) += space_.measure()[x] / alpha[x];
    solver_.factorize(A_);
    if (solver_.info() != Eigen::Success) throw NumericalError("linearized step system is singular");
  }

  Field solve(const Field& rhs) const { return solver_.solve(rhs); }

 private:
  const FiniteSpace& space_;
  SparseMatrix A_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

void check_traj(const DiffusionTrajectory& traj) {
  if (traj.states.size() < 2) throw std::invalid_argument("trajectory needs at least one step");
  if (!traj.model.regular())
    throw std::invalid_argument("linearized equations need a regular pressure");
}

}  // namespace

std::vector<Field> interval_coefficients(const DiffusionTrajectory& traj) {
  const auto& model = traj.model;
  const int n = traj.space.n();
  std::vector<Field> out;
  out.reserve(traj.states.size() - 1);
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const Field& a = traj.states[k];
    const Field& b = traj.states[k + 1];
    Field alpha(n);
    for (int x = 0; x < n; ++x) {
      const double dr = b[x] - a[x];
      const double scale = std::max(std::abs(a[x]), std::abs(b[x]));
      if (std::abs(dr) <= 1e-6 * std::max(scale, 1e-12))
        alpha[x] = model.dP(0.5 * (a[x] + b[x]));
      else
        alpha[x] = (model.P(b[x]) - model.P(a[x])) / dr;
    }
    out.push_back(std::move(alpha));
  }
  return out;
}

LinearizedTrajectory backward_solve(const DiffusionTrajectory& traj, const Field& phi_T,
                                    const std::vector<Field>& psi) {
  check_traj(traj);
  const FiniteSpace& space = traj.space;
  const int n = space.n();
  const std::size_t K = traj.states.size() - 1;
  if (phi_T.size() != n) throw std::invalid_argument("final datum size does not match the space");
  if (!psi.empty() && psi.size() != K)
    throw std::invalid_argument("source must provide one field per interval");

  LinearizedTrajectory out;
  out.direction = Direction::backward;
  out.times = traj.times;
  out.coefficients = interval_coefficients(traj);
  out.fields.assign(K + 1, Field());
  out.fields[K] = phi_T;
  const Eigen::VectorXd& m = space.measure();

  StepSolver solver(space);
  for (std::size_t k = K; k-- > 0;) {
    const double tau = traj.times[k + 1] - traj.times[k];
    const Field& alpha = out.coefficients[k];
    solver.factor(alpha, tau);
    Field rhs = out.fields[k + 1];
    if (!psi.empty()) rhs -= tau * psi[k];
    out.fields[k] = solver.solve(rhs.cwiseProduct(m).cwiseQuotient(alpha));
  }

  // Energy identity: Σ_{j≥k} τ∫(φ̇² − ψφ̇)/ᾱ dm + ½E(φ_k) − ½E(φ_T).
  out.energy_residual.assign(K + 1, 0.0);
  const double eT = 0.5 * dirichlet_energy(space, phi_T);
  double acc = 0.0;
  for (std::size_t k = K; k-- > 0;) {
    const double tau = traj.times[k + 1] - traj.times[k];
    const Field dphi = (out.fields[k + 1] - out.fields[k]) / tau;
    Field integrand = dphi.cwiseProduct(dphi);
    if (!psi.empty()) integrand -= psi[k].cwiseProduct(dphi);
    acc += tau * integrand.cwiseQuotient(out.coefficients[k]).dot(m);
    out.energy_residual[k] = acc + 0.5 * dirichlet_energy(space, out.fields[k]) - eT;
  }
  return out;
}

LinearizedTrajectory forward_linearized_solve(const DiffusionTrajectory& traj, const Field& w0) {
  check_traj(traj);
  const FiniteSpace& space = traj.space;
  const std::size_t K = traj.states.size() - 1;
  if (w0.size() != space.n()) throw std::invalid_argument("initial datum size does not match the space");

  LinearizedTrajectory out;
  out.direction = Direction::forward;
  out.times = traj.times;
  out.coefficients = interval_coefficients(traj);
  out.fields.reserve(K + 1);
  out.fields.push_back(w0);
  const Eigen::VectorXd& m = space.measure();

  StepSolver solver(space);
  for (std::size_t k = 0; k < K; ++k) {
    const double tau = traj.times[k + 1] - traj.times[k];
    const Field& alpha = out.coefficients[k];
    solver.factor(alpha, tau);
    const Field y = solver.solve(out.fields[k].cwiseProduct(m));
    out.fields.push_back(y.cwiseQuotient(alpha));
  }
  return out;
}

CheckReport pairing_check(const FiniteSpace& space, const LinearizedTrajectory& fwd,
                          const LinearizedTrajectory& bwd) {
  if (fwd.direction != Direction::forward || bwd.direction != Direction::backward)
    throw std::invalid_argument("pairing_check expects a forward and a backward trajectory");
  if (fwd.times.size() != bwd.times.size()) throw std::invalid_argument("time grids do not match");
  for (std::size_t k = 0; k < fwd.times.size(); ++k)
    if (std::abs(fwd.times[k] - bwd.times[k]) > 1e-14 * std::max(1.0, std::abs(fwd.times[k])))
      throw std::invalid_argument("time grids do not match");
  const Eigen::VectorXd& m = space.measure();
  CheckReport rep;
  rep.name = "pairing";
  const double p0 = fwd.fields[0].cwiseProduct(bwd.fields[0]).dot(m);
  const double scale =
      fwd.fields[0].cwiseAbs().cwiseProduct(bwd.fields[0].cwiseAbs()).dot(m);
  rep.tolerance = 1e-12 * std::max(1.0, scale);
  double worst = 0.0;
  for (std::size_t k = 0; k < fwd.fields.size(); ++k) {
    const double p = fwd.fields[k].cwiseProduct(bwd.fields[k]).dot(m);
    rep.residuals.push_back(p - p0);
    if (std::abs(p - p0) > worst) {
      worst = std::abs(p - p0);
      rep.witness = {fwd.times[k]};
    }
  }
  rep.margin = -worst;
  rep.diagnostics["pairing"] = p0;
  rep.holds = worst <= rep.tolerance;
  return rep;
}

CheckReport perturbation_derivative_check(const FiniteSpace& space, const EntropyModel& model,
                                          const DensityField& rho_bar, const Field& w_bar,
                                          const std::vector<double>& eps_list, double t, int n) {
  if (eps_list.empty()) throw std::invalid_argument("perturbation check needs at least one epsilon");
  std::vector<double> eps = eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  for (double e : eps) {
    if (!(e > 0)) throw std::invalid_argument("perturbation sizes must be positive");
    if (((rho_bar.values() + e * w_bar).array() < 0).any())
      throw std::invalid_argument("perturbed initial datum is negative");
  }
  const auto base = evolve(space, model, rho_bar, t, n);
  const auto lin = forward_linearized_solve(base, w_bar);
  const Field& wt = lin.fields.back();

  CheckReport rep;
  rep.name = "perturbation_derivative";
  rep.tolerance = 1e-9 * std::max(1.0, wt.lpNorm<Eigen::Infinity>());
  std::vector<double> errors;
  for (double e : eps) {
    const auto pert = evolve(space, model, DensityField(space, rho_bar.values() + e * w_bar), t, n);
    const Field q = (pert.states.back() - base.states.back()) / e;
    errors.push_back((q - wt).lpNorm<Eigen::Infinity>());
  }
  rep.residuals = errors;
  rep.margin = errors.size() > 1 ? kInf : 0.0;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    if (errors[i] - errors[i + 1] < rep.margin) {
      rep.margin = errors[i] - errors[i + 1];
      rep.witness = {eps[i], eps[i + 1]};
    }
  }
  rep.diagnostics["tau"] = t / n;
  rep.diagnostics["max_error"] = *std::max_element(errors.begin(), errors.end());
  rep.holds = rep.margin >= -rep.tolerance;
  return rep;
}

double time_derivative_residual(const DiffusionTrajectory& traj) {
  check_traj(traj);
  const auto alpha = interval_coefficients(traj);
  const std::size_t K = traj.states.size() - 1;
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double tau0 = traj.times[k + 1] - traj.times[k];
    const double tau1 = traj.times[k + 2] - traj.times[k + 1];
    const Field w0 = (traj.states[k + 1] - traj.states[k]) / tau0;
    const Field w1 = (traj.states[k + 2] - traj.states[k + 1]) / tau1;
    const Field r = (w1 - w0) / tau1 - laplacian(traj.space, alpha[k].cwiseProduct(w1));
    worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace curvlab
