#include "curvlab/diffusion.hpp"

#include "curvlab/weighted.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace curvlab {

namespace {

constexpr double kNewtonTol = 1e-12;
constexpr int kNewtonMaxIter = 50;

double residual_norm(const Field& F, double scale) { return F.lpNorm<Eigen::Infinity>() / scale; }

}  // namespace

DensityField resolvent_step(const FiniteSpace& space, const EntropyModel& model,
                            const DensityField& rho, double tau, StepDiagnostics* diag) {
  if (!(tau > 0) || !std::isfinite(tau)) throw std::invalid_argument("resolvent: tau must be > 0");
  if (!model.regular())
    throw std::invalid_argument("resolvent requires a regular pressure; regularize it first");
  const int n = space.n();
  const Eigen::VectorXd& m = space.measure();
  const SparseMatrix& K = space.stiffness();
  const Field& r0 = rho.values();
  const double scale = std::max(1.0, r0.lpNorm<Eigen::Infinity>());

  Field z(n);
  for (int x = 0; x < n; ++x) z[x] = model.P(r0[x]);
  auto pinv = [&](const Field& zz) {
    Field out(n);
    for (int x = 0; x < n; ++x) out[x] = model.P_inverse(zz[x]);
    return out;
  };
  auto residual = [&](const Field& zz) -> Field {
    return pinv(zz) - tau * (K * zz).cwiseQuotient(m) - r0;
  };

  Field F = residual(z);
  double res = residual_norm(F, scale);
  SparseMatrix J = -tau * K;
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  solver.analyzePattern(J);
  int it = 0;
  bool polished = false;
  while (res > kNewtonTol || !polished) {
    polished = res <= kNewtonTol;
    if (it == kNewtonMaxIter)
      throw NumericalError("resolvent Newton iteration did not converge (residual " +
                           std::to_string(res) + ")");
    ++it;
    J = -tau * K;
    const Field r = pinv(z);
    for (int x = 0; x < n; ++x) J.coeffRef(x, x) += m[x] / model.dP(r[x]);
    solver.factorize(J);
    if (solver.info() != Eigen::Success) throw NumericalError("resolvent Jacobian is singular");
    const Field delta = solver.solve(-(F.cwiseProduct(m)));
    double lambda = 1.0;
    Field z_new = z + delta;
    Field F_new = residual(z_new);
    double res_new = residual_norm(F_new, scale);
    while (res_new > res && lambda > 1e-10) {
      lambda *= 0.5;
      z_new = z + lambda * delta;
      F_new = residual(z_new);
      res_new = residual_norm(F_new, scale);
    }
    if (res_new >= res && (polished || res <= 1e3 * kNewtonTol)) break;  // stagnated at round-off level
    z = std::move(z_new);
    F = std::move(F_new);
    res = res_new;
  }
  Field out = pinv(z);
  for (int x = 0; x < n; ++x) out[x] = std::max(out[x], 0.0);
  if (diag) *diag = StepDiagnostics{it, res};
  return DensityField(space, std::move(out));
}

DiffusionTrajectory evolve(const FiniteSpace& space, const EntropyModel& model,
                           const DensityField& rho0, double t, int n) {
  if (n < 1) throw std::invalid_argument("evolve: n must be >= 1");
  if (!(t > 0)) throw std::invalid_argument("evolve: t must be > 0");
  DiffusionTrajectory traj{space, model, {}, {}, {}};
  const double tau = t / n;
  traj.times.reserve(n + 1);
  traj.states.reserve(n + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(rho0.values());
  DensityField cur = rho0;
  for (int k = 1; k <= n; ++k) {
    StepDiagnostics d;
    cur = resolvent_step(space, model, cur, tau, &d);
    traj.times.push_back(k == n ? t : k * tau);
    traj.states.push_back(cur.values());
    traj.steps.push_back(d);
  }
  return traj;
}

CheckReport l1_contraction_check(const FiniteSpace& space, const EntropyModel& model,
                                 const DensityField& rho1, const DensityField& rho2, double t,
                                 int n) {
  const auto a = evolve(space, model, rho1, t, n);
  const auto b = evolve(space, model, rho2, t, n);
  const Eigen::VectorXd& m = space.measure();
  const double tol = 1e-12 * std::max({1.0, rho1.mass(), rho2.mass()});

  CheckReport rep;
  rep.name = "l1_contraction";
  rep.tolerance = tol;
  rep.margin = kInf;
  double prev = 0.0;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    const double d = (b.states[k] - a.states[k]).cwiseMax(0.0).dot(m);
    rep.residuals.push_back(d);
    if (k > 0 && prev - d < rep.margin) {
      rep.margin = prev - d;
      rep.witness = {a.times[k]};
    }
    prev = d;
  }
  if (!std::isfinite(rep.margin)) rep.margin = 0.0;
  bool ok = rep.margin >= -tol;

  const bool ordered = ((rho2.values() - rho1.values()).array() >= 0).all();
  double order_violation = 0.0;
  if (ordered) {
    for (std::size_t k = 0; k < a.states.size(); ++k)
      order_violation = std::max(order_violation, (a.states[k] - b.states[k]).maxCoeff());
    ok = ok && order_violation <= tol;
  }
  rep.diagnostics["ordered_input"] = ordered ? 1.0 : 0.0;
  rep.diagnostics["order_violation"] = order_violation;

  const WeightedOperator unit(space, Field::Ones(space.n()));
  const Field u0 = a.states[0] - b.states[0];
  if (unit.compatible(u0)) {
    const double aa = model.regularity();
    const double tau = t / n;
    double budget = unit.dual_energy(u0);
    const double dual_tol = 1e-10 * std::max(1.0, budget);
    double integral = 0.0;
    double worst = kInf;
    for (std::size_t k = 1; k < a.states.size(); ++k) {
      const Field u = a.states[k] - b.states[k];
      integral += tau * u.cwiseProduct(u).dot(m);
      const double lhs = unit.dual_energy(unit.project_compatible(u)) + 2 * aa * integral;
      worst = std::min(worst, budget - lhs);
    }
    if (!std::isfinite(worst)) worst = 0.0;
    rep.diagnostics["dual_norm_margin"] = worst;
    ok = ok && worst >= -dual_tol;
  }
  rep.holds = ok;
  return rep;
}

CheckReport entropy_dissipation_report(const DiffusionTrajectory& traj, const ConvexFunction& W) {
  if (!W.W || !W.dW) throw std::invalid_argument("dissipation report needs W and W'");
  const FiniteSpace& space = traj.space;
  const int n = space.n();
  auto integral_W = [&](const Field& r) {
    double s = 0.0;
    for (int x = 0; x < n; ++x) s += W.W(r[x]) * space.measure()[x];
    return s;
  };
  const double w0 = integral_W(traj.states[0]);
  CheckReport rep;
  rep.name = "entropy_dissipation";
  rep.tolerance = 1e-12 * std::max(1.0, std::abs(w0));
  rep.margin = kInf;
  double dissipated = 0.0;
  double prev = w0;
  double worst_identity = 0.0;
  rep.residuals.push_back(0.0);
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const Field& r = traj.states[k];
    Field p(n), dw(n);
    for (int x = 0; x < n; ++x) {
      p[x] = traj.model.P(r[x]);
      dw[x] = W.dW(r[x]);
    }
    dissipated += (traj.times[k] - traj.times[k - 1]) * dirichlet_energy(space, p, dw);
    const double wk = integral_W(r);
    const double res = wk + dissipated - w0;
    rep.residuals.push_back(res);
    worst_identity = std::max(worst_identity, std::abs(res));
    if (prev - wk < rep.margin) {
      rep.margin = prev - wk;
      rep.witness = {traj.times[k]};
    }
    prev = wk;
  }
  if (!std::isfinite(rep.margin)) rep.margin = 0.0;
  rep.diagnostics["identity_residual"] = worst_identity;
  rep.diagnostics["tau"] = traj.tau();
  rep.holds = rep.margin >= -rep.tolerance;
  return rep;
}

double fisher_information(const FiniteSpace& space, const DensityField& rho) {
  const Field s = rho.values().cwiseSqrt();
  return 4.0 * dirichlet_energy(space, s);
}

}  // namespace curvlab
