#include "curvlab/gamma2.hpp"

#include "curvlab/linearized.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace curvlab {

namespace {

void check_size(const FiniteSpace& space, const Field& f) {
  if (f.size() != space.n()) throw std::invalid_argument("field size does not match the space");
}

Field apply_pressure(const EntropyModel& model, const Field& r) {
  Field out(r.size());
  for (Eigen::Index x = 0; x < r.size(); ++x) out[x] = model.P(r[x]);
  return out;
}

/// Points within graph distance 2 of z, excluding z.
std::vector<int> local_indices(const FiniteSpace& space, int z) {
  std::vector<char> mark(space.n(), 0);
  mark[z] = 1;
  std::vector<int> out;
  for (const auto& a : space.neighbors(z)) {
    if (!mark[a.y]) {
      mark[a.y] = 1;
      out.push_back(a.y);
    }
  }
  const std::size_t first = out.size();
  for (std::size_t i = 0; i < first; ++i)
    for (const auto& b : space.neighbors(out[i]))
      if (!mark[b.y]) {
        mark[b.y] = 1;
        out.push_back(b.y);
      }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double gamma2_form(const FiniteSpace& space, const Field& f, const Field& g, const Field& phi) {
  check_size(space, f);
  check_size(space, g);
  check_size(space, phi);
  const Field lf = laplacian(space, f);
  const Field lg = laplacian(space, g);
  const Field integrand = gamma(space, f, g).cwiseProduct(laplacian(space, phi)) -
                          gamma(space, f, lg).cwiseProduct(phi) -
                          gamma(space, g, lf).cwiseProduct(phi);
  return 0.5 * integrand.dot(space.measure());
}

double gamma2_form(const FiniteSpace& space, const Field& f, const Field& phi) {
  return gamma2_form(space, f, f, phi);
}

double gamma2_form_alt(const FiniteSpace& space, const Field& f, const Field& phi) {
  check_size(space, f);
  check_size(space, phi);
  const Field lf = laplacian(space, f);
  const Field integrand = 0.5 * gamma(space, f).cwiseProduct(laplacian(space, phi)) +
                          lf.cwiseProduct(gamma(space, f, phi)) +
                          phi.cwiseProduct(lf).cwiseProduct(lf);
  return integrand.dot(space.measure());
}

Field gamma2_density(const FiniteSpace& space, const Field& f) {
  check_size(space, f);
  return 0.5 * laplacian(space, gamma(space, f)) - gamma(space, f, laplacian(space, f));
}

Gamma2Report gamma2_report(const FiniteSpace& space, const Field& f, const Field& phi) {
  Gamma2Report rep;
  rep.value = gamma2_form(space, f, phi);
  rep.alternative = gamma2_form_alt(space, f, phi);
  rep.pointwise = gamma2_density(space, f);
  return rep;
}

Eigen::MatrixXd gamma_matrix(const FiniteSpace& space, int x) {
  const int n = space.n();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  const double s = 1.0 / (2.0 * space.measure()[x]);
  for (const auto& nb : space.neighbors(x)) {
    const double c = s * nb.w;
    C(x, x) += c;
    C(nb.y, nb.y) += c;
    C(x, nb.y) -= c;
    C(nb.y, x) -= c;
  }
  return C;
}

Eigen::MatrixXd gamma2_matrix(const FiniteSpace& space, int z) {
  const Eigen::MatrixXd L = laplacian_matrix(space);
  Eigen::MatrixXd G = 0.5 * L(z, z) * gamma_matrix(space, z);
  for (const auto& nb : space.neighbors(z)) G += 0.5 * L(z, nb.y) * gamma_matrix(space, nb.y);
  const Eigen::MatrixXd CL = gamma_matrix(space, z) * L;
  G -= 0.5 * (CL + CL.transpose());
  return G;
}

Gamma2Report be_check(const FiniteSpace& space, double K, double N) {
  if (!(N > 0)) throw std::invalid_argument("be_check: N must be positive");
  const int n = space.n();
  const Eigen::MatrixXd L = laplacian_matrix(space);
  Gamma2Report rep;
  rep.K = K;
  rep.N = N;
  rep.margin = kInf;
  rep.point_margins.assign(n, kInf);
  double scale = 0.0;
  for (int z = 0; z < n; ++z) {
    const auto idx = local_indices(space, z);
    if (idx.empty()) continue;
    const Eigen::MatrixXd G = gamma2_matrix(space, z);
    Eigen::MatrixXd T = G - K * gamma_matrix(space, z);
    if (std::isfinite(N)) T -= (1.0 / N) * L.row(z).transpose() * L.row(z);
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd S(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) S(i, j) = T(idx[i], idx[j]);
    scale = std::max(scale, G.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const double lam = es.eigenvalues()[0];
    rep.point_margins[z] = lam;
    if (lam < rep.margin) {
      rep.margin = lam;
      rep.worst_point = z;
      rep.witness = Field::Zero(n);
      for (int i = 0; i < k; ++i) rep.witness[idx[i]] = es.eigenvectors()(i, 0);
    }
  }
  if (!std::isfinite(rep.margin)) {
    rep.margin = 0.0;
    rep.witness = Field::Zero(n);
  }
  rep.holds = rep.margin >= -1e-12 * std::max(1.0, scale);
  return rep;
}

double optimal_curvature(const FiniteSpace& space, double N) {
  auto pass = [&](double K) { return be_check(space, K, N).holds; };
  double lo, hi;
  if (pass(0.0)) {
    lo = 0.0;
    hi = 1.0;
    while (pass(hi)) {
      lo = hi;
      hi *= 2;
      if (hi > 1e12) return kInf;
    }
  } else {
    hi = 0.0;
    lo = -1.0;
    while (!pass(lo)) {
      hi = lo;
      lo *= 2;
      if (lo < -1e12) return -kInf;
    }
  }
  while (hi - lo > 1e-10 * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    (pass(mid) ? lo : hi) = mid;
  }
  return lo;
}

double optimal_dimension(const FiniteSpace& space, double K) {
  // Bisection on x = 1/N; larger x is a stronger requirement.
  auto pass = [&](double x) { return be_check(space, K, x > 0 ? 1.0 / x : kInf).holds; };
  if (!pass(0.0)) return std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0, hi = 1.0;
  while (pass(hi)) {
    lo = hi;
    hi *= 2;
    if (hi > 1e12) return 0.0;
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (pass(mid) ? lo : hi) = mid;
  }
  return lo < 1e-12 ? kInf : 1.0 / lo;
}

CheckReport nonlinear_be_check(const FiniteSpace& space, const EntropyModel& model, double K,
                               double N, const Field& f, const Field& phi, double tol) {
  check_size(space, f);
  check_size(space, phi);
  if ((phi.array() < 0).any()) throw std::invalid_argument("nonlinear_be_check: phi must be >= 0");
  const Eigen::VectorXd& m = space.measure();
  const Field p = apply_pressure(model, phi);
  const Field lf = laplacian(space, f);
  Field r(phi.size());
  for (Eigen::Index x = 0; x < phi.size(); ++x) r[x] = model.R(phi[x]);
  const double g2 = gamma2_form(space, f, p);
  const double rterm = r.cwiseProduct(lf).cwiseProduct(lf).dot(m);
  const double kterm = K * gamma(space, f).cwiseProduct(p).dot(m);

  CheckReport rep;
  rep.name = "nonlinear_be";
  rep.tolerance = tol;
  rep.margin = g2 + rterm - kterm;
  rep.residuals = {g2, rterm, kterm};
  rep.diagnostics["gamma2"] = g2;
  rep.diagnostics["r_term"] = rterm;
  rep.diagnostics["k_term"] = kterm;
  if (std::isfinite(N))
    rep.diagnostics["dimensional_r_term"] = -(1.0 / N) * p.cwiseProduct(lf).cwiseProduct(lf).dot(m);
  rep.holds = rep.margin >= -tol;
  return rep;
}

CheckReport hamiltonian_residual(const FiniteSpace& space, const EntropyModel& model,
                                 const Field& rho, const Field& phi, double tol) {
  check_size(space, rho);
  check_size(space, phi);
  const Eigen::VectorXd& m = space.measure();
  const Field p = apply_pressure(model, rho);
  const Field lphi = laplacian(space, phi);
  const Field gphi = gamma(space, phi);
  Field dp(rho.size()), r(rho.size());
  for (Eigen::Index x = 0; x < rho.size(); ++x) {
    dp[x] = model.dP(rho[x]);
    r[x] = model.R(rho[x]);
  }
  const double lhs = 0.5 * laplacian(space, p).cwiseProduct(gphi).dot(m) +
                     rho.cwiseProduct(gamma(space, phi, -dp.cwiseProduct(lphi))).dot(m);
  const double rhs = gamma2_form(space, phi, p) + r.cwiseProduct(lphi).cwiseProduct(lphi).dot(m);

  CheckReport rep;
  rep.name = "hamiltonian_identity";
  rep.tolerance = tol;
  rep.margin = -std::abs(lhs - rhs);
  rep.residuals = {lhs - rhs};
  rep.diagnostics["lhs"] = lhs;
  rep.diagnostics["rhs"] = rhs;
  rep.holds = std::abs(lhs - rhs) <= tol;
  return rep;
}

CheckReport dual_action_decay_check(const DiffusionTrajectory& diff, const Field& w0,
                                    double Lambda, double tol) {
  const FiniteSpace& space = diff.space;
  check_size(space, w0);
  const WeightedOperator op0(space, diff.states[0]);
  if (!op0.compatible(w0))
    throw std::domain_error("initial datum is not in finiteness domain of the dual energy");
  const auto fwd = forward_linearized_solve(diff, w0);
  const std::size_t K = fwd.fields.size();
  std::vector<double> e(K);
  for (std::size_t k = 0; k < K; ++k) {
    const WeightedOperator op(space, diff.states[k]);
    e[k] = op.dual_energy(op.project_compatible(fwd.fields[k]));
  }

  CheckReport rep;
  rep.name = "dual_action_decay";
  rep.tolerance = tol >= 0 ? tol : resolution_tolerance(space, diff.tau());
  rep.residuals = e;
  const double scale = e[0] > 0 ? e[0] : 1.0;
  double worst = 0.0;
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i + 1; j < K; ++j) {
      const double decayed = std::exp(2 * Lambda * (diff.times[j] - diff.times[i])) * e[j];
      const double slack = (e[i] - decayed) / scale;
      if (slack < worst) {
        worst = slack;
        rep.witness = {diff.times[i], diff.times[j]};
      }
      if (e[i] > 0) worst_ratio = std::max(worst_ratio, decayed / e[i]);
    }
  }
  rep.margin = worst;
  rep.diagnostics["worst_ratio"] = worst_ratio;
  rep.diagnostics["tau"] = diff.tau();
  rep.diagnostics["lambda"] = Lambda;

  // Bound on the dual energy of the time derivative by the Fisher-type quantity.
  const double a = diff.model.regularity();
  if (a > 0 && K > 1) {
    double value = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k) {
      const double tau = diff.times[k + 1] - diff.times[k];
      const Field w = (diff.states[k + 1] - diff.states[k]) / tau;
      const WeightedOperator op(space, diff.states[k + 1]);
      value = std::max(value, op.dual_energy(op.project_compatible(w)));
    }
    const double lminus = std::max(-Lambda, 0.0);
    const double bound = 4.0 / (a * a) * std::exp(2 * lminus * diff.times.back()) *
                         dirichlet_energy(space, diff.states[0].cwiseSqrt());
    rep.diagnostics["derivative_dual_energy"] = value;
    rep.diagnostics["derivative_bound"] = bound;
  }
  rep.holds = rep.margin >= -rep.tolerance;
  return rep;
}

}  // namespace curvlab
