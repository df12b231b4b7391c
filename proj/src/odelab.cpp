#include "curvlab/odelab.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace curvlab {

namespace {

constexpr double kBlowUp = 1e12;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

void check_dim(const FlowSystem& sys, const Vec& v, const char* what) {
  if (v.size() != sys.dim)
    throw std::invalid_argument(std::string(what) + ": dimension does not match the system");
}

Mat metric_inverse(const FlowSystem& sys, const Vec& x) {
  Eigen::LLT<Mat> llt(sys.metric(x));
  if (llt.info() != Eigen::Success) throw std::domain_error("metric is not positive definite");
  return llt.solve(Mat::Identity(sys.dim, sys.dim));
}

Mat metric_derivative(const FlowSystem& sys, const Vec& x, int k) {
  if (sys.metric_derivative) return sys.metric_derivative(x, k);
  const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
  Vec xp = x, xm = x;
  xp[k] += h;
  xm[k] -= h;
  return (sys.metric(xp) - sys.metric(xm)) / (2 * h);
}

double hamiltonian(const FlowSystem& sys, const Vec& x, const Vec& phi) {
  return 0.5 * phi.dot(metric_inverse(sys, x) * phi);
}

FlowSystem flat(std::string name, int d) {
  FlowSystem s;
  s.name = std::move(name);
  s.dim = d;
  s.metric = [d](const Vec&) { return Mat::Identity(d, d); };
  s.metric_derivative = [d](const Vec&, int) { return Mat::Zero(d, d); };
  return s;
}

struct CollocationData {
  const FlowSystem* sys;
  const Vec* x0;
  const Vec* x1;
};

Vec to_eigen(const gsl_vector* v) {
  Vec out(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) out[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  return out;
}

double gsl_f(const gsl_vector* v, void* params) {
  const auto* p = static_cast<CollocationData*>(params);
  return collocation_objective(*p->sys, *p->x0, *p->x1, to_eigen(v));
}

void gsl_df(const gsl_vector* v, void* params, gsl_vector* g) {
  const auto* p = static_cast<CollocationData*>(params);
  Vec grad;
  collocation_objective(*p->sys, *p->x0, *p->x1, to_eigen(v), &grad);
  for (std::size_t i = 0; i < g->size; ++i) gsl_vector_set(g, i, grad[static_cast<Eigen::Index>(i)]);
}

void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  const auto* p = static_cast<CollocationData*>(params);
  Vec grad;
  *f = collocation_objective(*p->sys, *p->x0, *p->x1, to_eigen(v), &grad);
  for (std::size_t i = 0; i < g->size; ++i) gsl_vector_set(g, i, grad[static_cast<Eigen::Index>(i)]);
}

}  // namespace

void validate_system(const FlowSystem& sys, const std::vector<Vec>& samples) {
  if (sys.dim < 1 || !sys.field || !sys.jacobian || !sys.metric)
    throw std::invalid_argument("flow system is incomplete");
  for (const auto& x : samples) {
    check_dim(sys, x, "validate_system");
    const Mat G = sys.metric(x);
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff()))
      throw std::domain_error("metric is not symmetric");
    const Mat H = metric_inverse(sys, x);
    if (sys.potential_mode()) {
      const double r = (sys.field(x) + H * sys.gradient(x)).norm();
      if (r > 1e-10) throw std::domain_error("field is not the metric gradient of the potential");
    }
  }
}

FlowSystem linear_system(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() < 1) throw std::invalid_argument("linear system needs a square matrix");
  FlowSystem s = flat("linear", static_cast<int>(A.rows()));
  s.field = [A](const Vec& x) { return Vec(A * x); };
  s.jacobian = [A](const Vec&) { return A; };
  if ((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0) {
    s.potential = [A](const Vec& x) { return -0.5 * x.dot(A * x); };
    s.gradient = [A](const Vec& x) { return Vec(-(A * x)); };
  }
  return s;
}

FlowSystem quadratic_potential_system(const Mat& S) {
  if (S.rows() != S.cols() || S.rows() < 1) throw std::invalid_argument("potential needs a square matrix");
  const Mat Ss = 0.5 * (S + S.transpose());
  FlowSystem s = flat("quadratic-potential", static_cast<int>(S.rows()));
  s.field = [Ss](const Vec& x) { return Vec(-(Ss * x)); };
  s.jacobian = [Ss](const Vec&) { return Mat(-Ss); };
  s.potential = [Ss](const Vec& x) { return 0.5 * x.dot(Ss * x); };
  s.gradient = [Ss](const Vec& x) { return Vec(Ss * x); };
  return s;
}

FlowSystem ou_system(double theta, const Vec& mean) {
  const int d = static_cast<int>(mean.size());
  if (d < 1) throw std::invalid_argument("ou system needs a mean vector");
  FlowSystem s = flat("ou", d);
  s.field = [theta, mean](const Vec& x) { return Vec(-theta * (x - mean)); };
  s.jacobian = [theta, d](const Vec&) { return Mat(-theta * Mat::Identity(d, d)); };
  s.potential = [theta, mean](const Vec& x) { return 0.5 * theta * (x - mean).squaredNorm(); };
  s.gradient = [theta, mean](const Vec& x) { return Vec(theta * (x - mean)); };
  return s;
}

FlowSystem nonlinear_mobility_system() {
  FlowSystem s;
  s.name = "nonlinear-mobility";
  s.dim = 1;
  s.field = [](const Vec& x) { return Vec(-x); };
  s.jacobian = [](const Vec&) { return Mat::Constant(1, 1, -1.0); };
  s.metric = [](const Vec& x) { return Mat::Constant(1, 1, 1.0 / (1.0 + x[0] * x[0])); };
  s.metric_derivative = [](const Vec& x, int) {
    const double h = 1.0 + x[0] * x[0];
    return Mat::Constant(1, 1, -2.0 * x[0] / (h * h));
  };
  return s;
}

std::vector<std::string> system_names() {
  return {"linear", "quadratic-potential", "ou", "nonlinear-mobility"};
}

FlowSystem system_by_name(const std::string& name, int dim) {
  if (dim < 1) throw std::invalid_argument("system dimension must be >= 1");
  if (name == "linear") return linear_system(-Mat::Identity(dim, dim));
  if (name == "quadratic-potential") {
    Mat S = Mat::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) S(i, i) = i + 1.0;
    return quadratic_potential_system(S);
  }
  if (name == "ou") return ou_system(1.0, Vec::Ones(dim));
  if (name == "nonlinear-mobility") return nonlinear_mobility_system();
  throw std::invalid_argument("unknown flow system '" + name + "'");
}

OdeTrajectory integrate_system(const FlowSystem& sys, const Vec& x0, const Vec& w0, const Vec& phiT,
                               double T, int n) {
  check_dim(sys, x0, "integrate_system");
  check_dim(sys, w0, "integrate_system");
  check_dim(sys, phiT, "integrate_system");
  if (n < 1) throw std::invalid_argument("integrate_system: n must be >= 1");
  if (!(T >= 0) || !std::isfinite(T)) throw std::invalid_argument("integrate_system: T must be >= 0");
  const int d = sys.dim;
  const double h = T / n;
  const Mat I = Mat::Identity(d, d);
  OdeTrajectory out;
  out.times.resize(static_cast<std::size_t>(n + 1));
  out.x.resize(out.times.size());
  out.w.resize(out.times.size());
  out.phi.resize(out.times.size());
  std::vector<Mat> step(static_cast<std::size_t>(n));
  out.x[0] = x0;
  out.w[0] = w0;
  for (int k = 0; k < n; ++k) {
    const Vec& x = out.x[k];
    const Vec k1 = sys.field(x);
    const Vec x2 = x + 0.5 * h * k1;
    const Vec k2 = sys.field(x2);
    const Vec x3 = x + 0.5 * h * k2;
    const Vec k3 = sys.field(x3);
    const Vec x4 = x + h * k3;
    const Vec k4 = sys.field(x4);
    out.x[k + 1] = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    const Mat K1 = sys.jacobian(x);
    const Mat K2 = sys.jacobian(x2) * (I + 0.5 * h * K1);
    const Mat K3 = sys.jacobian(x3) * (I + 0.5 * h * K2);
    const Mat K4 = sys.jacobian(x4) * (I + h * K3);
    step[k] = I + (h / 6) * (K1 + 2 * K2 + 2 * K3 + K4);
    out.w[k + 1] = step[k] * out.w[k];
    out.times[k + 1] = k + 1 == n ? T : h * (k + 1);
    if (!(out.x[k + 1].norm() <= kBlowUp) || !(out.w[k + 1].norm() <= kBlowUp))
      throw NumericalError("integrate_system: blow-up detected");
  }
  out.phi[n] = phiT;
  for (int k = n; k-- > 0;) {
    out.phi[k] = step[k].transpose() * out.phi[k + 1];
    if (!(out.phi[k].norm() <= kBlowUp)) throw NumericalError("integrate_system: blow-up detected");
  }
  out.pairing.resize(out.times.size());
  for (std::size_t k = 0; k < out.times.size(); ++k) out.pairing[k] = out.w[k].dot(out.phi[k]);
  return out;
}

Vec flow_map(const FlowSystem& sys, const Vec& x0, double T, int n) {
  check_dim(sys, x0, "flow_map");
  if (n < 1) throw std::invalid_argument("flow_map: n must be >= 1");
  const double h = T / n;
  Vec x = x0;
  for (int k = 0; k < n; ++k) {
    const Vec k1 = sys.field(x);
    const Vec k2 = sys.field(x + 0.5 * h * k1);
    const Vec k3 = sys.field(x + 0.5 * h * k2);
    const Vec k4 = sys.field(x + h * k3);
    x += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!(x.norm() <= kBlowUp)) throw NumericalError("flow_map: blow-up detected");
  }
  return x;
}

HamiltonianDerivatives hamiltonian_derivatives(const FlowSystem& sys, const Vec& x, const Vec& phi) {
  check_dim(sys, x, "hamiltonian");
  check_dim(sys, phi, "hamiltonian");
  const Vec hp = metric_inverse(sys, x) * phi;
  HamiltonianDerivatives out;
  out.dphi = hp;
  out.dx.resize(sys.dim);
  // ∂ₖH = −H ∂ₖG H.
  for (int k = 0; k < sys.dim; ++k) out.dx[k] = -0.5 * hp.dot(metric_derivative(sys, x, k) * hp);
  return out;
}

CheckReport hamiltonian_monotonicity_check(const FlowSystem& sys,
                                           const std::vector<std::pair<Vec, Vec>>& samples,
                                           double tol) {
  CheckReport rep;
  rep.name = "hamiltonian_monotonicity";
  rep.tolerance = tol;
  double worst = kInfinity, mismatch = 0.0;
  for (const auto& [x, phi] : samples) {
    const auto dh = hamiltonian_derivatives(sys, x, phi);
    const double value = dh.dx.dot(sys.field(x)) - dh.dphi.dot(sys.jacobian(x).transpose() * phi);
    rep.residuals.push_back(value);
    for (int k = 0; k < sys.dim; ++k) {
      const double step = 1e-5 * std::max(1.0, std::abs(x[k]));
      Vec xp = x, xm = x;
      xp[k] += step;
      xm[k] -= step;
      const double fd = (hamiltonian(sys, xp, phi) - hamiltonian(sys, xm, phi)) / (2 * step);
      mismatch = std::max(mismatch, std::abs(fd - dh.dx[k]) / std::max(1.0, std::abs(dh.dx[k])));
    }
    const double scale = std::max(1.0, hamiltonian(sys, x, phi));
    if (value / scale < worst) {
      worst = value / scale;
      rep.witness.assign(x.data(), x.data() + x.size());
      rep.witness.insert(rep.witness.end(), phi.data(), phi.data() + phi.size());
    }
  }
  rep.margin = samples.empty() ? 0.0 : worst;
  rep.holds = rep.margin >= -tol;
  rep.diagnostics["fd_mismatch"] = mismatch;
  rep.diagnostics["samples"] = static_cast<double>(samples.size());
  return rep;
}

double collocation_objective(const FlowSystem& sys, const Vec& x0, const Vec& x1,
                             const Vec& interior, Vec* grad) {
  const int d = sys.dim;
  if (interior.size() % d != 0) throw std::invalid_argument("collocation: bad interior size");
  const int M = static_cast<int>(interior.size() / d) + 1;
  auto node = [&](int i) -> Vec {
    if (i == 0) return x0;
    if (i == M) return x1;
    return interior.segment((i - 1) * d, d);
  };
  if (grad) *grad = Vec::Zero(interior.size());
  double total = 0.0;
  Vec a = node(0);
  for (int i = 0; i < M; ++i) {
    const Vec b = node(i + 1);
    const Vec delta = b - a;
    const Vec mid = 0.5 * (a + b);
    const Mat G = sys.metric(mid);
    const Vec gd = G * delta;
    total += 0.5 * M * delta.dot(gd);
    if (grad) {
      Vec dmid(d);
      for (int k = 0; k < d; ++k) dmid[k] = 0.25 * M * delta.dot(metric_derivative(sys, mid, k) * delta);
      if (i > 0) grad->segment((i - 1) * d, d) += -M * gd + dmid;
      if (i + 1 < M) grad->segment(i * d, d) += M * gd + dmid;
    }
    a = b;
  }
  return total;
}

CostResult collocation_cost(const FlowSystem& sys, const Vec& x0, const Vec& x1, int M) {
  check_dim(sys, x0, "collocation_cost");
  check_dim(sys, x1, "collocation_cost");
  if (M < 2) throw std::invalid_argument("collocation: M must be >= 2");
  static const bool handler_off = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)handler_off;
  const int d = sys.dim;
  const int size = (M - 1) * d;
  CollocationData data{&sys, &x0, &x1};
  gsl_multimin_function_fdf fn;
  fn.n = static_cast<std::size_t>(size);
  fn.f = gsl_f;
  fn.df = gsl_df;
  fn.fdf = gsl_fdf;
  fn.params = &data;

  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> start(gsl_vector_alloc(fn.n), gsl_vector_free);
  for (int i = 1; i < M; ++i) {
    const Vec y = x0 + (x1 - x0) * (static_cast<double>(i) / M);
    for (int k = 0; k < d; ++k) gsl_vector_set(start.get(), static_cast<std::size_t>((i - 1) * d + k), y[k]);
  }
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> mini(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, fn.n),
      gsl_multimin_fdfminimizer_free);
  const double step = std::max(1e-3, (x1 - x0).norm() / M);
  gsl_multimin_fdfminimizer_set(mini.get(), &fn, start.get(), step, 0.1);

  CostResult out;
  const double gtol = 1e-10;
  for (int it = 0; it < 10000; ++it) {
    if (gsl_multimin_test_gradient(mini->gradient, gtol) == GSL_SUCCESS) break;
    ++out.iterations;
    const int status = gsl_multimin_fdfminimizer_iterate(mini.get());
    if (status != GSL_SUCCESS) break;
  }
  const Vec best = to_eigen(gsl_multimin_fdfminimizer_x(mini.get()));
  Vec grad;
  out.cost = collocation_objective(sys, x0, x1, best, &grad);
  out.gradient_norm = grad.norm();
  if (!(out.gradient_norm <= 1e-6 * std::max(1.0, out.cost)))
    throw NumericalError("collocation did not converge (gradient norm " +
                         std::to_string(out.gradient_norm) + ")");
  out.path.push_back(x0);
  for (int i = 1; i < M; ++i) out.path.push_back(best.segment((i - 1) * d, d));
  out.path.push_back(x1);
  return out;
}

CheckReport cost_contraction_check(const FlowSystem& sys, const Vec& x0, const Vec& x1, double T,
                                   int n, double tol, int M) {
  const Vec y0 = flow_map(sys, x0, T, n), y1 = flow_map(sys, x1, T, n);
  const double c0 = collocation_cost(sys, x0, x1, M).cost;
  const double cT = collocation_cost(sys, y0, y1, M).cost;
  CheckReport rep;
  rep.name = "cost_contraction";
  rep.tolerance = tol * c0;
  rep.margin = c0 - cT;
  rep.holds = rep.margin >= -rep.tolerance;
  rep.residuals = {c0, cT};
  rep.diagnostics["cost_initial"] = c0;
  rep.diagnostics["cost_final"] = cT;
  rep.diagnostics["ratio"] = c0 > 0 ? cT / c0 : (cT > 0 ? kInfinity : 1.0);
  return rep;
}

CheckReport convexity_contraction_check(const FlowSystem& sys, const Vec& x0, const Vec& x1,
                                        double t, int n, double tol, int M) {
  if (!sys.potential_mode()) throw std::invalid_argument("convexity check needs a potential system");
  if (!(t >= 0)) throw std::invalid_argument("convexity check: t must be >= 0");
  const Vec y1 = t > 0 ? flow_map(sys, x1, t, n) : x1;
  const double c01 = collocation_cost(sys, x0, x1, M).cost;
  const double cy = collocation_cost(sys, x0, y1, M).cost;
  const double du = sys.potential(y1) - sys.potential(x0);
  CheckReport rep;
  rep.name = "convexity_contraction";
  rep.tolerance = tol * std::max(1.0, c01);
  rep.margin = c01 - cy - t * du;
  rep.holds = rep.margin >= -rep.tolerance;
  rep.diagnostics["cost_initial"] = c01;
  rep.diagnostics["cost_flowed"] = cy;
  rep.diagnostics["potential_change"] = du;
  rep.diagnostics["t"] = t;
  return rep;
}

}  // namespace curvlab
