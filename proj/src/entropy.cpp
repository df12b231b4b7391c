#include "curvlab/entropy.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace curvlab {

namespace {

constexpr double kQuadTol = 1e-12;

double quad(const std::function<double(double)>& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, kQuadTol);
}

/// Integral over [a,b] split at the given interior points.
double quad_split(const std::function<double(double)>& f, double a, double b,
                  std::vector<double> cuts) {
  const double sign = a <= b ? 1.0 : -1.0;
  const double lo = std::min(a, b), hi = std::max(a, b);
  std::vector<double> pts{lo};
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts)
    if (std::isfinite(c) && c > lo && c < hi) pts.push_back(c);
  pts.push_back(hi);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += quad(f, pts[i], pts[i + 1]);
  return sign * s;
}

std::vector<double> log_samples(double lo, double hi, int n) {
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * i / (n - 1));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const char* to_string(EntropyFamily f) {
  switch (f) {
    case EntropyFamily::linear: return "linear";
    case EntropyFamily::power: return "power";
    case EntropyFamily::regularized: return "regularized";
    case EntropyFamily::custom: return "custom";
  }
  return "unknown";
}

namespace detail {

/// Pressure restricted to r ≥ 0; the model adds the odd extension.
struct Pressure {
  virtual ~Pressure() = default;
  virtual EntropyFamily family() const = 0;
  virtual double N() const { return kInf; }
  virtual double eps() const { return 0.0; }
  virtual double M() const { return kInf; }
  virtual double P(double r) const = 0;
  virtual double dP(double r) const = 0;
  virtual double P_inverse(double z) const {
    if (z <= 0) return 0.0;
    double hi = 1.0;
    while (P(hi) < z) {
      hi *= 2;
      if (hi > 1e300) throw NumericalError("pressure inverse: value out of range");
    }
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(b)); };
    auto r = boost::math::tools::toms748_solve([&](double x) { return P(x) - z; }, 0.0, hi,
                                               -z, P(hi) - z, tol, iters);
    return 0.5 * (r.first + r.second);
  }
  /// Points where P′ may be nonsmooth; used to split quadratures.
  virtual std::vector<double> kinks() const { return {}; }
  virtual double U(double r) const {
    if (r == 0) return 0.0;
    const auto f = [this](double u) {
      const double s = std::exp(u);
      return P(s) / s;
    };
    std::vector<double> cuts;
    for (double k : kinks())
      if (k > 0) cuts.push_back(std::log(k));
    return r * quad_split(f, 0.0, std::log(r), cuts);
  }
  virtual double Z(double r) const {
    if (r == 0) return 0.0;
    std::vector<double> cuts;
    for (double k : kinks())
      if (k > 0) cuts.push_back(std::sqrt(k));
    return quad_split([this](double v) { return 2.0 * dP(v * v); }, 0.0, std::sqrt(r), cuts);
  }
  virtual double regularity() const = 0;
  virtual double q_inf() const {
    double q = kInf;
    for (double r : log_samples(1e-9, 1e9, 2001)) q = std::min(q, P(r) / r);
    return q;
  }
  virtual double q_sup() const {
    double q = 0.0;
    for (double r : log_samples(1e-9, 1e9, 2001)) q = std::max(q, P(r) / r);
    return q;
  }
  virtual std::string describe() const = 0;
};

struct LinearPressure final : Pressure {
  EntropyFamily family() const override { return EntropyFamily::linear; }
  double P(double r) const override { return r; }
  double dP(double) const override { return 1.0; }
  double P_inverse(double z) const override { return std::max(z, 0.0); }
  double U(double r) const override { return r == 0 ? 0.0 : r * std::log(r); }
  double Z(double r) const override { return 2.0 * std::sqrt(r); }
  double regularity() const override { return 1.0; }
  double q_inf() const override { return 1.0; }
  double q_sup() const override { return 1.0; }
  std::string describe() const override { return "linear"; }
};

struct PowerPressure final : Pressure {
  explicit PowerPressure(double n) : n_(n) {}
  EntropyFamily family() const override { return EntropyFamily::power; }
  double N() const override { return n_; }
  double P(double r) const override { return std::pow(r, 1.0 - 1.0 / n_); }
  double dP(double r) const override {
    return r == 0 ? kInf : (1.0 - 1.0 / n_) * std::pow(r, -1.0 / n_);
  }
  double P_inverse(double z) const override {
    return z <= 0 ? 0.0 : std::pow(z, n_ / (n_ - 1.0));
  }
  double U(double r) const override { return n_ * (r - std::pow(r, 1.0 - 1.0 / n_)); }
  double Z(double r) const override {
    if (n_ <= 2) return kInf;
    const double e = 0.5 - 1.0 / n_;
    return (1.0 - 1.0 / n_) * std::pow(r, e) / e;
  }
  double regularity() const override { return 0.0; }
  double q_inf() const override { return 0.0; }
  double q_sup() const override { return kInf; }
  std::string describe() const override { return "power(N=" + fmt(n_) + ")"; }
  double n_;
};

struct CustomPressure final : Pressure {
  CustomPressure(ScalarFn p, ScalarFn dp, double a) : p_(std::move(p)), dp_(std::move(dp)), a_(a) {}
  EntropyFamily family() const override { return EntropyFamily::custom; }
  double P(double r) const override { return p_(r); }
  double dP(double r) const override { return dp_(r); }
  double regularity() const override { return a_; }
  std::string describe() const override { return "custom(a=" + fmt(a_) + ")"; }
  ScalarFn p_, dp_;
  double a_;
};

struct RegularizedPressure final : Pressure {
  RegularizedPressure(std::shared_ptr<const Pressure> base, double eps, double M)
      : base_(std::move(base)), eps_(eps), M_(M), p_eps_(base_->P(eps)) {
    if (std::isfinite(M_)) {
      pm_ = base_->P(M_ + eps_) - p_eps_;
      slope_ = base_->dP(M_ + eps_);
    }
  }
  EntropyFamily family() const override { return EntropyFamily::regularized; }
  double N() const override { return base_->N(); }
  double eps() const override { return eps_; }
  double M() const override { return M_; }
  double P(double r) const override {
    if (r <= M_) return base_->P(r + eps_) - p_eps_;
    return pm_ + slope_ * (r - M_);
  }
  double dP(double r) const override { return r <= M_ ? base_->dP(r + eps_) : slope_; }
  double P_inverse(double z) const override {
    if (z <= 0) return 0.0;
    if (z <= pm_ || !std::isfinite(M_)) return std::max(base_->P_inverse(z + p_eps_) - eps_, 0.0);
    return M_ + (z - pm_) / slope_;
  }
  std::vector<double> kinks() const override {
    std::vector<double> k{eps_};
    if (std::isfinite(M_)) k.push_back(M_);
    return k;
  }
  double regularity() const override {
    double lo, hi;
    if (base_->family() == EntropyFamily::power) {
      // P′ of the power family is decreasing.
      lo = std::isfinite(M_) ? base_->dP(M_ + eps_) : 0.0;
      hi = base_->dP(eps_);
    } else if (base_->family() == EntropyFamily::linear) {
      lo = hi = 1.0;
    } else {
      const double top = std::isfinite(M_) ? M_ : 1e6;
      lo = kInf;
      hi = 0.0;
      for (double r : log_samples(1e-9, top, 4001)) {
        lo = std::min(lo, dP(r));
        hi = std::max(hi, dP(r));
      }
      lo = std::min(lo, dP(0.0));
      hi = std::max(hi, dP(0.0));
      if (!std::isfinite(M_)) lo = 0.0;
    }
    if (!(lo > 0) || !std::isfinite(hi)) return 0.0;
    return std::min(lo, 1.0 / hi);
  }
  double q_inf() const override {
    if (base_->family() == EntropyFamily::power)
      return std::isfinite(M_) ? slope_ : 0.0;
    if (base_->family() == EntropyFamily::linear) return 1.0;
    return Pressure::q_inf();
  }
  double q_sup() const override {
    if (base_->family() == EntropyFamily::power) return base_->dP(eps_);
    if (base_->family() == EntropyFamily::linear) return 1.0;
    return Pressure::q_sup();
  }
  std::string describe() const override {
    return "regularized(" + base_->describe() + ", eps=" + fmt(eps_) + ", M=" + fmt(M_) + ")";
  }
  std::shared_ptr<const Pressure> base_;
  double eps_, M_, p_eps_;
  double pm_ = kInf, slope_ = 0.0;
};

}  // namespace detail

EntropyModel EntropyModel::linear() {
  return EntropyModel(std::make_shared<detail::LinearPressure>());
}

EntropyModel EntropyModel::power(double N) {
  if (!(N > 1) || !std::isfinite(N)) throw std::invalid_argument("power family needs finite N > 1");
  return EntropyModel(std::make_shared<detail::PowerPressure>(N));
}

EntropyModel EntropyModel::custom(ScalarFn P, ScalarFn dP, double a) {
  if (!P || !dP) throw std::invalid_argument("custom pressure needs P and P'");
  if (!(a >= 0 && a <= 1)) throw std::invalid_argument("regularity constant must lie in [0,1]");
  if (std::abs(P(0.0)) > 1e-14) throw std::invalid_argument("custom pressure must satisfy P(0)=0");
  return EntropyModel(std::make_shared<detail::CustomPressure>(std::move(P), std::move(dP), a));
}

EntropyModel EntropyModel::regularized(double eps, double M) const {
  if (!(eps > 0) || !(M > eps)) throw std::invalid_argument("regularization needs 0 < eps < M");
  return EntropyModel(std::make_shared<detail::RegularizedPressure>(impl_, eps, M));
}

EntropyModel regularize_pressure(const EntropyModel& model, double eps, double M) {
  return model.regularized(eps, M);
}

EntropyFamily EntropyModel::family() const { return impl_->family(); }
double EntropyModel::N() const { return impl_->N(); }
double EntropyModel::eps() const { return impl_->eps(); }
double EntropyModel::M() const { return impl_->M(); }

double EntropyModel::P(double r) const { return r >= 0 ? impl_->P(r) : -impl_->P(-r); }
double EntropyModel::dP(double r) const { return impl_->dP(std::abs(r)); }
double EntropyModel::Q(double r) const { return r == 0 ? dP(0.0) : P(r) / r; }
double EntropyModel::R(double r) const { return r * dP(r) - P(r); }

double EntropyModel::U(double r) const {
  if (r < 0) throw std::domain_error("entropy evaluated at negative density");
  return impl_->U(r);
}

double EntropyModel::Z(double r) const {
  if (r < 0) throw std::domain_error("Z evaluated at negative density");
  return impl_->Z(r);
}

double EntropyModel::P_inverse(double z) const {
  return z >= 0 ? impl_->P_inverse(z) : -impl_->P_inverse(-z);
}

double EntropyModel::U_eps(double r, double eps) const {
  if (r < 0) throw std::domain_error("entropy evaluated at negative density");
  if (!(eps > 0)) throw std::invalid_argument("U_eps needs eps > 0");
  const auto f = [&](double s) { return P(s) / ((s + eps) * (s + eps)); };
  std::vector<double> cuts = impl_->kinks();
  return r * quad_split(f, 1.0, r, cuts) + eps * quad_split(f, 0.0, r, cuts);
}

double EntropyModel::regularity() const { return impl_->regularity(); }
double EntropyModel::q_inf() const { return impl_->q_inf(); }
double EntropyModel::q_sup() const { return impl_->q_sup(); }

double EntropyModel::lambda(double K) const {
  if (K == 0) return 0.0;
  return K > 0 ? K * q_inf() : K * q_sup();
}

std::string EntropyModel::describe() const { return impl_->describe(); }

double entropy_functional(const FiniteSpace& space, const EntropyModel& model, const Field& rho) {
  if (static_cast<std::size_t>(rho.size()) != space.size())
    throw std::invalid_argument("entropy: field size does not match the space");
  double s = 0.0;
  for (int x = 0; x < space.n(); ++x) s += model.U(rho[x]) * space.measure()[x];
  return s;
}

SigmaCoefficient sigma_coeff(double kappa, double t, double delta) {
  if (!(t >= 0 && t <= 1)) throw std::invalid_argument("sigma: t must lie in [0,1]");
  if (!(delta >= 0)) throw std::invalid_argument("sigma: delta must be >= 0");
  const double pi2 = boost::math::constants::pi_sqr<double>();
  SigmaCoefficient s{kappa, t, delta, 0.0, false};
  const double th = kappa * delta * delta;
  if (kappa == 0 || th == 0) {
    s.value = t;
  } else if (th >= pi2 - 1e-12) {
    s.value = kInf;
    s.infinite = true;
  } else if (std::abs(th) < 1e-6) {
    const double t2 = t * t;
    s.value = t * (1 + th * (1 - t2) / 6 + th * th * (7 - 10 * t2 + 3 * t2 * t2) / 360);
  } else if (th > 0) {
    const double w = std::sqrt(th);
    s.value = std::sin(w * t) / std::sin(w);
  } else {
    const double w = std::sqrt(-th);
    s.value = std::sinh(w * t) / std::sinh(w);
  }
  return s;
}

double green_weight(double s, double t) {
  if (!(s >= 0 && s <= 1 && t >= 0 && t <= 1))
    throw std::out_of_range("green_weight: arguments must lie in [0,1]");
  return s <= t ? (1 - t) * s : t * (1 - s);
}

std::vector<double> uniform_grid(int n) {
  if (n < 2) throw std::invalid_argument("uniform grid needs n >= 2");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = static_cast<double>(i) / (n - 1);
  return g;
}

CheckReport mccann_check(const EntropyModel& model, double N, const std::vector<double>& r_grid,
                         double tol) {
  if (!(N > 0)) throw std::invalid_argument("mccann_check: N must be positive");
  CheckReport rep;
  rep.name = "mccann";
  rep.tolerance = tol;
  rep.margin = kInf;
  for (double r : r_grid) {
    if (!(r > 0)) throw std::invalid_argument("mccann_check: grid must be positive");
    const double m = model.R(r) + model.P(r) / N;
    rep.residuals.push_back(m);
    if (m < rep.margin) {
      rep.margin = m;
      rep.witness = {r};
    }
  }
  rep.holds = rep.margin >= -tol;
  return rep;
}

namespace {

void check_uniform(const std::vector<double>& grid) {
  if (grid.size() < 3) throw std::invalid_argument("grid needs at least 3 points");
  const double h = (grid.back() - grid.front()) / (grid.size() - 1);
  if (std::abs(grid.front()) > 1e-12 || std::abs(grid.back() - 1) > 1e-12)
    throw std::invalid_argument("grid must span [0,1]");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (std::abs(grid[i] - grid[i - 1] - h) > 1e-9) throw std::invalid_argument("grid must be uniform");
}

}  // namespace

CheckReport weighted_convexity_check(const std::vector<double>& u, const std::vector<double>& f,
                                     const std::vector<double>& grid, double tol) {
  check_uniform(grid);
  const int n = static_cast<int>(grid.size());
  if (static_cast<int>(u.size()) != n || static_cast<int>(f.size()) != n)
    throw std::invalid_argument("samples must match the grid");
  CheckReport rep;
  rep.name = "weighted_convexity";
  rep.tolerance = tol;
  rep.margin = kInf;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      const int len = j - i;
      const double d = grid[j] - grid[i];
      for (int k = i + 1; k < j; ++k) {
        const double t = static_cast<double>(k - i) / len;
        // Trapezoid over the grid nodes in [r0, r1]; the kink of g sits on a node.
        double integral = 0.0;
        for (int l = i; l <= j; ++l) {
          const double s = static_cast<double>(l - i) / len;
          const double wgt = (l == i || l == j) ? 0.5 : 1.0;
          integral += wgt * f[l] * green_weight(s, t);
        }
        integral /= len;
        const double rhs = (1 - t) * u[i] + t * u[j] - d * d * integral;
        const double m = rhs - u[k];
        if (m < rep.margin) {
          rep.margin = m;
          rep.witness = {grid[i], grid[j], t};
        }
      }
    }
  }
  rep.holds = rep.margin >= -tol;
  return rep;
}

CheckReport sigma_concavity_check(const std::vector<double>& u, double kappa,
                                  const std::vector<double>& grid, double tol) {
  check_uniform(grid);
  const int n = static_cast<int>(grid.size());
  if (static_cast<int>(u.size()) != n) throw std::invalid_argument("samples must match the grid");
  const double pi2 = boost::math::constants::pi_sqr<double>();
  CheckReport rep;
  rep.name = "sigma_concavity";
  rep.tolerance = tol;
  rep.margin = kInf;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      const double d = grid[j] - grid[i];
      if (kappa * d * d >= pi2) continue;
      for (int k = i + 1; k < j; ++k) {
        const double t = static_cast<double>(k - i) / (j - i);
        const auto s0 = sigma_coeff(kappa, 1 - t, d);
        const auto s1 = sigma_coeff(kappa, t, d);
        if (s0.infinite || s1.infinite) continue;
        const double m = u[k] - (s0.value * u[i] + s1.value * u[j]);
        if (m < rep.margin) {
          rep.margin = m;
          rep.witness = {grid[i], grid[j], t};
        }
      }
    }
  }
  if (!std::isfinite(rep.margin)) rep.margin = 0.0;
  rep.holds = rep.margin >= -tol;
  return rep;
}

}  // namespace curvlab
