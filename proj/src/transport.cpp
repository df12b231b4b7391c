#include "curvlab/transport.hpp"

#include "curvlab/diffusion.hpp"
#include "curvlab/weighted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace curvlab {

namespace {

constexpr double kMassTol = 1e-10;

void require_probability(const FiniteSpace& space, const Field& rho, const char* what) {
  if (static_cast<std::size_t>(rho.size()) != space.size())
    throw std::invalid_argument(std::string(what) + ": field size does not match the space");
  const double mass = rho.dot(space.measure());
  if (!(std::abs(mass - 1.0) <= kMassTol))
    throw std::invalid_argument(std::string(what) + ": density is not a probability (mass " +
                                std::to_string(mass) + ")");
}

bool is_grid(const FiniteSpace& space) { return space.grid() != GridKind::none; }

// Transportation simplex on the positive-mass rows and columns.
class TransportSimplex {
 public:
  TransportSimplex(Field a, Field b, Eigen::MatrixXd c)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), p_(a_.size()), q_(b_.size()) {
    b_ *= a_.sum() / b_.sum();
    x_ = Eigen::MatrixXd::Zero(p_, q_);
    basic_.assign(static_cast<std::size_t>(p_ * q_), 0);
    tol_ = 1e-12 * std::max(1.0, c_.cwiseAbs().maxCoeff());
  }

  int solve() {
    northwest_corner();
    const long limit = 100L * (p_ + q_) * (p_ + q_) + 1000;
    int pivots = 0;
    for (;;) {
      potentials();
      int ei = -1, ej = -1;
      double best = -tol_;
      for (int i = 0; i < p_; ++i)
        for (int j = 0; j < q_; ++j) {
          if (is_basic(i, j)) continue;
          const double d = c_(i, j) - u_[i] - v_[j];
          if (d < best) {
            best = d;
            ei = i;
            ej = j;
          }
        }
      if (ei < 0) break;
      if (++pivots > limit) throw NumericalError("transport simplex exceeded its pivot limit");
      pivot(ei, ej);
    }
    potentials();
    return pivots;
  }

  const Eigen::MatrixXd& plan() const { return x_; }
  const Field& u() const { return u_; }
  const Field& v() const { return v_; }

 private:
  bool is_basic(int i, int j) const { return basic_[static_cast<std::size_t>(i * q_ + j)] != 0; }
  void set_basic(int i, int j, bool on) { basic_[static_cast<std::size_t>(i * q_ + j)] = on ? 1 : 0; }

  void northwest_corner() {
    Field ra = a_, rb = b_;
    int i = 0, j = 0;
    for (;;) {
      const bool last = i == p_ - 1 && j == q_ - 1;
      const double f = last ? ra[i] : std::min(ra[i], rb[j]);
      x_(i, j) = f;
      ra[i] -= f;
      rb[j] -= f;
      cells_.push_back({i, j});
      set_basic(i, j, true);
      if (last) break;
      if (i == p_ - 1) ++j;
      else if (j == q_ - 1) ++i;
      else if (ra[i] <= rb[j]) ++i;
      else ++j;
    }
  }

  void build_tree() {
    adj_.assign(static_cast<std::size_t>(p_ + q_), {});
    for (std::size_t e = 0; e < cells_.size(); ++e) {
      adj_[cells_[e].first].push_back(static_cast<int>(e));
      adj_[p_ + cells_[e].second].push_back(static_cast<int>(e));
    }
  }

  int other_end(int node, int e) const {
    const auto& c = cells_[e];
    return node < p_ ? p_ + c.second : c.first;
  }

  void potentials() {
    build_tree();
    u_ = Field::Constant(p_, std::numeric_limits<double>::quiet_NaN());
    v_ = Field::Constant(q_, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> seen(static_cast<std::size_t>(p_ + q_), 0);
    std::queue<int> todo;
    u_[0] = 0.0;
    seen[0] = 1;
    todo.push(0);
    while (!todo.empty()) {
      const int node = todo.front();
      todo.pop();
      for (int e : adj_[node]) {
        const int nb = other_end(node, e);
        if (seen[nb]) continue;
        seen[nb] = 1;
        const auto& c = cells_[e];
        if (nb >= p_) v_[c.second] = c_(c.first, c.second) - u_[c.first];
        else u_[c.first] = c_(c.first, c.second) - v_[c.second];
        todo.push(nb);
      }
    }
    for (char s : seen)
      if (!s) throw NumericalError("transport simplex basis is not a spanning tree");
  }

  void pivot(int ei, int ej) {
    // Path in the basis tree from row ei to column ej.
    const int src = ei, dst = p_ + ej;
    std::vector<int> via(static_cast<std::size_t>(p_ + q_), -1);
    std::vector<char> seen(static_cast<std::size_t>(p_ + q_), 0);
    std::queue<int> todo;
    todo.push(src);
    seen[src] = 1;
    while (!todo.empty() && !seen[dst]) {
      const int node = todo.front();
      todo.pop();
      for (int e : adj_[node]) {
        const int nb = other_end(node, e);
        if (seen[nb]) continue;
        seen[nb] = 1;
        via[nb] = e;
        todo.push(nb);
      }
    }
    std::vector<int> path;  // edges from dst back to src
    for (int node = dst; node != src;) {
      const int e = via[node];
      path.push_back(e);
      node = other_end(node, e);
    }
    double theta = kInf;
    int leave = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const auto& c = cells_[path[k]];
      const double f = x_(c.first, c.second);
      if (f < theta || (f == theta && c < cells_[leave])) {
        theta = f;
        leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      const auto& c = cells_[path[k]];
      x_(c.first, c.second) += (k % 2 == 0) ? -theta : theta;
    }
    const auto out = cells_[leave];
    x_(out.first, out.second) = 0.0;
    set_basic(out.first, out.second, false);
    cells_[leave] = {ei, ej};
    x_(ei, ej) = theta;
    set_basic(ei, ej, true);
  }

  Field a_, b_;
  Eigen::MatrixXd c_;
  int p_, q_;
  double tol_;
  Eigen::MatrixXd x_;
  std::vector<char> basic_;
  std::vector<std::pair<int, int>> cells_;
  std::vector<std::vector<int>> adj_;
  Field u_, v_;
};

std::vector<int> next_positive(const Field& a) {
  // nxt[i] = first index ≥ i with positive mass, or size.
  const int n = static_cast<int>(a.size());
  std::vector<int> nxt(static_cast<std::size_t>(n + 1), n);
  for (int i = n - 1; i >= 0; --i) nxt[i] = a[i] > 0 ? i : nxt[i + 1];
  return nxt;
}

// Monotone coupling of masses a, b on grid indices; the quantile level of b is shifted by
// alpha on the circle. Shifts are in index units.
std::vector<QuantilePiece> monotone_pieces(const Field& a, const Field& b, bool circle,
                                           double alpha) {
  const int n = static_cast<int>(a.size());
  const auto na = next_positive(a), nb = next_positive(b);
  std::vector<QuantilePiece> out;
  int i = na[0];
  if (i >= n || nb[0] >= n) return out;
  double remF = a[i];
  int j = nb[0];
  double remG = b[j];
  int lift = 0;
  if (circle) {
    const double total = b.sum();
    lift = static_cast<int>(std::floor(alpha));
    double f = (alpha - lift) * total;
    double cum = 0.0;
    j = nb[0];
    while (cum + b[j] <= f) {
      cum += b[j];
      j = nb[j + 1];
      if (j >= n) {
        j = nb[0];
        ++lift;
        cum = f = 0.0;
        break;
      }
    }
    remG = std::min(b[j], cum + b[j] - f);
  }
  for (;;) {
    const double len = std::min(remF, remG);
    if (len > 0) out.push_back({i, j, len, static_cast<double>(j + lift * n - i)});
    if (remF <= remG) {
      remG -= remF;
      i = na[i + 1];
      if (i >= n) break;
      remF = a[i];
    } else {
      remF -= remG;
      j = nb[j + 1];
      if (j >= n) {
        if (!circle) break;
        j = nb[0];
        ++lift;
      }
      remG = b[j];
    }
  }
  return out;
}

double pieces_cost(const std::vector<QuantilePiece>& pieces, double h) {
  double c = 0.0;
  for (const auto& p : pieces) c += p.mass * (p.shift * h) * (p.shift * h);
  return c;
}

Field masses(const FiniteSpace& space, const Field& rho) { return rho.cwiseProduct(space.measure()); }

std::vector<double> trapezoid_weights(const std::vector<double>& s) {
  const std::size_t J = s.size();
  std::vector<double> w(J, 0.0);
  for (std::size_t j = 0; j + 1 < J; ++j) {
    const double d = 0.5 * (s[j + 1] - s[j]);
    w[j] += d;
    w[j + 1] += d;
  }
  return w;
}

double action_weight(ActionWeight kind, double s, double t) {
  switch (kind) {
    case ActionWeight::constant: return 1.0;
    case ActionWeight::omega: return 1.0 - s;
    case ActionWeight::identity: return s;
    case ActionWeight::green: return green_weight(std::clamp(s, 0.0, 1.0), t);
  }
  return 1.0;
}

EntropyModel dimensional_model(double N) {
  return std::isinf(N) ? EntropyModel::linear() : EntropyModel::power(N);
}

double default_tol(double tol, const FiniteSpace& space, double tau) {
  return tol >= 0 ? tol : resolution_tolerance(space, tau);
}

}  // namespace

MeasureCurve make_curve(const FiniteSpace& space, std::vector<double> times,
                        std::vector<Field> densities) {
  if (times.size() < 2 || times.size() != densities.size())
    throw std::invalid_argument("curve: need at least two times and one density per time");
  if (times.front() != 0.0 || times.back() != 1.0)
    throw std::invalid_argument("curve: times must run from 0 to 1");
  for (std::size_t j = 1; j < times.size(); ++j)
    if (!(times[j] > times[j - 1])) throw std::invalid_argument("curve: times must increase");
  for (const auto& d : densities) {
    require_probability(space, d, "curve");
    if ((d.array() < 0).any()) throw std::invalid_argument("curve: negative density");
  }
  return MeasureCurve{space, std::move(times), std::move(densities), {}, {}, {}};
}

W2Result w2_distance(const FiniteSpace& space, const DensityField& mu0, const DensityField& mu1) {
  require_probability(space, mu0.values(), "w2_distance");
  require_probability(space, mu1.values(), "w2_distance");
  const int n = space.n();
  const Field a = masses(space, mu0.values()), b = masses(space, mu1.values());
  std::vector<int> rows, cols;
  for (int x = 0; x < n; ++x) {
    if (a[x] > 0) rows.push_back(x);
    if (b[x] > 0) cols.push_back(x);
  }
  const int p = static_cast<int>(rows.size()), q = static_cast<int>(cols.size());
  Field ar(p), bc(q);
  Eigen::MatrixXd c(p, q);
  for (int i = 0; i < p; ++i) ar[i] = a[rows[i]];
  for (int j = 0; j < q; ++j) bc[j] = b[cols[j]];
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < q; ++j) {
      const double d = space.metric()(rows[i], cols[j]);
      c(i, j) = d * d;
    }
  TransportSimplex lp(ar, bc, c);
  W2Result out;
  Coupling& cp = out.coupling;
  cp.pivots = lp.solve();
  cp.plan = Eigen::MatrixXd::Zero(n, n);
  cp.u = Field::Zero(n);
  cp.v = Field::Zero(n);
  for (int i = 0; i < p; ++i) {
    cp.u[rows[i]] = lp.u()[i];
    for (int j = 0; j < q; ++j) cp.plan(rows[i], cols[j]) = std::max(0.0, lp.plan()(i, j));
  }
  for (int j = 0; j < q; ++j) cp.v[cols[j]] = lp.v()[j];
  const Eigen::MatrixXd cc = c.cwiseMax(0.0);
  cp.cost = lp.plan().cwiseProduct(cc).sum();
  const double dual = ar.dot(lp.u()) + bc.dot(lp.v());
  cp.duality_gap = std::abs(cp.cost - dual);
  double mrc = kInf;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < q; ++j) mrc = std::min(mrc, c(i, j) - lp.u()[i] - lp.v()[j]);
  cp.min_reduced_cost = mrc;
  out.distance = std::sqrt(std::max(0.0, cp.cost));
  return out;
}

std::vector<QuantilePiece> quantile_coupling(const FiniteSpace& space, const DensityField& mu0,
                                             const DensityField& mu1) {
  if (!is_grid(space)) throw std::invalid_argument("quantile coupling needs a path or circle grid");
  require_probability(space, mu0.values(), "quantile_coupling");
  require_probability(space, mu1.values(), "quantile_coupling");
  const Field a = masses(space, mu0.values()), b = masses(space, mu1.values());
  const double h = space.spacing();
  if (space.grid() == GridKind::path) return monotone_pieces(a, b, false, 0.0);

  auto cost = [&](double alpha) { return pieces_cost(monotone_pieces(a, b, true, alpha), h); };
  constexpr int kScan = 64;
  int best = 0;
  double best_cost = kInf;
  for (int k = 0; k <= kScan; ++k) {
    const double c = cost(-1.0 + 2.0 * k / kScan);
    if (c < best_cost) {
      best_cost = c;
      best = k;
    }
  }
  double lo = -1.0 + 2.0 * std::max(0, best - 1) / kScan;
  double hi = -1.0 + 2.0 * std::min(kScan, best + 1) / kScan;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = cost(x1), f2 = cost(x2);
  while (hi - lo > 1e-14) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = cost(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = cost(x2);
    }
  }
  double alpha = 0.5 * (lo + hi);
  if (best_cost < cost(alpha)) alpha = -1.0 + 2.0 * best / kScan;
  return monotone_pieces(a, b, true, alpha);
}

double w2_grid(const FiniteSpace& space, const DensityField& mu0, const DensityField& mu1) {
  return std::sqrt(pieces_cost(quantile_coupling(space, mu0, mu1), space.spacing()));
}

double wasserstein2(const FiniteSpace& space, const DensityField& mu0, const DensityField& mu1) {
  return is_grid(space) ? w2_grid(space, mu0, mu1) : w2_distance(space, mu0, mu1).distance;
}

double kantorovich_dual_bound(const FiniteSpace& space, const DensityField& mu0,
                              const DensityField& mu1, const Field& phi) {
  require_probability(space, mu0.values(), "kantorovich_dual_bound");
  require_probability(space, mu1.values(), "kantorovich_dual_bound");
  return integrate(space, hopf_lax(space, phi, 1.0), mu1.values()) -
         integrate(space, phi, mu0.values());
}

MeasureCurve geodesic_1d(const FiniteSpace& space, const DensityField& rho0,
                         const DensityField& rho1, int J) {
  if (!is_grid(space)) throw std::invalid_argument("geodesic_1d needs a path or circle grid");
  if (J < 1) throw std::invalid_argument("geodesic_1d: J must be >= 1");
  const auto pieces = quantile_coupling(space, rho0, rho1);
  const int n = space.n();
  const bool circle = space.grid() == GridKind::circle;
  std::vector<double> times(static_cast<std::size_t>(J + 1));
  std::vector<Field> dens(static_cast<std::size_t>(J + 1));
  for (int k = 0; k <= J; ++k) {
    const double s = k == J ? 1.0 : static_cast<double>(k) / J;
    times[k] = s;
    Field mass = Field::Zero(n);
    for (const auto& p : pieces) {
      const double pos = p.i + s * p.shift;
      const double base = std::floor(pos);
      const double frac = pos - base;
      int i0 = static_cast<int>(base);
      if (circle) {
        i0 = ((i0 % n) + n) % n;
        mass[i0] += (1 - frac) * p.mass;
        if (frac > 0) mass[(i0 + 1) % n] += frac * p.mass;
      } else {
        i0 = std::clamp(i0, 0, n - 1);
        mass[i0] += (1 - frac) * p.mass;
        if (frac > 0) mass[std::min(i0 + 1, n - 1)] += frac * p.mass;
      }
    }
    Field rho = mass.cwiseQuotient(space.measure());
    rho /= rho.dot(space.measure());
    dens[k] = std::move(rho);
  }
  dens.front() = rho0.values();
  dens.back() = rho1.values();
  return make_curve(space, std::move(times), std::move(dens));
}

MeasureCurve curve_velocity(const MeasureCurve& curve) {
  MeasureCurve out = curve;
  const int J = curve.size() - 1;
  const auto& s = curve.times;
  out.potentials.assign(s.size(), Field());
  out.velocity2.assign(s.size(), Field());
  out.compatibility_defects.assign(s.size(), 0.0);
  for (int j = 0; j <= J; ++j) {
    const int lo = std::max(0, j - 1), hi = std::min(J, j + 1);
    const Field l = (curve.densities[hi] - curve.densities[lo]) / (s[hi] - s[lo]);
    const WeightedOperator op(curve.space, curve.densities[j]);
    double defect = 0.0;
    for (double d : op.defects(l)) defect = std::max(defect, std::abs(d));
    out.compatibility_defects[j] = defect;
    const Field phi = op.solve(op.project_compatible(l));
    Field v2 = gamma(curve.space, phi);
    for (int x = 0; x < v2.size(); ++x)
      if (!(curve.densities[j][x] > 0)) v2[x] = 0.0;
    out.potentials[j] = phi;
    out.velocity2[j] = std::move(v2);
  }
  return out;
}

MeasureCurve reverse_curve(const MeasureCurve& curve) {
  MeasureCurve out = curve;
  const std::size_t J = curve.times.size();
  for (std::size_t j = 0; j < J; ++j) {
    out.times[j] = 1.0 - curve.times[J - 1 - j];
    out.densities[j] = curve.densities[J - 1 - j];
    if (!curve.potentials.empty()) out.potentials[j] = -curve.potentials[J - 1 - j];
    if (!curve.velocity2.empty()) out.velocity2[j] = curve.velocity2[J - 1 - j];
    if (!curve.compatibility_defects.empty())
      out.compatibility_defects[j] = curve.compatibility_defects[J - 1 - j];
  }
  out.times.front() = 0.0;
  out.times.back() = 1.0;
  return out;
}

double constant_speed_defect(const MeasureCurve& curve) {
  const auto& sp = curve.space;
  const DensityField a(sp, curve.densities.front());
  const double total = wasserstein2(sp, a, DensityField(sp, curve.densities.back()));
  double worst = 0.0;
  for (int j = 1; j + 1 < curve.size(); ++j) {
    const double w = wasserstein2(sp, a, DensityField(sp, curve.densities[j]));
    worst = std::max(worst, std::abs(w - curve.times[j] * total));
  }
  return worst;
}

double weighted_action(const MeasureCurve& curve, const EntropyModel& model, ActionWeight weight,
                       double t) {
  if (!curve.has_velocity()) throw std::invalid_argument("weighted_action: velocities missing");
  if (weight == ActionWeight::green && !(t >= 0 && t <= 1))
    throw std::invalid_argument("weighted_action: Green pole must lie in [0,1]");
  const auto tw = trapezoid_weights(curve.times);
  const Eigen::VectorXd& m = curve.space.measure();
  double total = 0.0;
  for (int j = 0; j < curve.size(); ++j) {
    const double wt = action_weight(weight, curve.times[j], t);
    if (wt == 0.0) continue;
    const Field& rho = curve.densities[j];
    const Field& v2 = curve.velocity2[j];
    double inner = 0.0;
    for (int x = 0; x < rho.size(); ++x) {
      const double e = v2[x] * rho[x];
      if (e == 0.0) continue;
      inner += model.Q(rho[x]) * e * m[x];
    }
    total += tw[j] * wt * inner;
  }
  return total;
}

double kinetic_action(const MeasureCurve& curve) {
  return weighted_action(curve, EntropyModel::linear(), ActionWeight::constant);
}

double time_reversal_residual(const MeasureCurve& curve, const EntropyModel& model) {
  const MeasureCurve c = curve.has_velocity() ? curve : curve_velocity(curve);
  return weighted_action(c, model, ActionWeight::constant) -
         weighted_action(c, model, ActionWeight::omega) -
         weighted_action(reverse_curve(c), model, ActionWeight::omega);
}

CheckReport cdstar_convexity_check(const MeasureCurve& curve, double K, double N, bool sigma_form,
                                   double tol) {
  if (!(N > 1)) throw std::invalid_argument("cdstar: N must be > 1");
  if (sigma_form && std::isinf(N))
    throw std::invalid_argument("cdstar: the distortion form needs a finite N");
  const auto& sp = curve.space;
  const auto model = dimensional_model(N);
  const MeasureCurve c = (K != 0.0 && !curve.has_velocity()) ? curve_velocity(curve) : curve;
  const int J = c.size() - 1;

  CheckReport rep;
  rep.name = "cdstar_convexity";
  rep.tolerance = default_tol(tol, sp, J > 0 ? 1.0 / J : 0.0);
  const double u0 = entropy_functional(sp, model, c.densities.front());
  const double u1 = entropy_functional(sp, model, c.densities.back());
  double worst = kInf;
  int worst_j = 0;
  for (int j = 0; j <= J; ++j) {
    const double t = c.times[j];
    const double action = K != 0.0 ? weighted_action(c, model, ActionWeight::green, t) : 0.0;
    const double lhs = entropy_functional(sp, model, c.densities[j]);
    const double margin = (1 - t) * u0 + t * u1 - K * action - lhs;
    rep.residuals.push_back(margin);
    if (margin < worst) {
      worst = margin;
      worst_j = j;
    }
  }
  rep.margin = worst;
  rep.witness = {c.times[worst_j]};
  rep.holds = worst >= -rep.tolerance;
  rep.diagnostics["K"] = K;
  rep.diagnostics["N"] = N;
  rep.diagnostics["entropy_start"] = u0;
  rep.diagnostics["entropy_end"] = u1;

  if (sigma_form) {
    struct Pair {
      int i, j;
      double mass, d;
    };
    std::vector<Pair> pairs;
    const DensityField a(sp, c.densities.front()), b(sp, c.densities.back());
    if (is_grid(sp)) {
      for (const auto& p : quantile_coupling(sp, a, b))
        pairs.push_back({p.i, p.j, p.mass, std::abs(p.shift) * sp.spacing()});
    } else {
      const auto w = w2_distance(sp, a, b);
      for (int i = 0; i < sp.n(); ++i)
        for (int j = 0; j < sp.n(); ++j)
          if (w.coupling.plan(i, j) > 0) pairs.push_back({i, j, w.coupling.plan(i, j), sp.metric()(i, j)});
    }
    const double kappa = K / N;
    double sworst = kInf;
    for (int k = 0; k <= J; ++k) {
      const double t = c.times[k];
      double integral = 0.0;
      bool infinite = false;
      for (const auto& p : pairs) {
        const auto s0 = sigma_coeff(kappa, 1 - t, p.d);
        const auto s1 = sigma_coeff(kappa, t, p.d);
        if (s0.infinite || s1.infinite) {
          infinite = true;
          break;
        }
        integral += p.mass * (s0.value * std::pow(a(p.i), -1.0 / N) + s1.value * std::pow(b(p.j), -1.0 / N));
      }
      const double rhs = infinite ? -kInf : N - N * integral;
      sworst = std::min(sworst, rhs - entropy_functional(sp, model, c.densities[k]));
    }
    rep.diagnostics["sigma_margin"] = sworst;
    rep.holds = rep.holds && sworst >= -rep.tolerance;
  }
  return rep;
}

CheckReport evi_check(const FiniteSpace& space, const EntropyModel& model, const DensityField& rho,
                      const DensityField& nu, double K, double T, int n, int J, double tol) {
  if (!is_grid(space)) throw std::invalid_argument("evi_check needs a path or circle grid");
  require_probability(space, rho.values(), "evi_check");
  require_probability(space, nu.values(), "evi_check");
  const auto traj = evolve(space, model, rho, T, n);
  const double tau = traj.tau();
  CheckReport rep;
  rep.name = "evi";
  rep.tolerance = default_tol(tol, space, tau);
  const double unu = entropy_functional(space, model, nu.values());
  std::vector<double> w2sq(traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double w = w2_grid(space, normalized(space, traj.states[k]), nu);
    w2sq[k] = w * w;
  }
  double worst = kInf;
  int worst_k = 0;
  for (int k = 0; k < n; ++k) {
    const Field& next = traj.states[k + 1];
    double action = 0.0;
    if (K != 0.0) {
      const auto geo = curve_velocity(geodesic_1d(space, normalized(space, next), nu, J));
      action = weighted_action(geo, model, ActionWeight::omega);
    }
    const double lhs = 0.5 * (w2sq[k + 1] - w2sq[k]) / tau + entropy_functional(space, model, next);
    const double margin = unu - K * action - lhs;
    rep.residuals.push_back(margin);
    if (margin < worst) {
      worst = margin;
      worst_k = k;
    }
  }
  rep.margin = worst;
  rep.witness = {traj.times[worst_k + 1]};
  rep.holds = worst >= -rep.tolerance;
  rep.diagnostics["tau"] = tau;
  rep.diagnostics["h"] = space.spacing();
  rep.diagnostics["K"] = K;
  rep.diagnostics["final_w2"] = std::sqrt(w2sq.back());
  return rep;
}

CheckReport contraction_check(const FiniteSpace& space, const EntropyModel& model,
                              const DensityField& rho, const DensityField& sigma, double K,
                              double T, int n, double tol) {
  require_probability(space, rho.values(), "contraction_check");
  require_probability(space, sigma.values(), "contraction_check");
  const auto a = evolve(space, model, rho, T, n);
  const auto b = evolve(space, model, sigma, T, n);
  const double Lambda = model.lambda(K);
  CheckReport rep;
  rep.name = "contraction";
  rep.tolerance = default_tol(tol, space, a.tau());
  const double w0 = wasserstein2(space, rho, sigma);
  double worst = kInf, worst_ratio = 0.0;
  int worst_k = 0;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    const double wk = wasserstein2(space, normalized(space, a.states[k]), normalized(space, b.states[k]));
    const double bound = std::exp(-Lambda * a.times[k]) * w0;
    const double margin = bound > 0 ? 1.0 - wk / bound : -wk;
    if (bound > 0) worst_ratio = std::max(worst_ratio, wk / bound);
    rep.residuals.push_back(margin);
    if (margin < worst) {
      worst = margin;
      worst_k = static_cast<int>(k);
    }
  }
  rep.margin = worst;
  rep.witness = {a.times[worst_k]};
  rep.holds = worst >= -rep.tolerance;
  rep.diagnostics["lambda"] = Lambda;
  rep.diagnostics["worst_ratio"] = worst_ratio;
  rep.diagnostics["initial_w2"] = w0;
  return rep;
}

CheckReport curve_action_monotonicity_check(const MeasureCurve& curve, const EntropyModel& model,
                                            double K, double T, int n, ActionFlow flow,
                                            double tol) {
  if (!(T >= 0)) throw std::invalid_argument("action monotonicity: T must be >= 0");
  if (n < 1) throw std::invalid_argument("action monotonicity: n must be >= 1");
  const auto& sp = curve.space;
  const int J = curve.size() - 1;
  const int steps = T > 0 ? n : 0;
  // slices[j][k]: slice j after k steps.
  std::vector<std::vector<Field>> slices(static_cast<std::size_t>(J + 1));
  for (int j = 0; j <= J; ++j) {
    const double Tj = flow == ActionFlow::uniform ? T : curve.times[j] * T;
    if (steps == 0 || Tj == 0.0) {
      slices[j].assign(static_cast<std::size_t>(steps + 1), curve.densities[j]);
    } else {
      slices[j] = evolve(sp, model, DensityField(sp, curve.densities[j]), Tj, steps).states;
    }
  }
  const ActionWeight qw = flow == ActionFlow::uniform ? ActionWeight::constant : ActionWeight::identity;
  std::vector<double> a2(static_cast<std::size_t>(steps + 1)), aq(a2.size()), tk(a2.size());
  for (int k = 0; k <= steps; ++k) {
    std::vector<Field> dens;
    for (int j = 0; j <= J; ++j) dens.push_back(slices[j][k] / slices[j][k].dot(sp.measure()));
    const auto ck = curve_velocity(make_curve(sp, curve.times, std::move(dens)));
    a2[k] = kinetic_action(ck);
    aq[k] = weighted_action(ck, model, qw);
    tk[k] = steps ? T * k / steps : 0.0;
  }
  CheckReport rep;
  rep.name = flow == ActionFlow::uniform ? "action_monotonicity" : "action_energy_monotonicity";
  rep.tolerance = default_tol(tol, sp, steps ? T / steps : 0.0);
  const double u00 = entropy_functional(sp, model, curve.densities.front());
  double integral = 0.0, worst = kInf;
  int worst_k = 0;
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) integral += 0.5 * (tk[k] - tk[k - 1]) * (aq[k] + aq[k - 1]);
    double margin = 0.5 * a2[0] - 0.5 * a2[k] - K * integral;
    if (flow == ActionFlow::scaled) {
      const double u1 = entropy_functional(sp, model, slices[J][k]);
      margin += tk[k] * (u00 - u1);
    }
    rep.residuals.push_back(margin);
    if (margin < worst) {
      worst = margin;
      worst_k = k;
    }
  }
  rep.margin = worst;
  rep.witness = {tk[worst_k]};
  rep.holds = worst >= -rep.tolerance;
  rep.diagnostics["initial_action"] = a2.front();
  rep.diagnostics["final_action"] = a2.back();
  rep.diagnostics["K"] = K;
  return rep;
}

}  // namespace curvlab
