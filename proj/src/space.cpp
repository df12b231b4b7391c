#include "curvlab/space.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace curvlab {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_field(const FiniteSpace& space, const Field& f, const char* name) {
  if (static_cast<std::size_t>(f.size()) != space.size())
    throw std::invalid_argument(std::string(name) + ": size does not match the space");
}

}  // namespace

FiniteSpace::FiniteSpace(Eigen::VectorXd m, Eigen::MatrixXd d, Eigen::MatrixXd w)
    : FiniteSpace(std::move(m), std::move(d), std::move(w), Options{}) {}

FiniteSpace::FiniteSpace(Eigen::VectorXd m, Eigen::MatrixXd d, Eigen::MatrixXd w, Options opts) {
  const Eigen::Index n = m.size();
  require(n >= 1, "space must have at least one point");
  require(static_cast<std::size_t>(n) <= kMaxPoints,
          "space size " + std::to_string(n) + " exceeds cap " + std::to_string(kMaxPoints));
  require(d.rows() == n && d.cols() == n, "metric must be n x n");
  require(w.rows() == n && w.cols() == n, "conductance must be n x n");
  for (Eigen::Index x = 0; x < n; ++x) {
    require(std::isfinite(m[x]) && m[x] > 0, "measure must be positive and finite");
    require(d(x, x) == 0.0, "metric diagonal must vanish");
    require(w(x, x) == 0.0, "conductance diagonal must vanish");
    for (Eigen::Index y = x + 1; y < n; ++y) {
      require(d(x, y) == d(y, x), "metric must be symmetric");
      require(std::isfinite(d(x, y)) && d(x, y) > 0, "metric must be positive off the diagonal");
      require(w(x, y) == w(y, x), "conductance must be symmetric");
      require(std::isfinite(w(x, y)) && w(x, y) >= 0, "conductance must be nonnegative");
    }
  }
  const double scale = d.maxCoeff();
  for (Eigen::Index y = 0; y < n; ++y) {
    for (Eigen::Index x = 0; x < n; ++x) {
      const double dxy = d(x, y);
      for (Eigen::Index z = 0; z < n; ++z) {
        if (d(x, z) > dxy + d(y, z) + 1e-12 * scale)
          throw std::invalid_argument("metric violates the triangle inequality at (" +
                                      std::to_string(x) + "," + std::to_string(y) + "," +
                                      std::to_string(z) + ")");
      }
    }
  }

  auto impl = std::make_shared<Impl>();
  impl->m = std::move(m);
  impl->d = std::move(d);
  impl->w = std::move(w);
  impl->opts = opts;
  impl->adj.resize(n);
  std::vector<Eigen::Triplet<double>> trips;
  for (int x = 0; x < n; ++x) {
    double deg = 0.0;
    for (int y = 0; y < n; ++y) {
      const double wxy = impl->w(x, y);
      if (wxy > 0) {
        impl->adj[x].push_back({y, wxy});
        trips.emplace_back(x, y, wxy);
        deg += wxy;
        if (x < y) impl->edges.push_back({x, y, wxy});
      }
    }
    trips.emplace_back(x, x, -deg);
  }
  impl->stiffness.resize(n, n);
  impl->stiffness.setFromTriplets(trips.begin(), trips.end());
  impl->stiffness.makeCompressed();

  impl->component.assign(n, -1);
  int label = 0;
  for (int s = 0; s < n; ++s) {
    if (impl->component[s] >= 0) continue;
    std::vector<int> stack{s};
    impl->component[s] = label;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      for (const auto& nb : impl->adj[x]) {
        if (impl->component[nb.y] < 0) {
          impl->component[nb.y] = label;
          stack.push_back(nb.y);
        }
      }
    }
    ++label;
  }
  impl->n_components = label;
  impl_ = std::move(impl);
}

DensityField::DensityField(const FiniteSpace& space, Field values) : values_(std::move(values)) {
  check_field(space, values_, "density");
  for (Eigen::Index x = 0; x < values_.size(); ++x) {
    if (!std::isfinite(values_[x]) || values_[x] < 0)
      throw std::invalid_argument("density values must be finite and nonnegative");
  }
  mass_ = values_.dot(space.measure());
}

bool DensityField::is_probability() const { return std::abs(mass_ - 1.0) <= 1e-12; }

DensityField normalized(const FiniteSpace& space, const Field& values) {
  DensityField raw(space, values);
  if (!(raw.mass() > 0)) throw std::invalid_argument("cannot normalize a density of zero mass");
  return DensityField(space, values / raw.mass());
}

Field gamma(const FiniteSpace& space, const Field& f, const Field& g) {
  check_field(space, f, "f");
  check_field(space, g, "g");
  Field out = Field::Zero(space.n());
  for (const auto& e : space.edges()) {
    const double v = e.w * (f[e.y] - f[e.x]) * (g[e.y] - g[e.x]);
    out[e.x] += v;
    out[e.y] += v;
  }
  return (out.array() / (2.0 * space.measure().array())).matrix();
}

Field gamma(const FiniteSpace& space, const Field& f) { return gamma(space, f, f); }

double dirichlet_energy(const FiniteSpace& space, const Field& f, const Field& g) {
  check_field(space, f, "f");
  check_field(space, g, "g");
  double s = 0.0;
  for (const auto& e : space.edges()) s += e.w * (f[e.y] - f[e.x]) * (g[e.y] - g[e.x]);
  return s;
}

double dirichlet_energy(const FiniteSpace& space, const Field& f) {
  return dirichlet_energy(space, f, f);
}

Field laplacian(const FiniteSpace& space, const Field& f) {
  check_field(space, f, "f");
  Field out = Field::Zero(space.n());
  for (const auto& e : space.edges()) {
    const double flux = e.w * (f[e.y] - f[e.x]);
    out[e.x] += flux;
    out[e.y] -= flux;
  }
  return (out.array() / space.measure().array()).matrix();
}

double integrate(const FiniteSpace& space, const Field& f, const Field& g) {
  check_field(space, f, "f");
  check_field(space, g, "g");
  return (f.array() * g.array() * space.measure().array()).sum();
}

double integrate(const FiniteSpace& space, const Field& f) {
  check_field(space, f, "f");
  return f.dot(space.measure());
}

double resolution_tolerance(const FiniteSpace& space, double tau) {
  return 10.0 * (space.spacing() + tau);
}

Eigen::MatrixXd laplacian_matrix(const FiniteSpace& space) {
  Eigen::MatrixXd k = Eigen::MatrixXd(space.stiffness());
  return space.measure().cwiseInverse().asDiagonal() * k;
}

Field heat_flow(const FiniteSpace& space, const Field& f, double t) {
  check_field(space, f, "f");
  if (!(t >= 0) || !std::isfinite(t)) throw std::invalid_argument("heat_flow: t must be >= 0");
  if (t == 0) return f;
  const Eigen::VectorXd sq = space.measure().cwiseSqrt();
  if (space.size() <= 512) {
    const Eigen::MatrixXd k = Eigen::MatrixXd(space.stiffness());
    const Eigen::VectorXd isq = sq.cwiseInverse();
    const Eigen::MatrixXd s = isq.asDiagonal() * k * isq.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
    const Eigen::VectorXd ex = (t * es.eigenvalues().array()).exp().matrix();
    const Eigen::VectorXd y = sq.cwiseProduct(f);
    const Eigen::VectorXd c = es.eigenvectors().transpose() * y;
    const Eigen::VectorXd out = es.eigenvectors() * ex.cwiseProduct(c);
    return isq.cwiseProduct(out);
  }
  // Crank-Nicolson in stiffness form: (M - h/2 K) u' = (M + h/2 K) u.
  const int steps = 1024;
  const double h = t / steps;
  SparseMatrix mass(space.n(), space.n());
  mass.reserve(Eigen::VectorXi::Constant(space.n(), 1));
  for (int x = 0; x < space.n(); ++x) mass.insert(x, x) = space.measure()[x];
  const SparseMatrix lhs = mass - 0.5 * h * space.stiffness();
  const SparseMatrix rhs = mass + 0.5 * h * space.stiffness();
  Eigen::SimplicialLDLT<SparseMatrix> solver(lhs);
  if (solver.info() != Eigen::Success) throw std::runtime_error("heat_flow: factorization failed");
  Field u = f;
  for (int k = 0; k < steps; ++k) u = solver.solve(rhs * u);
  return u;
}

Field hopf_lax(const FiniteSpace& space, const Field& f, double t) {
  check_field(space, f, "f");
  if (!(t > 0)) throw std::invalid_argument("hopf_lax: t must be > 0");
  const auto& d = space.metric();
  Field out(space.n());
  for (int x = 0; x < space.n(); ++x) {
    double best = f[x];
    for (int y = 0; y < space.n(); ++y) best = std::min(best, f[y] + d(x, y) * d(x, y) / (2 * t));
    out[x] = best;
  }
  return out;
}

Field slope(const FiniteSpace& space, const Field& f, SlopeKind kind) {
  check_field(space, f, "f");
  if (space.size() < 2) throw std::invalid_argument("slope needs at least two points");
  const auto& d = space.metric();
  Field out = Field::Zero(space.n());
  for (int x = 0; x < space.n(); ++x) {
    for (int y = 0; y < space.n(); ++y) {
      if (y == x) continue;
      double diff = f[x] - f[y];
      if (kind == SlopeKind::full) diff = std::abs(diff);
      out[x] = std::max(out[x], std::max(diff, 0.0) / d(x, y));
    }
  }
  return out;
}

Eigen::MatrixXd shortest_path_metric(const Eigen::MatrixXd& w) {
  const Eigen::Index n = w.rows();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, inf);
  for (Eigen::Index x = 0; x < n; ++x) {
    d(x, x) = 0;
    for (Eigen::Index y = 0; y < n; ++y)
      if (w(x, y) > 0) d(x, y) = 1.0 / std::sqrt(w(x, y));
  }
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) d(x, y) = std::min(d(x, y), d(x, k) + d(k, y));
  double fill = 0.0;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      if (std::isfinite(d(x, y))) fill = std::max(fill, d(x, y));
  if (fill == 0.0) fill = 1.0;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      if (!std::isfinite(d(x, y))) d(x, y) = fill;
  // Symmetrize exactly; floating sums may differ in the last bit.
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x + 1; y < n; ++y) d(y, x) = d(x, y);
  return d;
}

FiniteSpace space_from_conductances(Eigen::VectorXd m, Eigen::MatrixXd w) {
  Eigen::MatrixXd d = shortest_path_metric(w);
  FiniteSpace::Options opts;
  opts.metric_filled = true;
  return FiniteSpace(std::move(m), std::move(d), std::move(w), opts);
}

FiniteSpace two_point_space() {
  Eigen::VectorXd m = Eigen::VectorXd::Ones(2);
  Eigen::MatrixXd d(2, 2);
  d << 0, 1, 1, 0;
  Eigen::MatrixXd w = d;
  return FiniteSpace(m, d, w);
}

FiniteSpace path_grid(int n, double length) {
  if (n < 2) throw std::invalid_argument("path grid needs n >= 2");
  if (!(length > 0)) throw std::invalid_argument("path grid needs positive length");
  const double h = length / (n - 1);
  Eigen::VectorXd m = Eigen::VectorXd::Constant(n, h);
  m[0] = m[n - 1] = h / 2;
  Eigen::MatrixXd d(n, n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) d(x, y) = std::abs(x - y) * h;
  for (int x = 0; x + 1 < n; ++x) w(x, x + 1) = w(x + 1, x) = 1.0 / h;
  FiniteSpace::Options opts{GridKind::path, h, length, false};
  return FiniteSpace(m, d, w, opts);
}

FiniteSpace circle_grid(int n, double length) {
  if (n < 3) throw std::invalid_argument("circle grid needs n >= 3");
  if (!(length > 0)) throw std::invalid_argument("circle grid needs positive length");
  const double h = length / n;
  Eigen::VectorXd m = Eigen::VectorXd::Constant(n, h);
  Eigen::MatrixXd d(n, n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      const int k = std::abs(x - y);
      d(x, y) = std::min(k, n - k) * h;
    }
  for (int x = 0; x < n; ++x) {
    const int y = (x + 1) % n;
    w(x, y) = w(y, x) = 1.0 / h;
  }
  FiniteSpace::Options opts{GridKind::circle, h, length, false};
  return FiniteSpace(m, d, w, opts);
}

FiniteSpace complete_graph(int n) {
  if (n < 1) throw std::invalid_argument("complete graph needs n >= 1");
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(n, n);
  w.diagonal().setZero();
  return FiniteSpace(Eigen::VectorXd::Ones(n), w, w);
}

FiniteSpace erdos_renyi(int n, double p, std::uint64_t seed, bool random_weights, bool connect) {
  if (n < 1) throw std::invalid_argument("random graph needs n >= 1");
  if (!(p >= 0 && p <= 1)) throw std::invalid_argument("edge probability must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  if (random_weights)
    for (int x = 0; x < n; ++x) m[x] = 0.5 + unit(rng);
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y) {
      const bool on = unit(rng) < p;
      const double wt = random_weights ? 0.5 + unit(rng) : 1.0;
      if (on) w(x, y) = w(y, x) = wt;
    }
  if (connect) {
    std::vector<int> label(n);
    std::iota(label.begin(), label.end(), 0);
    auto find = [&](int x) {
      while (label[x] != x) x = label[x] = label[label[x]];
      return x;
    };
    for (int x = 0; x < n; ++x)
      for (int y = x + 1; y < n; ++y)
        if (w(x, y) > 0) label[find(x)] = find(y);
    for (int x = 1; x < n; ++x) {
      if (find(x) != find(x - 1)) {
        w(x, x - 1) = w(x - 1, x) = 1.0;
        label[find(x)] = find(x - 1);
      }
    }
  }
  return space_from_conductances(std::move(m), std::move(w));
}

}  // namespace curvlab
