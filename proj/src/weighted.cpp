#include "curvlab/weighted.hpp"

#include <cmath>
#include <stdexcept>

namespace curvlab {

WeightedOperator::WeightedOperator(const FiniteSpace& space, const Field& rho)
    : space_(space), rho_(rho) {
  const int n = space.n();
  if (rho.size() != n) throw std::invalid_argument("weight size does not match the space");
  for (int x = 0; x < n; ++x)
    if (!(rho[x] >= 0) || !std::isfinite(rho[x]))
      throw std::invalid_argument("weight must be finite and nonnegative");

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  std::vector<int> parent(n);
  for (int x = 0; x < n; ++x) parent[x] = x;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : space.edges()) {
    const double c = e.w * 0.5 * (rho[e.x] + rho[e.y]);
    if (c <= 0) continue;
    trips.emplace_back(e.x, e.y, -c);
    trips.emplace_back(e.y, e.x, -c);
    diag[e.x] += c;
    diag[e.y] += c;
    parent[find(e.x)] = find(e.y);
  }
  for (int x = 0; x < n; ++x) trips.emplace_back(x, x, diag[x]);
  stiff_.resize(n, n);
  stiff_.setFromTriplets(trips.begin(), trips.end());
  stiff_.makeCompressed();

  comp_.assign(n, -1);
  std::vector<int> label(n, -1);
  for (int x = 0; x < n; ++x) {
    const int r = find(x);
    if (label[r] < 0) label[r] = n_comp_++;
    comp_[x] = label[r];
  }
}

double WeightedOperator::energy(const Field& f, const Field& g) const {
  if (f.size() != rho_.size() || g.size() != rho_.size())
    throw std::invalid_argument("field size does not match the space");
  return f.dot(stiff_ * g);
}

std::vector<double> WeightedOperator::defects(const Field& l) const {
  std::vector<double> d(n_comp_, 0.0);
  for (int x = 0; x < space_.n(); ++x) d[comp_[x]] += l[x] * space_.measure()[x];
  return d;
}

Field WeightedOperator::project_compatible(const Field& l) const {
  std::vector<double> d = defects(l);
  std::vector<double> mass(n_comp_, 0.0);
  for (int x = 0; x < space_.n(); ++x) mass[comp_[x]] += space_.measure()[x];
  Field out = l;
  for (int x = 0; x < space_.n(); ++x) out[x] -= d[comp_[x]] / mass[comp_[x]];
  return out;
}

bool WeightedOperator::compatible(const Field& l) const {
  if (l.size() != rho_.size()) throw std::invalid_argument("functional size does not match the space");
  std::vector<double> d = defects(l);
  std::vector<double> scale(n_comp_, 0.0);
  for (int x = 0; x < space_.n(); ++x) scale[comp_[x]] += std::abs(l[x]) * space_.measure()[x];
  for (int c = 0; c < n_comp_; ++c)
    if (std::abs(d[c]) > 1e-9 * scale[c] + 1e-300) return false;
  return true;
}

Field WeightedOperator::solve(const Field& l, SolveInfo* info) const {
  if (!compatible(l))
    throw std::domain_error("functional is not in finiteness domain (nonzero mean on a component)");
  const int n = space_.n();
  const Eigen::VectorXd& m = space_.measure();

  std::vector<int> csize(n_comp_, 0);
  for (int x = 0; x < n; ++x) ++csize[comp_[x]];
  // Euclidean projection onto the complement of the kernel.
  auto project = [&](Eigen::VectorXd& v) {
    std::vector<double> s(n_comp_, 0.0);
    for (int x = 0; x < n; ++x) s[comp_[x]] += v[x];
    for (int x = 0; x < n; ++x) v[x] -= s[comp_[x]] / csize[comp_[x]];
  };

  Eigen::VectorXd b = l.cwiseProduct(m);
  project(b);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  SolveInfo local;
  if (bnorm > 0) {
    const Eigen::VectorXd d = stiff_.diagonal();
    Eigen::VectorXd dinv(n);
    for (int i = 0; i < n; ++i) dinv[i] = d[i] > 0 ? 1.0 / d[i] : 0.0;
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = dinv.cwiseProduct(r);
    project(z);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    const int max_iter = 20 * n + 100;
    double rel = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
      const Eigen::VectorXd q = stiff_ * p;
      const double pq = p.dot(q);
      if (!(pq > 0)) break;
      const double alpha = rz / pq;
      x += alpha * p;
      r -= alpha * q;
      rel = r.norm() / bnorm;
      if (rel <= 1e-12) {
        ++it;
        break;
      }
      z = dinv.cwiseProduct(r);
      project(z);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    local.iterations = it;
    local.relative_residual = rel;
    if (rel > 1e-8) throw NumericalError("weighted Poisson solve did not converge");
  }

  std::vector<double> wsum(n_comp_, 0.0), rmass(n_comp_, 0.0), msum(n_comp_, 0.0), plain(n_comp_, 0.0);
  for (int i = 0; i < n; ++i) {
    const int c = comp_[i];
    wsum[c] += x[i] * rho_[i] * m[i];
    rmass[c] += rho_[i] * m[i];
    plain[c] += x[i] * m[i];
    msum[c] += m[i];
  }
  for (int i = 0; i < n; ++i) {
    const int c = comp_[i];
    x[i] -= rmass[c] > 0 ? wsum[c] / rmass[c] : plain[c] / msum[c];
  }
  if (info) *info = local;
  return x;
}

double WeightedOperator::dual_energy(const Field& l) const {
  const Field phi = solve(l);
  return energy(phi, phi);
}

Field weighted_poisson(const FiniteSpace& space, const DensityField& rho, const Field& l) {
  return WeightedOperator(space, rho.values()).solve(l);
}

double dual_energy(const FiniteSpace& space, const Field& rho, const Field& l) {
  return WeightedOperator(space, rho).dual_energy(l);
}

}  // namespace curvlab
