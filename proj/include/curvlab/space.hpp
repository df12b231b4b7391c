#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace curvlab {

using Field = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class GridKind { none, path, circle };

struct Edge {
  int x;
  int y;
  double w;
};

struct Neighbor {
  int y;
  double w;
};

/// Size cap applied to every FiniteSpace; larger inputs are rejected.
inline constexpr std::size_t kMaxPoints = 4096;

/// Finite metric measure space carrying a Dirichlet form given by edge conductances.
///
/// Immutable handle: copies share the same validated data.
class FiniteSpace {
 public:
  struct Options {
    GridKind grid = GridKind::none;
    double spacing = 0.0;
    double length = 0.0;
    bool metric_filled = false;
  };

  FiniteSpace(Eigen::VectorXd m, Eigen::MatrixXd d, Eigen::MatrixXd w);
  FiniteSpace(Eigen::VectorXd m, Eigen::MatrixXd d, Eigen::MatrixXd w, Options opts);

  std::size_t size() const { return impl_->m.size(); }
  int n() const { return static_cast<int>(impl_->m.size()); }
  const Eigen::VectorXd& measure() const { return impl_->m; }
  const Eigen::MatrixXd& metric() const { return impl_->d; }
  const Eigen::MatrixXd& conductance() const { return impl_->w; }
  const std::vector<Edge>& edges() const { return impl_->edges; }
  const std::vector<Neighbor>& neighbors(int x) const { return impl_->adj[x]; }

  /// Weighted graph Laplacian in stiffness form: K = W - diag(W 1), so Δ = M⁻¹K.
  const SparseMatrix& stiffness() const { return impl_->stiffness; }

  bool connected() const { return impl_->n_components == 1; }
  int component_count() const { return impl_->n_components; }
  /// Component label of each point in the w-graph.
  const std::vector<int>& components() const { return impl_->component; }

  GridKind grid() const { return impl_->opts.grid; }
  double spacing() const { return impl_->opts.spacing; }
  double length() const { return impl_->opts.length; }
  bool metric_filled() const { return impl_->opts.metric_filled; }
  double total_mass() const { return impl_->m.sum(); }

 private:
  struct Impl {
    Eigen::VectorXd m;
    Eigen::MatrixXd d;
    Eigen::MatrixXd w;
    Options opts;
    std::vector<Edge> edges;
    std::vector<std::vector<Neighbor>> adj;
    SparseMatrix stiffness;
    std::vector<int> component;
    int n_components = 0;
  };
  std::shared_ptr<const Impl> impl_;
};

/// Nonnegative function on the space.
class DensityField {
 public:
  DensityField(const FiniteSpace& space, Field values);

  const Field& values() const { return values_; }
  double operator()(int x) const { return values_[x]; }
  double mass() const { return mass_; }
  bool is_probability() const;

 private:
  Field values_;
  double mass_;
};

/// Rescales a nonnegative field to unit mass.
DensityField normalized(const FiniteSpace& space, const Field& values);

enum class SlopeKind { full, descending };

Field gamma(const FiniteSpace& space, const Field& f, const Field& g);
Field gamma(const FiniteSpace& space, const Field& f);
double dirichlet_energy(const FiniteSpace& space, const Field& f, const Field& g);
double dirichlet_energy(const FiniteSpace& space, const Field& f);
Field laplacian(const FiniteSpace& space, const Field& f);
/// ∫ f g dm
double integrate(const FiniteSpace& space, const Field& f, const Field& g);
double integrate(const FiniteSpace& space, const Field& f);

Field heat_flow(const FiniteSpace& space, const Field& f, double t);
Field hopf_lax(const FiniteSpace& space, const Field& f, double t);
Field slope(const FiniteSpace& space, const Field& f, SlopeKind kind);

/// Default inequality tolerance 10(h + τ), with h the grid spacing (0 off grids).
double resolution_tolerance(const FiniteSpace& space, double tau);

/// Dense matrix of Δ.
Eigen::MatrixXd laplacian_matrix(const FiniteSpace& space);

// Generators.
FiniteSpace two_point_space();
FiniteSpace path_grid(int n, double length = 1.0);
FiniteSpace circle_grid(int n, double length = 1.0);
FiniteSpace complete_graph(int n);
/// G(n,p) with the given seed; random_weights draws m and w uniformly from [0.5, 1.5].
/// When connect is set, components are chained by extra unit edges.
FiniteSpace erdos_renyi(int n, double p, std::uint64_t seed, bool random_weights = false,
                        bool connect = true);
/// Builds a space from measure and conductances; the metric is the shortest-path
/// distance with edge length 1/√w (pairs in different components get the largest
/// finite distance).
FiniteSpace space_from_conductances(Eigen::VectorXd m, Eigen::MatrixXd w);
Eigen::MatrixXd shortest_path_metric(const Eigen::MatrixXd& w);

}  // namespace curvlab
