#pragma once

#include "curvlab/report.hpp"
#include "curvlab/space.hpp"

#include <vector>

namespace curvlab {

struct SolveInfo {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Weighted energy E_ρ(f,g) = ∫ρΓ(f,g)dm, assembled on edges with weight w(x,y)(ρ(x)+ρ(y))/2.
///
/// Its kernel consists of the functions constant on each component of the graph of
/// edges carrying positive weighted conductance.
class WeightedOperator {
 public:
  WeightedOperator(const FiniteSpace& space, const Field& rho);

  const FiniteSpace& space() const { return space_; }
  const Field& weight() const { return rho_; }
  const SparseMatrix& stiffness() const { return stiff_; }
  const std::vector<int>& components() const { return comp_; }
  int component_count() const { return n_comp_; }

  double energy(const Field& f, const Field& g) const;
  double energy(const Field& f) const { return energy(f, f); }
  /// Σ_{x∈C} ℓ(x)m(x) for every component C.
  std::vector<double> defects(const Field& l) const;
  /// Removes the per-component mean (with respect to m) of ℓ.
  Field project_compatible(const Field& l) const;
  bool compatible(const Field& l) const;

  /// φ with E_ρ(φ,ψ) = ⟨ℓ,ψ⟩_m for all ψ, normalized to zero ρm-mean on each component.
  /// Throws std::domain_error when ℓ does not annihilate the kernel.
  Field solve(const Field& l, SolveInfo* info = nullptr) const;
  /// E*_ρ(ℓ,ℓ) = E_ρ(φ,φ).
  double dual_energy(const Field& l) const;

 private:
  FiniteSpace space_;
  Field rho_;
  SparseMatrix stiff_;
  std::vector<int> comp_;
  int n_comp_ = 0;
};

Field weighted_poisson(const FiniteSpace& space, const DensityField& rho, const Field& l);
double dual_energy(const FiniteSpace& space, const Field& rho, const Field& l);

}  // namespace curvlab
