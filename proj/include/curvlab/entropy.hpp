#pragma once

#include "curvlab/report.hpp"
#include "curvlab/space.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace curvlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EntropyFamily { linear, power, regularized, custom };

const char* to_string(EntropyFamily f);

using ScalarFn = std::function<double(double)>;

namespace detail {
struct Pressure;
}

/// Pressure P with its derived entropy calculus.
///
/// U(r) = r∫₁^r P(s)/s² ds, Q = P/r, R = rP′ − P, Z(r) = ∫₀^r P′(s)/√s ds.
/// P is extended to negative arguments as an odd function.
class EntropyModel {
 public:
  static EntropyModel linear();
  /// U_N(r) = N r (1 − r^{−1/N}), P_N(r) = r^{1−1/N}.
  static EntropyModel power(double N);
  /// User pressure with derivative; a is the declared regularity constant (0 if unknown).
  static EntropyModel custom(ScalarFn P, ScalarFn dP, double a = 0.0);

  /// P_ε(r) = P(r+ε) − P(ε), continued linearly above M with slope P′(M+ε).
  EntropyModel regularized(double eps, double M = kInf) const;

  EntropyFamily family() const;
  /// Dimension parameter: N for power families and their regularizations, ∞ otherwise.
  double N() const;
  double eps() const;
  double M() const;

  double P(double r) const;
  double dP(double r) const;
  double Q(double r) const;
  double R(double r) const;
  double U(double r) const;
  double Z(double r) const;
  double P_inverse(double z) const;
  /// r∫₁^r P/(s+ε)² ds + ε∫₀^r P/(s+ε)² ds, using this model's P.
  double U_eps(double r, double eps) const;

  /// Largest a with a ≤ P′ ≤ 1/a on [0,∞); 0 when no such a exists.
  double regularity() const;
  bool regular() const { return regularity() > 0; }
  double q_inf() const;
  double q_sup() const;
  /// Λ = inf_{r>0} K Q(r).
  double lambda(double K) const;

  std::string describe() const;

 private:
  explicit EntropyModel(std::shared_ptr<const detail::Pressure> p) : impl_(std::move(p)) {}
  std::shared_ptr<const detail::Pressure> impl_;
};

EntropyModel regularize_pressure(const EntropyModel& model, double eps, double M = kInf);

/// ∫ U(ρ) dm.
double entropy_functional(const FiniteSpace& space, const EntropyModel& model, const Field& rho);

struct SigmaCoefficient {
  double kappa = 0.0;
  double t = 0.0;
  double delta = 0.0;
  double value = 0.0;
  bool infinite = false;
};

SigmaCoefficient sigma_coeff(double kappa, double t, double delta);

/// g(t,s) = (1−t)s for s ≤ t and t(1−s) for s ≥ t.
double green_weight(double s, double t);

std::vector<double> uniform_grid(int n);

CheckReport mccann_check(const EntropyModel& model, double N, const std::vector<double>& r_grid,
                         double tol = 1e-12);
/// Tests u(r_t) ≤ (1−t)u(r₀) + t u(r₁) − (r₁−r₀)² ∫ f((1−s)r₀+s r₁) g(t,s) ds on all grid
/// triples; the witness is (r₀, r₁, t).
CheckReport weighted_convexity_check(const std::vector<double>& u, const std::vector<double>& f,
                                     const std::vector<double>& grid, double tol = 1e-8);
/// Tests u(r_t) ≥ σ^{(1−t)}u(r₀) + σ^{(t)}u(r₁) on all grid triples with κ(r₁−r₀)² < π².
CheckReport sigma_concavity_check(const std::vector<double>& u, double kappa,
                                  const std::vector<double>& grid, double tol = 1e-10);

}  // namespace curvlab
