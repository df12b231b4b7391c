#include <doctest.h>

#include "curvlab/diffusion.hpp"
#include "curvlab/transport.hpp"
#include "curvlab/weighted.hpp"
#include "helpers.hpp"

#include <cmath>

using namespace curvlab;

namespace {

DensityField random_probability(const FiniteSpace& s, std::mt19937_64& rng, double zero_fraction = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Field r(s.n());
  for (int x = 0; x < s.n(); ++x) r[x] = u(rng) < zero_fraction ? 0.0 : u(rng);
  if (r.maxCoeff() == 0.0) r[0] = 1.0;
  return normalized(s, r);
}

DensityField bump(const FiniteSpace& s, double centre, double width) {
  const double L = s.length(), h = s.spacing();
  Field r(s.n());
  for (int i = 0; i < s.n(); ++i) {
    double d = std::abs(i * h - centre);
    if (s.grid() == GridKind::circle) d = std::min(d, L - d);
    r[i] = 0.05 + std::exp(-0.5 * d * d / (width * width));
  }
  return normalized(s, r);
}

FiniteSpace three_point_line() {
  Eigen::MatrixXd d(3, 3), w = Eigen::MatrixXd::Zero(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  w(0, 1) = w(1, 0) = w(1, 2) = w(2, 1) = 1.0;
  return FiniteSpace(Eigen::VectorXd::Ones(3), d, w);
}

void check_coupling(const FiniteSpace& s, const DensityField& a, const DensityField& b, const W2Result& r) {
  const Eigen::VectorXd& m = s.measure();
  CHECK((r.coupling.plan.rowwise().sum() - a.values().cwiseProduct(m)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((r.coupling.plan.colwise().sum().transpose() - b.values().cwiseProduct(m)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(r.coupling.plan.minCoeff() >= 0.0);
  CHECK(r.coupling.duality_gap <= 1e-12);
  CHECK(r.coupling.min_reduced_cost >= -1e-12);
}

}  // namespace

TEST_CASE("w2 small examples") {
  const auto s2 = two_point_space();
  const DensityField a(s2, Eigen::Vector2d(1, 0)), b(s2, Eigen::Vector2d(0, 1));
  const auto r = w2_distance(s2, a, b);
  CHECK(r.distance == doctest::Approx(1.0));
  check_coupling(s2, a, b, r);
  const auto same = w2_distance(s2, a, a);
  CHECK(same.distance == 0.0);
  CHECK(same.coupling.plan(0, 0) == 1.0);

  const auto line = three_point_line();
  const DensityField split(line, Eigen::Vector3d(0.5, 0, 0.5)), mid(line, Eigen::Vector3d(0, 1, 0));
  const auto lr = w2_distance(line, split, mid);
  CHECK(lr.coupling.cost == doctest::Approx(1.0));
  check_coupling(line, split, mid, lr);
  CHECK_THROWS_AS(w2_distance(s2, DensityField(s2, Eigen::Vector2d(1, 1)), a), std::invalid_argument);
}

TEST_CASE("w2 metric axioms on random graphs") {
  std::mt19937_64 rng(123);
  for (int k = 0; k < 20; ++k) {
    const int n = 4 + k % 13;
    const auto s = erdos_renyi(n, 0.4, 500 + k, true);
    const auto a = random_probability(s, rng, 0.3), b = random_probability(s, rng, 0.3),
               c = random_probability(s, rng);
    const auto ab = w2_distance(s, a, b), ba = w2_distance(s, b, a);
    const double bc = w2_distance(s, b, c).distance, ac = w2_distance(s, a, c).distance;
    check_coupling(s, a, b, ab);
    CHECK(std::abs(ab.distance - ba.distance) <= 1e-12);
    CHECK(ac <= ab.distance + bc + 1e-12);
    CHECK(w2_distance(s, a, a).distance <= 1e-7);
  }
}

TEST_CASE("quantile coupling agrees with the LP on paths and circles") {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 10; ++k) {
    for (const auto& s : {path_grid(5 + k), circle_grid(5 + k), circle_grid(16, 2.0)}) {
      const auto a = random_probability(s, rng, 0.3), b = random_probability(s, rng, 0.3);
      const double lp = w2_distance(s, a, b).distance;
      CHECK(std::abs(w2_grid(s, a, b) - lp) <= 1e-10);
      CHECK(wasserstein2(s, a, b) == w2_grid(s, a, b));
      double mass = 0.0;
      for (const auto& p : quantile_coupling(s, a, b)) mass += p.mass;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(quantile_coupling(two_point_space(), DensityField(two_point_space(), Eigen::Vector2d(1, 0)),
                                    DensityField(two_point_space(), Eigen::Vector2d(0, 1))),
                  std::invalid_argument);
}

TEST_CASE("kantorovich dual bound") {
  const auto s2 = two_point_space();
  const DensityField a(s2, Eigen::Vector2d(1, 0)), b(s2, Eigen::Vector2d(0, 1));
  CHECK(kantorovich_dual_bound(s2, a, b, Field::Zero(2)) == 0.0);
  double best = -kInf;
  for (int k = 0; k <= 400; ++k) {
    const double c = -2.0 + 0.01 * k;
    best = std::max(best, kantorovich_dual_bound(s2, a, b, Eigen::Vector2d(0, -c)));
  }
  CHECK(best == doctest::Approx(0.5));
  CHECK(kantorovich_dual_bound(s2, a, a, Field::Zero(2)) == 0.0);

  std::mt19937_64 rng(77);
  for (int k = 0; k < 10; ++k) {
    const auto s = erdos_renyi(8, 0.5, 40 + k, true);
    const auto p = random_probability(s, rng), q = random_probability(s, rng);
    const double w = w2_distance(s, p, q).distance;
    CHECK(kantorovich_dual_bound(s, p, p, testing::random_field(8, rng)) <= 1e-12);
    for (int j = 0; j < 10; ++j)
      CHECK(kantorovich_dual_bound(s, p, q, 3.0 * testing::random_field(8, rng)) <= 0.5 * w * w + 1e-10);
  }
}

TEST_CASE("geodesic on grids") {
  const auto p = path_grid(11);
  Field d0 = Field::Zero(11), d1 = Field::Zero(11);
  d0[0] = 1.0 / p.measure()[0];
  d1[10] = 1.0 / p.measure()[10];
  const auto geo = geodesic_1d(p, DensityField(p, d0), DensityField(p, d1), 10);
  for (int k = 0; k <= 10; ++k) {
    const Field mass = geo.densities[k].cwiseProduct(p.measure());
    CHECK(mass[k] == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto flat = geodesic_1d(p, DensityField(p, d0), DensityField(p, d0), 4);
  for (const auto& f : flat.densities) CHECK((f - d0).cwiseAbs().maxCoeff() <= 1e-12);

  // Uniform on an arc and its translate.
  const auto c = circle_grid(64);
  const double h = c.spacing();
  Field u0 = Field::Zero(64), u1 = Field::Zero(64);
  for (int i = 0; i < 16; ++i) {
    u0[i] = 1.0;
    u1[i + 12] = 1.0;
  }
  const auto a = normalized(c, u0), b = normalized(c, u1);
  const auto arc = geodesic_1d(c, a, b, 2);
  const double ratio = w2_grid(c, a, DensityField(c, arc.densities[1])) / w2_grid(c, a, b);
  CHECK(ratio >= 0.5 - 2 * h);
  CHECK(ratio <= 0.5 + 2 * h);
  CHECK_THROWS_AS(geodesic_1d(two_point_space(), DensityField(two_point_space(), Eigen::Vector2d(1, 0)),
                              DensityField(two_point_space(), Eigen::Vector2d(0, 1)), 4),
                  std::invalid_argument);
}

TEST_CASE("constant-speed defect shrinks under refinement") {
  double prev = kInf;
  for (int n : {32, 64, 128}) {
    const auto s = path_grid(n);
    const double d = constant_speed_defect(geodesic_1d(s, bump(s, 0.25, 0.05), bump(s, 0.7, 0.1), 8));
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("curve velocity") {
  const auto c = circle_grid(16);
  const auto flat = curve_velocity(geodesic_1d(c, bump(c, 0.3, 0.1), bump(c, 0.3, 0.1), 4));
  for (const auto& v : flat.velocity2) CHECK(v.cwiseAbs().maxCoeff() <= 1e-20);
  CHECK(kinetic_action(flat) == 0.0);

  // Heat flow on S2 rescaled to unit time: E*(ℓ_s) against T²E*(Δρ_s).
  const auto s2 = two_point_space();
  const double T = 0.5;
  const int n = 400;
  const auto heat = evolve(s2, EntropyModel::linear(), DensityField(s2, Eigen::Vector2d(1.6, 0.4)), T, n);
  std::vector<double> times;
  std::vector<Field> dens;
  for (int k = 0; k <= n; ++k) {
    times.push_back(static_cast<double>(k) / n);
    dens.push_back(heat.states[k] / 2.0);
  }
  const auto curve = curve_velocity(make_curve(s2, times, dens));
  for (int k : {50, 200, 350}) {
    const Field& rho = curve.densities[k];
    const double from_pde = T * T * dual_energy(s2, rho, laplacian(s2, rho));
    const double from_curve = (rho.cwiseProduct(curve.velocity2[k])).dot(s2.measure());
    CHECK(from_curve == doctest::Approx(from_pde).epsilon(1e-3));
  }

  // Translating bump: Σv²ρm against the squared speed of the quantile construction.
  const auto c64 = circle_grid(64);
  const auto a = bump(c64, 0.3, 0.08), b = bump(c64, 0.5, 0.08);
  const auto geo = curve_velocity(geodesic_1d(c64, a, b, 16));
  const double speed2 = std::pow(w2_grid(c64, a, b), 2);
  for (int k = 1; k < 16; ++k) {
    const double e = geo.densities[k].cwiseProduct(geo.velocity2[k]).dot(c64.measure());
    CHECK(std::abs(e - speed2) <= 5 * c64.spacing());
  }
  CHECK(kinetic_action(geo) == doctest::Approx(speed2).epsilon(0.05));
}

TEST_CASE("weighted actions") {
  const auto c = circle_grid(8);
  const int J = 40;
  std::vector<double> times;
  std::vector<Field> dens;
  for (int k = 0; k <= J; ++k) {
    times.push_back(static_cast<double>(k) / J);
    dens.push_back(Field::Ones(8));
  }
  auto curve = make_curve(c, times, dens);
  curve.velocity2.assign(J + 1, Field::Constant(8, 3.0));
  const auto lin = EntropyModel::linear();
  for (double t : {0.25, 0.5, 0.75})
    CHECK(weighted_action(curve, lin, ActionWeight::green, t) == doctest::Approx(3.0 * t * (1 - t) / 2).epsilon(1e-12));
  CHECK(weighted_action(curve, lin, ActionWeight::constant) == doctest::Approx(3.0));
  CHECK(weighted_action(curve, lin, ActionWeight::omega) == doctest::Approx(1.5));
  CHECK_THROWS_AS(weighted_action(make_curve(c, times, dens), lin, ActionWeight::constant), std::invalid_argument);

  const auto c32 = circle_grid(32);
  const auto geo = curve_velocity(geodesic_1d(c32, bump(c32, 0.2, 0.1), bump(c32, 0.6, 0.05), 12));
  const auto porous = EntropyModel::power(2.0).regularized(0.01, 10.0);
  CHECK(std::abs(time_reversal_residual(geo, porous)) <= 1e-10);
  CHECK(std::abs(time_reversal_residual(geo, lin)) <= 1e-10);
  const auto rev = reverse_curve(geo);
  CHECK(weighted_action(rev, porous, ActionWeight::identity) ==
        doctest::Approx(weighted_action(geo, porous, ActionWeight::omega)).epsilon(1e-12));
}

TEST_CASE("cdstar convexity") {
  const auto c = circle_grid(64);
  const auto a = bump(c, 0.2, 0.06), b = bump(c, 0.45, 0.1);
  const auto still = cdstar_convexity_check(geodesic_1d(c, a, a, 4), 1.0, 3.0);
  CHECK(still.holds);
  CHECK(std::abs(still.margin) <= 1e-12);

  const auto geo = curve_velocity(geodesic_1d(c, a, b, 16));
  const auto flat = cdstar_convexity_check(geo, 0.0, kInf);
  CHECK(flat.holds);
  const auto plus = cdstar_convexity_check(geo, 0.5, 3.0), minus = cdstar_convexity_check(geo, -0.5, 3.0);
  const auto model = EntropyModel::power(3.0);
  for (int k = 0; k < geo.size(); ++k) {
    const double A = weighted_action(geo, model, ActionWeight::green, geo.times[k]);
    CHECK(minus.residuals[k] - plus.residuals[k] == doctest::Approx(2 * 0.5 * A).epsilon(1e-10));
  }
  // Distortion form at K = 0 coincides with the convexity form.
  const auto sig = cdstar_convexity_check(geo, 0.0, 3.0, true);
  CHECK(sig.diagnostics.at("sigma_margin") == doctest::Approx(sig.margin).epsilon(1e-9));
  CHECK_THROWS_AS(cdstar_convexity_check(geo, 0.0, kInf, true), std::invalid_argument);
}

TEST_CASE("evi") {
  const auto c = circle_grid(32);
  const auto lin = EntropyModel::linear();
  const auto uni = normalized(c, Field::Ones(32));
  const auto rest = evi_check(c, lin, uni, uni, 0.0, 0.1, 10);
  CHECK(rest.holds);
  for (double r : rest.residuals) CHECK(std::abs(r) <= 1e-12);
  const auto rep = evi_check(c, lin, bump(c, 0.3, 0.1), bump(c, 0.6, 0.1), 0.0, 0.05, 20);
  CHECK(rep.holds);
  CHECK_THROWS_AS(evi_check(two_point_space(), lin, DensityField(two_point_space(), Eigen::Vector2d(1, 1)),
                            DensityField(two_point_space(), Eigen::Vector2d(1, 1)), 0.0, 0.1, 2),
                  std::invalid_argument);
}

TEST_CASE("contraction") {
  const auto c = circle_grid(32);
  const auto lin = EntropyModel::linear();
  const auto a = bump(c, 0.3, 0.1), b = bump(c, 0.6, 0.05);
  const auto same = contraction_check(c, lin, a, a, 0.0, 0.05, 10);
  CHECK(same.holds);
  for (double r : same.residuals) CHECK(r == 0.0);
  const auto rep = contraction_check(c, lin, a, b, 0.0, 0.05, 20);
  CHECK(rep.holds);
  CHECK(rep.diagnostics.at("worst_ratio") <= 1.0 + 1e-12);
  const auto neg = contraction_check(c, lin, a, b, -1.0, 0.05, 20);
  CHECK(neg.holds);
  CHECK(neg.margin >= rep.margin);
  // General graph through the LP.
  std::mt19937_64 rng(2);
  const auto g = erdos_renyi(6, 0.6, 3, true);
  CHECK(contraction_check(g, lin, random_probability(g, rng), random_probability(g, rng), -10.0, 0.1, 5).holds);
}

TEST_CASE("action monotonicity") {
  const auto c = circle_grid(32);
  const auto lin = EntropyModel::linear();
  const auto a = bump(c, 0.3, 0.1), b = bump(c, 0.55, 0.08);
  const auto still = curve_action_monotonicity_check(geodesic_1d(c, a, a, 4), lin, 0.0, 0.02, 4);
  CHECK(still.holds);
  CHECK(std::abs(still.margin) <= 1e-14);
  const auto geo = geodesic_1d(c, a, b, 8);
  const auto rep = curve_action_monotonicity_check(geo, lin, 0.0, 0.02, 8);
  CHECK(rep.holds);
  CHECK(rep.diagnostics.at("final_action") <= rep.diagnostics.at("initial_action") * (1 + 1e-12));
  const auto taut = curve_action_monotonicity_check(geo, lin, 0.0, 0.0, 4, ActionFlow::scaled);
  CHECK(taut.residuals.size() == 1);
  CHECK(taut.margin == 0.0);
  const auto energy = curve_action_monotonicity_check(geo, lin, 0.0, 0.02, 8, ActionFlow::scaled);
  CHECK(energy.holds);
}
