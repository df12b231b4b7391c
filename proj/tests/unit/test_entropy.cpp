#include <doctest.h>

#include "curvlab/entropy.hpp"

#include <cmath>

using namespace curvlab;

TEST_CASE("power family closed forms") {
  const auto m = EntropyModel::power(2.0);
  CHECK(m.P(4.0) == doctest::Approx(2.0));
  CHECK(m.U(4.0) == doctest::Approx(4.0));
  CHECK(m.U(1.0) == 0.0);
  CHECK(m.Q(4.0) == doctest::Approx(0.5));
  CHECK(m.R(4.0) == doctest::Approx(-0.5 * m.P(4.0)));
  CHECK(std::isinf(m.Z(1.0)));
  const auto m3 = EntropyModel::power(3.0);
  // Z(r) = (2/3) r^{1/6} / (1/6)
  CHECK(m3.Z(2.0) == doctest::Approx(4.0 * std::pow(2.0, 1.0 / 6.0)));
  CHECK(m3.P_inverse(m3.P(0.37)) == doctest::Approx(0.37));
  CHECK_THROWS_AS(EntropyModel::power(1.0), std::invalid_argument);
}

TEST_CASE("linear family") {
  const auto m = EntropyModel::linear();
  for (double r : {0.1, 1.0, 3.0}) {
    CHECK(m.U(r) == doctest::Approx(r * std::log(r)));
    CHECK(m.Q(r) == 1.0);
    CHECK(m.R(r) == 0.0);
    CHECK(m.Z(r) == doctest::Approx(2 * std::sqrt(r)));
  }
  CHECK(m.U(0.0) == 0.0);
  CHECK(m.regularity() == 1.0);
  CHECK(m.lambda(2.0) == 2.0);
  CHECK(m.lambda(-1.0) == -1.0);
}

TEST_CASE("quadrature entropy for a custom pressure") {
  // P(r) = r + r²/2 gives U(r) = r log r + r(r−1)/2.
  const auto m = EntropyModel::custom([](double r) { return r + 0.5 * r * r; },
                                      [](double r) { return 1 + r; });
  for (double r : {1e-6, 0.3, 1.0, 2.0, 7.5}) {
    const double exact = r * std::log(r) + 0.5 * r * (r - 1);
    CHECK(std::abs(m.U(r) - exact) <= 1e-11 * std::max(1.0, std::abs(exact)));
  }
  // Z(r) = 2√r + (2/3) r^{3/2}
  CHECK(m.Z(4.0) == doctest::Approx(4.0 + 16.0 / 3.0).epsilon(1e-12));
  CHECK(m.P_inverse(m.P(1.7)) == doctest::Approx(1.7).epsilon(1e-13));
  CHECK(m.U(1.0) == 0.0);
}

TEST_CASE("regularized pressures") {
  const auto lin = EntropyModel::linear().regularized(0.1, 5.0);
  for (double r : {0.0, 0.5, 3.0, 9.0}) CHECK(lin.P(r) == doctest::Approx(r));

  const double eps = 0.01, M = 5.0;
  const auto base = EntropyModel::power(2.0);
  const auto reg = regularize_pressure(base, eps, M);
  CHECK(reg.P(0.0) == 0.0);
  CHECK(reg.dP(7.0) == reg.dP(M));
  CHECK(reg.dP(100.0) == base.dP(M + eps));
  CHECK(reg.regular());
  CHECK(reg.regularity() == doctest::Approx(std::min(base.dP(M + eps), 1.0 / base.dP(eps))));
  CHECK_THROWS_AS(base.regularized(1.0, 0.5), std::invalid_argument);

  // Sandwich −P/N + (1−1/N)ε^{1−1/N} ≥ R ≥ −P/N on {0, 0.01, ..., 10}; M large so no kink.
  const auto wide = base.regularized(eps, 1e6);
  const double N = 2.0;
  for (int i = 0; i <= 1000; ++i) {
    const double r = 0.01 * i;
    const double R = wide.R(r), P = wide.P(r);
    CHECK(R >= -P / N - 1e-14);
    CHECK(R <= -P / N + (1 - 1 / N) * std::pow(eps, 1 - 1 / N) + 1e-14);
    // Identity R = −P/N + ε(P′(0) − P′(r))
    CHECK(std::abs(R - (-P / N + eps * (wide.dP(0.0) - wide.dP(r)))) <= 1e-12);
  }
  // Inverse round trip across the kink.
  for (double r : {0.0, 1e-4, 0.3, 4.9, 5.0, 6.0, 50.0})
    CHECK(std::abs(reg.P_inverse(reg.P(r)) - r) <= 1e-12 * std::max(1.0, r));
  // Entropy bounds a|r log r| ≤ |U| ≤ |r log r|/a
  const double a = reg.regularity();
  for (double r : {0.05, 0.5, 2.0, 8.0}) {
    const double rl = std::abs(r * std::log(r));
    CHECK(std::abs(reg.U(r)) >= a * rl - 1e-12);
    CHECK(std::abs(reg.U(r)) <= rl / a + 1e-12);
    CHECK(reg.Z(r) >= 2 * a * std::sqrt(r) - 1e-12);
    CHECK(reg.Z(r) <= 2 / a * std::sqrt(r) + 1e-12);
  }
  CHECK(reg.q_inf() == doctest::Approx(base.dP(M + eps)));
  CHECK(reg.q_sup() == doctest::Approx(base.dP(eps)));
}

TEST_CASE("regularized entropy U_eps") {
  const auto m = EntropyModel::power(3.0).regularized(0.05, 10.0);
  const double eps = 0.05;
  CHECK(m.U_eps(0.0, eps) == 0.0);
  const double h = 1e-3;
  for (double r : {0.2, 1.0, 3.0}) {
    const double fd = (m.U_eps(r + h, eps) - 2 * m.U_eps(r, eps) + m.U_eps(r - h, eps)) / (h * h);
    CHECK(fd == doctest::Approx(m.dP(r) / (r + eps)).epsilon(1e-5));
  }
}

TEST_CASE("mccann class") {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(0.05 * i);
  const auto own = mccann_check(EntropyModel::power(2.0), 2.0, grid);
  CHECK(own.holds);
  CHECK(std::abs(own.margin) <= 1e-15);
  const auto lin = mccann_check(EntropyModel::linear(), 3.0, grid);
  CHECK(lin.holds);
  CHECK(lin.margin == doctest::Approx(0.05 / 3.0));
  // R + P/N = P(1/N − 1/2) at r = 1.
  const auto wider = mccann_check(EntropyModel::power(2.0), 1.5, {1.0});
  CHECK(wider.holds);
  CHECK(wider.margin == doctest::Approx(1.0 / 6.0));
  const auto narrower = mccann_check(EntropyModel::power(2.0), 3.0, {1.0});
  CHECK_FALSE(narrower.holds);
  CHECK(narrower.margin == doctest::Approx(-1.0 / 6.0));
  CHECK(narrower.witness == std::vector<double>{1.0});
}

TEST_CASE("sigma coefficients") {
  CHECK(sigma_coeff(0.0, 0.3, 2.0).value == 0.3);
  CHECK(sigma_coeff(M_PI * M_PI / 4, 0.5, 1.0).value == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(sigma_coeff(-1.0, 1.0, 1.0).value == doctest::Approx(1.0));
  CHECK(sigma_coeff(M_PI * M_PI, 0.5, 1.0).infinite);
  CHECK(sigma_coeff(M_PI * M_PI - 1e-13, 0.5, 1.0).infinite);
  CHECK_FALSE(sigma_coeff(M_PI * M_PI - 1e-6, 0.5, 1.0).infinite);
  // Continuity in κ at 0 from both sides.
  CHECK(sigma_coeff(1e-9, 0.3, 1.0).value == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(sigma_coeff(-1e-9, 0.3, 1.0).value == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(std::abs(sigma_coeff(2e-6, 0.3, 1.0).value - sigma_coeff(0.5e-6, 0.3, 2.0).value) <= 1e-15);
  CHECK_THROWS(sigma_coeff(1.0, 1.5, 1.0));
}

TEST_CASE("sigma second difference is fourth order") {
  const double kd2 = 2.0;
  auto sig = [&](double t) { return sigma_coeff(kd2, t, 1.0).value; };
  std::vector<double> hs{1e-2, 5e-3, 2.5e-3}, res;
  for (double h : hs)
    res.push_back(std::abs(sig(0.5 + h) - 2 * sig(0.5) + sig(0.5 - h) + kd2 * h * h * sig(0.5)));
  const double slope1 = std::log(res[0] / res[1]) / std::log(2.0);
  const double slope2 = std::log(res[1] / res[2]) / std::log(2.0);
  CHECK(slope1 >= 3.5);
  CHECK(slope2 >= 3.5);
}

TEST_CASE("green function") {
  CHECK(green_weight(0.25, 0.5) == 0.125);
  for (double t : {0.0, 0.3, 1.0}) {
    CHECK(green_weight(0.0, t) == 0.0);
    CHECK(green_weight(1.0, t) == 0.0);
  }
  CHECK_THROWS_AS(green_weight(1.2, 0.5), std::out_of_range);
  // Trapezoid with 10⁴ nodes against t(1−t)/2.
  const int n = 10000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    s += w * green_weight(static_cast<double>(i) / (n - 1), 0.5);
  }
  s /= (n - 1);
  CHECK(std::abs(s - 0.125) <= 1e-8);
}

TEST_CASE("weighted convexity check") {
  const auto grid = uniform_grid(41);
  std::vector<double> u(grid.size()), f(grid.size(), 2.0), z(grid.size(), 0.0), lin(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    u[i] = grid[i] * grid[i];
    lin[i] = grid[i];
  }
  const auto quad = weighted_convexity_check(u, f, grid);
  CHECK(quad.holds);
  CHECK(std::abs(quad.margin) <= 1e-8);
  const auto aff = weighted_convexity_check(lin, z, grid);
  CHECK(aff.holds);
  CHECK(std::abs(aff.margin) <= 1e-12);
  for (auto& v : u) v = -v;
  const auto bad = weighted_convexity_check(u, f, grid);
  CHECK_FALSE(bad.holds);
  CHECK(bad.margin == doctest::Approx(-0.5));
  REQUIRE(bad.witness.size() == 3);
  CHECK(bad.witness[0] == 0.0);
  CHECK(bad.witness[1] == 1.0);
  CHECK(bad.witness[2] == doctest::Approx(0.5));
  CHECK_THROWS(weighted_convexity_check({0, 1}, {0, 0}, {0, 1}));
}

TEST_CASE("sigma concavity check") {
  const auto grid = uniform_grid(33);
  std::vector<double> s(grid.size()), one(grid.size(), 1.0), q(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s[i] = std::sin(M_PI * grid[i]);
    q[i] = grid[i] * (1 - grid[i]);
  }
  const auto rs = sigma_concavity_check(s, M_PI * M_PI, grid);
  CHECK(rs.holds);
  CHECK(std::abs(rs.margin) <= 1e-10);
  const auto r1 = sigma_concavity_check(one, 0.0, grid);
  CHECK(r1.holds);
  CHECK(std::abs(r1.margin) <= 1e-15);
  CHECK(sigma_concavity_check(q, 0.0, grid).holds);
  std::vector<double> convex(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) convex[i] = grid[i] * grid[i];
  CHECK_FALSE(sigma_concavity_check(convex, 0.0, grid).holds);
}
