#include <doctest.h>

#include "curvlab/linearized.hpp"
#include "helpers.hpp"

#include <cmath>

using namespace curvlab;

namespace {

EntropyModel porous() { return EntropyModel::power(2.0).regularized(0.01, 10.0); }

DiffusionTrajectory linear_s2(double T, int n) {
  const auto s = two_point_space();
  return evolve(s, EntropyModel::linear(), DensityField(s, Eigen::Vector2d(0.8, 0.2)), T, n);
}

}  // namespace

TEST_CASE("backward solve against the matrix exponential") {
  const auto traj = linear_s2(1.0, 4096);
  const auto bwd = backward_solve(traj, Eigen::Vector2d(0, 1));
  for (int k : {0, 1024, 2048, 4096}) {
    const double s = 1.0 - traj.times[k];
    CHECK(bwd.fields[k][0] == doctest::Approx(0.5 * (1 - std::exp(-2 * s))).epsilon(1e-3));
    CHECK(bwd.fields[k][1] == doctest::Approx(0.5 * (1 + std::exp(-2 * s))).epsilon(1e-3));
  }
}

TEST_CASE("backward solve: constants and maximum principle") {
  std::mt19937_64 rng(8);
  const auto s = erdos_renyi(9, 0.4, 77, true);
  const auto traj = evolve(s, porous(), DensityField(s, testing::random_field(9, rng, 0.1, 2.0)), 0.5, 50);
  const auto flat = backward_solve(traj, Field::Constant(9, 1.5));
  for (const auto& f : flat.fields) CHECK((f.array() - 1.5).abs().maxCoeff() <= 1e-13);
  const Field phiT = testing::random_field(9, rng);
  const auto bwd = backward_solve(traj, phiT);
  double mx = 0.0;
  for (const auto& f : bwd.fields) mx = std::max(mx, f.lpNorm<Eigen::Infinity>());
  CHECK(mx <= phiT.lpNorm<Eigen::Infinity>() + 1e-14);
  CHECK(mx >= phiT.lpNorm<Eigen::Infinity>());
  CHECK_THROWS_AS(backward_solve(traj, phiT, std::vector<Field>(3, Field::Zero(9))), std::invalid_argument);
}

TEST_CASE("forward solve against the matrix exponential") {
  const auto traj = linear_s2(1.0, 4096);
  const auto s = traj.space;
  const Field w0 = Eigen::Vector2d(1, -0.5);
  const auto fwd = forward_linearized_solve(traj, w0);
  const Field exact = heat_flow(s, w0, 1.0);
  CHECK((fwd.fields.back() - exact).lpNorm<Eigen::Infinity>() <= 1e-3);

  // w₀ = Δζ̄ gives w_t = Δζ_t with ζ_t the heat flow of ζ̄.
  const Field zeta = Eigen::Vector2d(0.3, 1.0);
  const auto fz = forward_linearized_solve(traj, laplacian(s, zeta));
  const Field target = laplacian(s, heat_flow(s, zeta, 1.0));
  CHECK((fz.fields.back() - target).lpNorm<Eigen::Infinity>() <= 1e-3);
}

TEST_CASE("forward solve conserves mass") {
  std::mt19937_64 rng(12);
  const auto s = circle_grid(16);
  const auto traj = evolve(s, porous(), DensityField(s, testing::circle_profile(s, 0.6)), 0.1, 40);
  Field w0 = testing::random_field(16, rng);
  const double mass = w0.dot(s.measure());
  const auto fwd = forward_linearized_solve(traj, w0);
  for (const auto& w : fwd.fields) CHECK(std::abs(w.dot(s.measure()) - mass) <= 1e-13);
  w0.array() -= mass / s.total_mass();
  const auto zero = forward_linearized_solve(traj, w0);
  for (const auto& w : zero.fields) CHECK(std::abs(w.dot(s.measure())) <= 1e-13);
}

TEST_CASE("pairing is conserved") {
  std::mt19937_64 rng(31);
  const auto s = erdos_renyi(6, 0.5, 5, true);
  const auto traj = evolve(s, porous(), DensityField(s, testing::random_field(6, rng, 0.0, 2.0)), 1.0, 200);
  const auto fwd = forward_linearized_solve(traj, testing::random_field(6, rng));
  const auto bwd = backward_solve(traj, testing::random_field(6, rng));
  const auto rep = pairing_check(s, fwd, bwd);
  CHECK(rep.holds);
  CHECK(-rep.margin <= 1e-12);

  const auto ones = pairing_check(s, forward_linearized_solve(traj, Field::Ones(6)),
                                  backward_solve(traj, Field::Ones(6)));
  CHECK(ones.diagnostics.at("pairing") == doctest::Approx(s.total_mass()));
  CHECK(ones.holds);

  // Bookkeeping with w₀ = Δζ̄: ⟨w_0, φ_0⟩ = −E(ζ̄, φ_0).
  const Field zeta = testing::random_field(6, rng);
  const auto fz = forward_linearized_solve(traj, laplacian(s, zeta));
  const auto rz = pairing_check(s, fz, bwd);
  CHECK(rz.holds);
  CHECK(rz.diagnostics.at("pairing") == doctest::Approx(-dirichlet_energy(s, zeta, bwd.fields[0])).epsilon(1e-12));

  auto shorter = evolve(s, porous(), DensityField(s, traj.states[0]), 1.0, 10);
  CHECK_THROWS_AS(pairing_check(s, fwd, backward_solve(shorter, Field::Ones(6))), std::invalid_argument);
}

TEST_CASE("forward step is the m-adjoint of the backward step") {
  std::mt19937_64 rng(2);
  const auto s = erdos_renyi(5, 0.6, 3, true);
  const auto traj = evolve(s, porous(), DensityField(s, testing::random_field(5, rng, 0.2, 1.5)), 0.3, 1);
  Eigen::MatrixXd F(5, 5), B(5, 5);
  for (int j = 0; j < 5; ++j) {
    const Field e = Field::Unit(5, j);
    F.col(j) = forward_linearized_solve(traj, e).fields[1];
    B.col(j) = backward_solve(traj, e).fields[0];
  }
  const Eigen::MatrixXd M = s.measure().asDiagonal();
  const Eigen::MatrixXd adj = M.inverse() * B.transpose() * M;
  CHECK((F - adj).cwiseAbs().maxCoeff() <= 1e-13);
  // Independent construction of the backward matrix.
  const Field a = interval_coefficients(traj)[0];
  const Eigen::MatrixXd L = laplacian_matrix(s);
  const Eigen::MatrixXd Bref = (Eigen::MatrixXd::Identity(5, 5) - 0.3 * a.asDiagonal() * L).inverse();
  CHECK((B - Bref).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("energy identity residual is first order") {
  const auto s = circle_grid(16);
  const Field r0 = testing::circle_profile(s, 0.5);
  Field phiT(16);
  for (int i = 0; i < 16; ++i) phiT[i] = std::cos(2 * M_PI * i / 16.0);
  std::vector<double> res;
  for (int n : {50, 100, 200}) {
    const auto traj = evolve(s, porous(), DensityField(s, r0), 0.02, n);
    const auto bwd = backward_solve(traj, phiT);
    // The implicit scheme leaves exactly −½ΣE(φ_{k+1} − φ_k).
    double defect = 0.0;
    for (int k = 0; k < n; ++k) defect -= 0.5 * dirichlet_energy(s, bwd.fields[k + 1] - bwd.fields[k]);
    CHECK(std::abs(bwd.energy_residual[0] - defect) <= 1e-12 * std::max(1.0, std::abs(defect)));
    res.push_back(std::abs(bwd.energy_residual[0]));
  }
  // Ratios approach 1/2 from above.
  const double q1 = res[1] / res[0], q2 = res[2] / res[1];
  CHECK(q1 <= 0.51);
  CHECK(q2 <= 0.51);
  CHECK(std::abs(q2 - 0.5) < std::abs(q1 - 0.5));
}

TEST_CASE("time derivative satisfies the forward update up to O(tau)") {
  const auto s = circle_grid(16);
  const Field r0 = testing::circle_profile(s, 0.5);
  std::vector<double> res;
  for (int n : {20, 40, 80}) res.push_back(time_derivative_residual(evolve(s, porous(), DensityField(s, r0), 0.02, n)));
  CHECK(res[1] < res[0]);
  CHECK(res[2] < res[1]);
}

TEST_CASE("perturbation derivative") {
  const auto s = circle_grid(8);
  const DensityField rho(s, testing::circle_profile(s, 0.5));
  Field w(8);
  for (int i = 0; i < 8; ++i) w[i] = std::cos(2 * M_PI * i / 8.0);
  const auto zero = perturbation_derivative_check(s, porous(), rho, Field::Zero(8), {1e-2, 1e-3}, 0.05, 64);
  CHECK(zero.holds);
  for (double e : zero.residuals) CHECK(e == 0.0);
  const auto lin = perturbation_derivative_check(s, EntropyModel::linear(), rho, w, {1e-2, 1e-3, 1e-4}, 0.05, 256);
  CHECK(lin.holds);
  for (double e : lin.residuals) CHECK(e <= 1e-9);
  const auto nl = perturbation_derivative_check(s, porous(), rho, w, {1e-2, 1e-3, 1e-4}, 0.05, 4096);
  CHECK(nl.holds);
  CHECK(nl.margin > 0);
  CHECK_THROWS_AS(perturbation_derivative_check(s, porous(), rho, w, {10.0}, 0.05, 4), std::invalid_argument);
}
