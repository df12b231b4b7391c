import math
from pathlib import Path

import numpy as np
import pytest

import curvlab

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def test_two_point_curvature():
    assert curvlab.optimal_curvature(curvlab.two_point_space()) == pytest.approx(2.0, abs=1e-9)
    assert curvlab.be_check(curvlab.two_point_space(), 2.5).holds is False


def test_duality():
    s = curvlab.erdos_renyi(12, 0.4, 3, True)
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=12), rng.normal(size=12)
    e = curvlab.dirichlet_energy(s, f, g)
    assert -float(np.dot(curvlab.laplacian(s, f) * s.measure, g)) == pytest.approx(e, abs=1e-12)


def test_evolve_keeps_mass():
    s = curvlab.circle_grid(16)
    model = curvlab.EntropyModel.power(2.0).regularized(0.01, 10.0)
    rho0 = 1.0 + 0.5 * np.sin(2 * np.pi * np.arange(16) / 16)
    traj = curvlab.evolve(s, model, rho0, 0.1, 20)
    masses = [curvlab.integrate(s, r) for r in traj.states]
    assert max(masses) - min(masses) < 1e-12
    fwd = curvlab.forward_linearized_solve(traj, np.cos(np.arange(16)))
    bwd = curvlab.backward_solve(traj, np.sin(np.arange(16)))
    assert curvlab.pairing_check(s, fwd, bwd).holds


def test_transport_symmetry():
    s = curvlab.path_grid(8)
    a = np.linspace(1, 2, 8)
    b = a[::-1].copy()
    a, b = a / curvlab.integrate(s, a), b / curvlab.integrate(s, b)
    d = curvlab.w2_distance(s, a, b)
    assert d.distance == pytest.approx(curvlab.w2_distance(s, b, a).distance, abs=1e-12)
    assert d.plan.shape == (8, 8)


def test_odelab_contraction_sign():
    x0, x1 = np.array([0.3, -1.0]), np.array([1.2, 0.4])
    stable = curvlab.linear_system(-np.eye(2))
    unstable = curvlab.linear_system(np.eye(2))
    assert curvlab.cost_contraction_check(stable, x0, x1, 1.0, 200).holds
    assert not curvlab.cost_contraction_check(unstable, x0, x1, 1.0, 200).holds
    tr = curvlab.integrate_system(stable, x0, x1, x0, 2.0, 400)
    assert max(abs(p - tr.pairing[0]) for p in tr.pairing) < 1e-12


def test_errors_are_typed():
    with pytest.raises(ValueError):
        curvlab.circle_grid(2)
    assert issubclass(curvlab.NumericalError, RuntimeError)
    assert math.isinf(curvlab.EntropyModel.linear().N)


def test_run_scenario(tmp_path):
    reports = curvlab.run_scenario(SCENARIOS / "be_scan_two_point.ini", tmp_path)
    assert all(r.holds for r in reports)
    assert (tmp_path / "reports.json").exists()
    assert curvlab.reports_to_json(reports).startswith("[")
