import csv
import importlib

import numpy as np
import pytest
import scipy.linalg

from polyreach import sim
from polyreach.poly import Polynomial, poly_eval
from polyreach.sets import SemiAlgebraicSet, SystemSpec
from polyreach.synth import ControllerPoly

from conftest import system_path
from polyreach.cli import load_system


def zero_controller(n, m=1):
    return ControllerPoly(n, m, 0, [Polynomial(n, {}) for _ in range(m)],
                          {"scale": [1.0] * m, "shift": [0.0] * m})


def drift_spec(n, f_terms, X, Z, name="toy"):
    f = [Polynomial(n, t) for t in f_terms]
    g = [[Polynomial(n, {})] for _ in range(n)]
    U = SemiAlgebraicSet.box([(-1.0, 1.0)])
    return SystemSpec(n, 1, f, g, X, U, Z, name=name)


def oracle_rollout(spec, ctrl, x0, T):
    """Straightforward reimplementation of the step loop."""
    def inside(S, x):
        return all(poly_eval(h, x) >= 0.0 for h in S.ineqs)

    x = np.asarray(x0, dtype=float)
    for t in range(T + 1):
        if inside(spec.Z, x):
            return "reached", t
        if not inside(spec.X, x):
            return "left_X", t
        if t == T:
            return "timeout", T
        u = np.clip([poly_eval(c, x) for c in ctrl.coeffs], -1.0, 1.0)
        x = np.array([poly_eval(fi, x)
                      + sum(poly_eval(spec.g[i][j], x) * u[j]
                            for j in range(spec.m))
                      for i, fi in enumerate(spec.f)])
    raise AssertionError("unreachable")


def test_start_inside_target_reaches_immediately():
    spec = load_system(system_path("double_integrator"))
    res = sim.rollout(spec, zero_controller(2), (0.01, -0.02), T=100)
    assert res.outcome == "reached"
    assert res.steps_used == 0
    assert res.states.shape == (1, 2)
    assert np.array_equal(res.states[0], [0.01, -0.02])


def test_double_integrator_state_reaches_target(di_assets):
    spec, ctrl = di_assets["spec"], di_assets["controller"]
    res = sim.rollout(spec, ctrl, (-0.8, 0.8), T=10_000)
    assert res.outcome == "reached"
    assert spec.Z.contains(res.states[-1])
    for x in res.states[:-1]:
        assert spec.X.contains(x)
    assert np.all(np.abs(res.inputs) <= 1.0)


def test_rollout_deterministic(di_assets):
    spec, ctrl = di_assets["spec"], di_assets["controller"]
    a = sim.rollout(spec, ctrl, (0.31, -0.47), T=3000)
    b = sim.rollout(spec, ctrl, (0.31, -0.47), T=3000)
    assert a.outcome == b.outcome
    assert a.steps_used == b.steps_used
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.inputs, b.inputs)


def test_reached_labels_revalidate(di_assets):
    spec, ctrl = di_assets["spec"], di_assets["controller"]
    for x0 in [(-0.8, 0.8), (0.5, -0.68), (0.9, 0.9)]:
        res = sim.rollout(spec, ctrl, x0, T=2000)
        outcome, steps = oracle_rollout(spec, ctrl, x0, 2000)
        assert res.outcome == outcome
        assert res.steps_used == steps


def test_grid_has_label_per_vertex(di_assets):
    grid = di_assets["grid"]
    assert grid.points.shape == (400, 2)
    assert len(grid.outcomes) == 400
    assert len(grid.steps) == 400
    assert set(grid.outcomes) <= {"reached", "left_X", "timeout"}
    assert grid.outcomes.count("reached") > 0


def test_grid_inside_target_all_reached_immediately():
    X = SemiAlgebraicSet.box([(-0.5, 0.5)] * 2)
    spec = drift_spec(2, [{(1, 0): 1.0}, {(0, 1): 1.0}], X, X)
    report = sim.grid_verify(spec, zero_controller(2), [5, 5], T=10)
    assert report.outcomes == ["reached"] * 25
    assert np.all(report.steps == 0)


def test_grid_fixed_coordinate_section():
    spec = load_system(system_path("brockett"))
    report = sim.grid_verify(spec, zero_controller(3, m=2),
                             [3, ("fix", 0.0), 3], T=5)
    assert report.points.shape == (9, 3)
    assert np.all(report.points[:, 1] == 0.0)
    assert sorted(set(report.points[:, 0])) == [-1.0, 0.0, 1.0]


def test_start_outside_state_set_rejected():
    spec = load_system(system_path("double_integrator"))
    with pytest.raises(ValueError, match="initial state outside X"):
        sim.rollout(spec, zero_controller(2), (2.0, 0.0), T=10)


def test_target_checked_before_exit():
    # step from 0.55 lands at -0.3: inside Z, outside X
    X = SemiAlgebraicSet.box([(0.0, 1.0)])
    Z = SemiAlgebraicSet.box([(-0.5, 0.1)])
    spec = drift_spec(1, [{(0,): -0.85, (1,): 1.0}], X, Z)
    res = sim.rollout(spec, zero_controller(1), (0.55,), T=10)
    assert res.outcome == "reached"
    assert res.steps_used == 1
    assert res.states[-1] == pytest.approx(-0.3)


def test_trajectory_csv_round_trip(tmp_path, di_assets):
    spec, ctrl = di_assets["spec"], di_assets["controller"]
    res = sim.rollout(spec, ctrl, (0.2, 0.1), T=50)
    path = tmp_path / "traj.csv"
    sim.write_trajectory_csv(path, res)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "u1"]
    assert len(rows) == 1 + len(res.states)
    for t, row in enumerate(rows[1:]):
        assert int(row[0]) == t
        assert [float(v) for v in row[1:3]] == list(res.states[t])
        assert float(row[3]) == res.inputs[t][0]


def test_grid_csv_round_trip(tmp_path):
    X = SemiAlgebraicSet.box([(-0.5, 0.5)] * 2)
    spec = drift_spec(2, [{(1, 0): 1.0}, {(0, 1): 1.0}], X, X)
    report = sim.grid_verify(spec, zero_controller(2), [3, 3], T=5)
    path = tmp_path / "grid.csv"
    sim.write_grid_csv(path, report)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "x2", "outcome", "steps"]
    assert len(rows) == 10
    for i, row in enumerate(rows[1:]):
        assert [float(v) for v in row[:2]] == list(report.points[i])
        assert row[2] == report.outcomes[i]
        assert int(row[3]) == report.steps[i]


def test_outside_vertices_labeled_and_skipped():
    spec = load_system(system_path("vanderpol3d"))
    report = sim.grid_verify(spec, zero_controller(3), [5, 5, 5], T=5)
    assert len(report.points) == 125
    for x, outcome, s in zip(report.points, report.outcomes, report.steps):
        if not spec.X.contains(x):
            assert outcome == sim.OUTSIDE_X
            assert s == 0
        else:
            assert outcome != sim.OUTSIDE_X


def test_lqr_scalar_memoryless():
    X = SemiAlgebraicSet.box([(-1.0, 1.0)])
    U = SemiAlgebraicSet.box([(-1.0, 1.0)])
    Z = SemiAlgebraicSet.box([(-0.1, 0.1)])
    spec = SystemSpec(1, 1, [Polynomial(1, {})],
                      [[Polynomial.constant(1, 1.0)]], X, U, Z,
                      fixed_point=[0.0])
    ctrl = sim.lqr_baseline(spec, [[1.0]], [[1.0]])
    # A = 0 makes the optimal gain zero
    assert ctrl.degree == 1
    assert ctrl.evaluate(np.array([0.5]))[0] == pytest.approx(0.0, abs=1e-12)


def test_lqr_double_integrator_matches_riccati_oracle():
    spec = load_system(system_path("double_integrator"))
    ctrl = sim.lqr_baseline(spec, np.eye(2), np.eye(1))
    A = np.array([[1.0, 0.01], [0.0, 1.0]])
    B = np.array([[0.0], [0.01]])
    P = scipy.linalg.solve_discrete_are(A, B, np.eye(2), np.eye(1))
    K = np.linalg.solve(np.eye(1) + B.T @ P @ B, B.T @ P @ A)
    got = np.array([[-ctrl.coeffs[0].terms.get((1, 0), 0.0),
                     -ctrl.coeffs[0].terms.get((0, 1), 0.0)]])
    assert np.allclose(got, K, atol=1e-8)
    assert max(abs(np.linalg.eigvals(A - B @ K))) < 1.0


def test_lqr_requires_fixed_point():
    vdp = load_system(system_path("vanderpol"))
    with pytest.raises(ValueError, match="no fixed point"):
        sim.lqr_baseline(vdp, np.eye(2), np.eye(1))
    di = load_system(system_path("double_integrator"))
    with pytest.raises(ValueError, match="not a fixed point"):
        sim.lqr_baseline(di, np.eye(2), np.eye(1), fixed_point=[0.5, 0.5])


@pytest.mark.extended
def test_nonholonomic_drift_coordinate_stalls(brockett_extended_assets):
    # the controller parks the first two coordinates but the third can
    # only move through their product, so a residual offset survives
    spec = brockett_extended_assets["spec"]
    ctrl = brockett_extended_assets["controller"]
    res = sim.rollout(spec, ctrl, (0.8, -0.6, 0.7), T=10_000)
    assert res.outcome == "timeout"
    assert np.linalg.norm(res.states[-1]) <= 0.2


def _fast_available():
    try:
        importlib.import_module("polyreach._kernels._fast")
        return True
    except ImportError:
        return False


@pytest.mark.skipif(not _fast_available(),
                    reason="compiled kernel not built")
def test_backends_agree(di_assets):
    from polyreach import _kernels
    from polyreach._kernels import _fast, _ref
    from polyreach.sim import _tables

    spec, ctrl = di_assets["spec"], di_assets["controller"]
    rng = np.random.default_rng(11)
    x0s = rng.uniform(-1, 1, (40, 2))
    tables = _tables(spec, ctrl)
    o_fast, s_fast, st_f, in_f = _fast.rollout_batch(x0s, 2000, *tables,
                                                     record=True)
    o_ref, s_ref, st_r, in_r = _ref.rollout_batch(x0s, 2000, *tables,
                                                  record=True)
    assert np.array_equal(o_fast, o_ref)
    assert np.array_equal(s_fast, s_ref)
    for a, b in zip(st_f, st_r):
        assert np.allclose(a, b, rtol=0, atol=1e-12)
    assert _kernels.NAME in ("compiled", "numpy")
