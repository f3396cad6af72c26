import numpy as np
import pytest

from polyreach import reach
from polyreach.conic import Settings
from polyreach.poly import Polynomial, poly_eval
from polyreach.sets import SemiAlgebraicSet, lebesgue_moment
from polyreach.synth import ControllerPoly, eval_batch

from conftest import system_path
from polyreach.cli import load_system


def identity_spec(n=1, half_width=1.0):
    f = [Polynomial(n, {tuple(int(i == j) for j in range(n)): 1.0})
         for i in range(n)]
    X = SemiAlgebraicSet.box([(-half_width, half_width)] * n)
    return reach.AutonomousSpec(n, f, X, X, name="identity")


def test_compose_substitutes_controller():
    spec = load_system(system_path("double_integrator"))
    u = Polynomial(2, {(1, 0): -1.0, (0, 1): -1.0})
    ctrl = ControllerPoly(2, 1, 1, [u], {"scale": [1.0], "shift": [0.0]})
    closed = reach.compose_closed_loop(spec, ctrl)
    assert closed.f[0].terms == pytest.approx({(1, 0): 1.0, (0, 1): 0.01})
    assert closed.f[1].terms == pytest.approx({(1, 0): -0.01, (0, 1): 0.99})


def test_compose_zero_controller_is_drift():
    spec = load_system(system_path("double_integrator"))
    ctrl = ControllerPoly(2, 1, 0, [Polynomial(2, {})],
                          {"scale": [1.0], "shift": [0.0]})
    closed = reach.compose_closed_loop(spec, ctrl)
    assert [p.terms for p in closed.f] == [p.terms for p in spec.f]


def test_compose_pointwise_oracle():
    rng = np.random.default_rng(53)
    spec = load_system(system_path("brockett"))
    coeffs = [Polynomial(3, {(0, 0, 0): float(rng.uniform(-1, 1)),
                             (1, 0, 0): float(rng.uniform(-1, 1)),
                             (0, 1, 0): float(rng.uniform(-1, 1))})
              for _ in range(2)]
    ctrl = ControllerPoly(3, 2, 1, coeffs, spec.input_scaling)
    closed = reach.compose_closed_loop(spec, ctrl)
    for _ in range(20):
        x = rng.uniform(-1, 1, 3)
        u = np.array([poly_eval(c, x) for c in coeffs])
        want = np.array([poly_eval(fi, x)
                         + sum(poly_eval(spec.g[i][j], x) * u[j]
                               for j in range(2))
                         for i, fi in enumerate(spec.f)])
        got = np.array([poly_eval(fc, x) for fc in closed.f])
        assert np.allclose(got, want, atol=1e-10)


def test_compose_dimension_mismatch():
    spec = load_system(system_path("double_integrator"))
    ctrl = ControllerPoly(3, 1, 0, [Polynomial(3, {})],
                          {"scale": [1.0], "shift": [0.0]})
    with pytest.raises(ValueError, match="dimensions"):
        reach.compose_closed_loop(spec, ctrl)


def test_mass_conservation_row():
    prob = reach.build_reach_sdp(identity_spec(), 1)
    form, rhs = prob.problem.equalities[0]
    assert rhs == 0.0
    assert dict(form) == {prob.layout["y1"]: 1.0, prob.layout["y0"]: -1.0}


def test_identity_map_full_volume():
    spec = identity_spec(n=2, half_width=1.0)
    prob = reach.build_reach_sdp(spec, 2)
    res = reach.solve_reach(prob, Settings())
    assert res.status == "optimal"
    vol = lebesgue_moment(spec.X, (0, 0))
    assert res.solution.primal_obj == pytest.approx(vol, abs=1e-5)

    cert = res.certificate
    assert cert is not None and cert.status == "verified"
    # constant certificate: w stays at or above 1 across X
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, (500, 2))
    assert eval_batch(cert.w, pts).min() >= 1.0 - 1e-6

    wx = sum(c * lebesgue_moment(spec.X, a) for a, c in cert.w.terms.items())
    assert abs(res.solution.primal_obj - wx) \
        <= 1e-5 * (1 + abs(res.solution.primal_obj))


def test_hierarchy_collects_history():
    spec = identity_spec(n=1)
    results, cert = reach.solve_reach_hierarchy(spec, [1, 2], Settings())
    assert len(results) == 2
    assert cert is not None
    assert cert.order == 2
    assert len(cert.history) == 2


def test_certificate_schema_and_round_trip(tmp_path):
    w = Polynomial(2, {(2, 0): 1.0})
    v = Polynomial(2, {(0, 0): 0.5})
    cert = reach.ReachCertificate(3, w, v, [w], status="verified")
    obj = cert.to_json()
    assert set(obj) == {"order", "w", "v", "history"}
    path = tmp_path / "cert.json"
    cert.save(path)
    back = reach.ReachCertificate.load(path)
    assert back.order == 3
    assert back.w.terms == w.terms
    assert back.v.terms == v.terms
    assert len(back.history) == 1
    assert back.status == "unverified"  # validation state is runtime-only


def test_member_level_set():
    w = Polynomial(2, {(2, 0): 1.0})
    cert = reach.ReachCertificate(1, w, Polynomial(2, {}), [])
    assert reach.member(cert, (2.0, 0.0))
    assert not reach.member(cert, (0.0, 0.0))


def test_member_intersection_needs_all_levels():
    w1 = Polynomial(1, {(2,): 1.0})          # holds for |x| >= 1
    w2 = Polynomial(1, {(0,): 2.0, (1,): 1.0})  # holds for x >= -1
    cert = reach.ReachCertificate(2, w2, Polynomial(1, {}), [w1, w2])
    assert reach.member(cert, (1.5,), use_intersection=True)
    assert not reach.member(cert, (-1.5,), use_intersection=True)
    # single test consults only the last w
    assert reach.member(cert, (-0.5,))
    assert not reach.member(cert, (-0.5,), use_intersection=True)


def test_member_intersection_shrinks_with_history():
    rng = np.random.default_rng(67)
    w1 = Polynomial(1, {(0,): 1.5})
    w2 = Polynomial(1, {(0,): 1.5, (2,): -1.0})
    short = reach.ReachCertificate(2, w2, Polynomial(1, {}), [w1])
    longer = reach.ReachCertificate(3, w2, Polynomial(1, {}), [w1, w2])
    for _ in range(50):
        x = (float(rng.uniform(-2, 2)),)
        if reach.member(longer, x, use_intersection=True):
            assert reach.member(short, x, use_intersection=True)


def test_order_below_minimum_rejected():
    with pytest.raises(ValueError, match="below the minimum"):
        reach.build_reach_sdp(identity_spec(), 0)


def test_vanderpol_hierarchy_statuses(vdp_assets):
    results = vdp_assets["results"]
    assert results[5].status == "optimal"
    for r in (5, 6, 7):
        assert results[r].certificate is not None
        assert results[r].certificate.order == r


def test_vanderpol_r5_mass_strictly_inside_volume(vdp_assets):
    p5 = vdp_assets["results"][5].solution.primal_obj
    vol = lebesgue_moment(vdp_assets["spec"].X, (0, 0))
    assert 0.0 < p5 < vol


def test_vanderpol_objective_monotone(vdp_assets):
    results = vdp_assets["results"]
    p = {r: results[r].solution.primal_obj for r in (5, 6, 7)}
    assert p[5] >= p[6] - 1e-5 * (1 + abs(p[5]))
    assert p[6] >= p[7] - 1e-5 * (1 + abs(p[6]))


def test_vanderpol_r7_contains_origin(vdp_assets):
    cert = vdp_assets["results"][7].certificate
    assert reach.member(cert, (0.0, 0.0))


def test_simulated_reachable_within_level_sets(vdp_assets):
    """Outer approximation on the informative orders, away from the
    level-set boundary."""
    grid = vdp_assets["grid"]
    mask = vdp_assets["reached_mask"]
    pts = grid.points[mask]
    for r in (6, 7):
        w = vdp_assets["results"][r].certificate.w
        vals = eval_batch(w, pts)
        off_boundary = np.abs(vals - 1.0) > 1e-6
        assert np.all(vals[off_boundary] >= 1.0)
