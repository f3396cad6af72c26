"""Closed-loop simulation: rollouts, controllability grids, CSV export,
and a discrete-time LQR baseline.

Rollouts iterate x+ = f(x) + g(x) clamp(u(x)) and stop at the first state
in the target set (checked before the state-constraint test), the first
state outside X, or the step cap. Set membership uses the defining
inequalities with zero tolerance.
"""
from __future__ import annotations

import csv

import numpy as np

from . import _kernels
from .poly import (Polynomial, index_map, monomials_up_to, poly_diff,
                   poly_eval)
from .sets import SemiAlgebraicSet, SystemSpec
from .synth import ControllerPoly, eval_batch

DEFAULT_STEPS = 10_000
RECORD_LIMIT = 64  # trajectories are only recorded for small batches

OUTCOME_NAMES = {_kernels.REACHED: "reached",
                 _kernels.LEFT_X: "left_X",
                 _kernels.TIMEOUT: "timeout"}
OUTSIDE_X = "outside_X"


class RolloutResult:
    """One simulated trajectory with its stopping outcome."""

    __slots__ = ("outcome", "steps_used", "states", "inputs")

    def __init__(self, outcome, steps_used, states, inputs):
        self.outcome = outcome
        self.steps_used = steps_used
        self.states = states
        self.inputs = inputs

    @property
    def trajectory(self):
        """(state, input) pairs; the final row carries the input the
        controller would apply at the stopping state."""
        return list(zip(self.states, self.inputs))


class GridReport:
    """Per-vertex rollout outcomes over a state grid."""

    __slots__ = ("points", "outcomes", "steps")

    def __init__(self, points, outcomes, steps):
        self.points = points
        self.outcomes = outcomes
        self.steps = steps


def _check_dims(spec: SystemSpec, ctrl: ControllerPoly):
    if ctrl.n != spec.n or ctrl.m != spec.m:
        raise ValueError("controller dimensions do not match the system")


def _tables(spec: SystemSpec, ctrl: ControllerPoly):
    """Tabulate every polynomial the step loop needs over one shared
    monomial basis, encoded incrementally for the kernels."""
    n, m = spec.n, spec.m
    polys = list(spec.f) + [p for row in spec.g for p in row] + \
        list(ctrl.coeffs) + list(spec.X.ineqs) + list(spec.Z.ineqs)
    degree = max(1, max(p.degree for p in polys))
    basis = monomials_up_to(n, degree)
    idx = index_map(n, degree)
    parent = np.zeros(len(basis), dtype=np.int64)
    var = np.zeros(len(basis), dtype=np.int64)
    for k, mono in enumerate(basis):
        if k == 0:
            continue
        i = next(j for j, e in enumerate(mono) if e)
        down = list(mono)
        down[i] -= 1
        parent[k] = idx[tuple(down)]
        var[k] = i

    def tab(cols):
        C = np.zeros((len(basis), len(cols)))
        for j, p in enumerate(cols):
            for e, c in p.terms.items():
                C[idx[e], j] = c
        return C

    return (parent, var, tab(spec.f),
            tab([spec.g[i][j] for i in range(n) for j in range(m)]),
            tab(ctrl.coeffs), tab(spec.X.ineqs), tab(spec.Z.ineqs))


def rollout(spec: SystemSpec, ctrl: ControllerPoly, x0,
            T: int = DEFAULT_STEPS) -> RolloutResult:
    """Simulate one initial state for at most T steps."""
    _check_dims(spec, ctrl)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.n,):
        raise ValueError("initial state dimension mismatch")
    if T < 0:
        raise ValueError("step count must be non-negative")
    if not spec.X.contains(x0):
        raise ValueError("initial state outside X")
    outcomes, steps, states, inputs = _kernels.rollout_batch(
        x0[None, :], T, *_tables(spec, ctrl), record=True)
    return RolloutResult(OUTCOME_NAMES[int(outcomes[0])], int(steps[0]),
                         states[0], inputs[0])


def rollout_many(spec: SystemSpec, ctrl: ControllerPoly, x0s,
                 T: int = DEFAULT_STEPS, record: bool = False):
    """Batch rollouts sharing one table build; initial states must lie in X.

    Returns (outcome names, steps array, states list, inputs list); the
    trajectories are None unless record is set.
    """
    _check_dims(spec, ctrl)
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    if record and len(x0s) > RECORD_LIMIT:
        raise ValueError("recording is limited to small batches")
    for x0 in x0s:
        if not spec.X.contains(x0):
            raise ValueError("initial state outside X")
    outcomes, steps, states, inputs = _kernels.rollout_batch(
        x0s, T, *_tables(spec, ctrl), record=record)
    return ([OUTCOME_NAMES[int(o)] for o in outcomes], steps, states, inputs)


def grid_points(X: SemiAlgebraicSet, grid_spec) -> np.ndarray:
    """Cartesian grid over X's bounding box, one entry per axis: a vertex
    count (endpoints included) or ("fix", value) pinning that coordinate."""
    box = X.bounding_box()
    if len(grid_spec) != X.num_vars:
        raise ValueError("grid spec must have one entry per state variable")
    axes = []
    for (lo, hi), g in zip(box, grid_spec):
        if isinstance(g, tuple):
            tag, val = g
            if tag != "fix":
                raise ValueError(f"unknown grid entry {g!r}")
            axes.append(np.array([float(val)]))
        else:
            count = int(g)
            if count < 1:
                raise ValueError("grid counts must be positive")
            axes.append(np.linspace(lo, hi, count))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([mm.reshape(-1) for mm in mesh])


def grid_verify(spec: SystemSpec, ctrl: ControllerPoly, grid_spec,
                T: int = DEFAULT_STEPS) -> GridReport:
    """Roll out every grid vertex; vertices outside X are labeled
    outside_X and skipped."""
    _check_dims(spec, ctrl)
    pts = grid_points(spec.X, grid_spec)
    mask = np.ones(len(pts), dtype=bool)
    for h in spec.X.ineqs:
        mask &= eval_batch(h, pts) >= 0.0
    outcomes = [OUTSIDE_X] * len(pts)
    steps = np.zeros(len(pts), dtype=np.int64)
    inside = np.flatnonzero(mask)
    if len(inside):
        o, s, _, _ = _kernels.rollout_batch(pts[inside], T,
                                            *_tables(spec, ctrl),
                                            record=False)
        for row, p in enumerate(inside):
            outcomes[p] = OUTCOME_NAMES[int(o[row])]
            steps[p] = s[row]
    return GridReport(pts, outcomes, steps)


def write_trajectory_csv(path, result: RolloutResult):
    """Header t,x1..xn,u1..um, one row per visited state."""
    n = result.states.shape[1]
    m = result.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t"] + [f"x{i + 1}" for i in range(n)]
                     + [f"u{j + 1}" for j in range(m)])
        for t, (x, u) in enumerate(zip(result.states, result.inputs)):
            out.writerow([t] + [repr(float(v)) for v in x]
                         + [repr(float(v)) for v in u])


def write_grid_csv(path, report: GridReport):
    """Header x1..xn,outcome,steps, one row per grid vertex."""
    n = report.points.shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([f"x{i + 1}" for i in range(n)] + ["outcome", "steps"])
        for x, outcome, s in zip(report.points, report.outcomes,
                                 report.steps):
            out.writerow([repr(float(v)) for v in x] + [outcome, int(s)])


def lqr_baseline(spec: SystemSpec, Q, R, fixed_point=None) -> ControllerPoly:
    """Degree-1 baseline u(x) = -K (x - x*) around a fixed point.

    The dynamics are linearized at x* with nominal input 0, and the
    discrete Riccati equation is solved by the fixed-point iteration
    P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA until the update norm drops
    below 1e-10 (capped at 1e5 sweeps).
    """
    n, m = spec.n, spec.m
    x_star = fixed_point if fixed_point is not None else spec.fixed_point
    if x_star is None:
        raise ValueError("no fixed point available for this system")
    x_star = np.asarray(x_star, dtype=float)
    if x_star.shape != (n,):
        raise ValueError("fixed point dimension mismatch")
    drift = np.array([poly_eval(p, x_star) for p in spec.f]) - x_star
    if np.linalg.norm(drift) > 1e-8:
        raise ValueError("not a fixed point of the dynamics")
    A = np.array([[poly_eval(poly_diff(spec.f[i], j), x_star)
                   for j in range(n)] for i in range(n)])
    B = np.array([[poly_eval(spec.g[i][j], x_star) for j in range(m)]
                  for i in range(n)])
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    P = Q.copy()
    for _ in range(100_000):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
        if not np.isfinite(P_next).all():
            raise ArithmeticError("Riccati iteration diverged")
        delta = np.linalg.norm(P_next - P)
        P = P_next
        if delta <= 1e-10:
            break
    else:
        raise ArithmeticError("Riccati iteration did not converge")
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    coeffs = []
    for i in range(m):
        terms = {}
        shift = 0.0
        for j in range(n):
            e = [0] * n
            e[j] = 1
            terms[tuple(e)] = -K[i, j]
            shift += K[i, j] * x_star[j]
        if shift:
            terms[(0,) * n] = shift
        coeffs.append(Polynomial(n, terms))
    return ControllerPoly(n, m, 1, coeffs, spec.input_scaling)
