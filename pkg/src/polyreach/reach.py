"""Backward reachable sets of autonomous polynomial systems.

Same moment program as the synthesis module but with no inputs: the
occupation measure z lives over the states alone, so the Liouville rows use
the map f directly. The dual polynomial w certifies an outer approximation:
every state that can reach the target while staying in X satisfies
w(x) >= 1, so {x in X : w(x) >= 1} contains the backward reachable set.
Solving several orders gives a monotone family whose intersection tightens
the approximation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem, ConicSolution, Settings, solve
from .moments import (MomentVector, localizing_matrix_operator,
                      moment_matrix_operator, pushforward_row)
from .poly import (Polynomial, count_monomials, index_map, monomials_up_to,
                   poly_add, poly_eval, poly_mul)
from .sets import SemiAlgebraicSet, SystemSpec, lebesgue_moment
from .synth import (DUAL_MATCH_RTOL, ControllerPoly, DualCertificate,
                    certificate_checks)


class AutonomousSpec:
    """Discrete-time autonomous system x+ = f(x) with sets X and Z."""

    __slots__ = ("n", "f", "X", "Z", "d", "name")

    def __init__(self, n, f, X, Z, name=""):
        self.n = int(n)
        self.f = list(f)
        if len(self.f) != self.n:
            raise ValueError("dynamics dimension mismatch")
        for p in self.f:
            if p.num_vars != self.n:
                raise ValueError("dynamics must use the state variables")
        if X.num_vars != self.n or Z.num_vars != self.n:
            raise ValueError("set dimension mismatch")
        self.X, self.Z = X, Z
        self.d = max(1, max(p.degree for p in self.f))
        self.name = name


def compose_closed_loop(spec: SystemSpec, ctrl: ControllerPoly) -> AutonomousSpec:
    """Substitute the (unclamped) controller into the dynamics:
    f_cl(x) = f(x) + g(x) u(x)."""
    if ctrl.n != spec.n or ctrl.m != spec.m:
        raise ValueError("controller dimensions do not match the system")
    f_cl = []
    for i in range(spec.n):
        comp = spec.f[i]
        for j in range(spec.m):
            comp = poly_add(comp, poly_mul(spec.g[i][j], ctrl.coeffs[j]))
        f_cl.append(comp)
    name = f"{spec.name}_closed_loop" if spec.name else "closed_loop"
    return AutonomousSpec(spec.n, f_cl, spec.X, spec.Z, name=name)


@dataclass
class ReachCertificate:
    """Level-set description of the outer approximation.

    history holds the w polynomials of every solved order of a hierarchy
    run (in increasing order), enabling the intersection test; it is empty
    for single-order solves. Validation state is runtime-only: certificates
    reload from disk as unverified.
    """
    order: int
    w: Polynomial
    v: Polynomial
    history: list = field(default_factory=list)
    status: str = "unverified"  # verified | unverified
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"order": self.order, "w": self.w.to_json(),
                "v": self.v.to_json(),
                "history": [p.to_json() for p in self.history]}

    @staticmethod
    def from_json(obj) -> "ReachCertificate":
        return ReachCertificate(
            int(obj["order"]), Polynomial.from_json(obj["w"]),
            Polynomial.from_json(obj["v"]),
            [Polynomial.from_json(p) for p in obj.get("history", [])])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @staticmethod
    def load(path) -> "ReachCertificate":
        with open(path) as fh:
            return ReachCertificate.from_json(json.load(fh))


class ReachProblem:
    """Assembled moment program for one autonomous system and order."""

    __slots__ = ("spec", "r", "layout", "problem", "basis_y", "deg_y",
                 "deg_z")

    def __init__(self, spec, r, layout, problem, basis_y, deg_y, deg_z):
        self.spec = spec
        self.r = r
        self.layout = layout
        self.problem = problem
        self.basis_y = basis_y
        self.deg_y = deg_y
        self.deg_z = deg_z


def build_reach_sdp(spec: AutonomousSpec, r: int) -> ReachProblem:
    """Order-r relaxation with layout y0 | y0_hat | y1 | z, where z holds
    occupation moments over x up to degree 2rd."""
    n, d = spec.n, spec.d
    r_min = max((h.degree + 1) // 2
                for s in (spec.X, spec.Z) for h in s.ineqs)
    if r < r_min:
        raise ValueError(
            f"relaxation order {r} below the minimum {r_min} for these sets")
    if spec.X.shape_hint == "generic":
        raise ValueError("state set has no analytic Lebesgue moments")
    deg_y, deg_z = 2 * r, 2 * r * d
    by = monomials_up_to(n, deg_y)
    iy = index_map(n, deg_y)
    iz = index_map(n, deg_z)
    N = len(by)
    off = {"y0": 0, "y0_hat": N, "y1": 2 * N, "z": 3 * N}
    num = 3 * N + count_monomials(n, deg_z)

    eqs = []
    for beta in by:
        form = {off["y1"] + iy[beta]: 1.0,
                off["z"] + iz[beta]: 1.0,
                off["y0"] + iy[beta]: -1.0}
        for k, c in pushforward_row(spec.f, beta, iz):
            key = off["z"] + k
            form[key] = form.get(key, 0.0) - c
        eqs.append(([(k, c) for k, c in sorted(form.items()) if c != 0.0],
                    0.0))
    for beta in by:
        eqs.append(([(off["y0"] + iy[beta], 1.0),
                     (off["y0_hat"] + iy[beta], 1.0)],
                    lebesgue_moment(spec.X, beta)))

    blocks = []

    def measure_blocks(offset, order, carrier, tdeg):
        blocks.append(moment_matrix_operator(n, order, tdeg).shifted(offset))
        for h in carrier:
            r_h = (h.degree + 1) // 2
            blocks.append(
                localizing_matrix_operator(h, order - r_h, tdeg).shifted(offset))

    measure_blocks(off["y0"], r, spec.X.ineqs, deg_y)
    measure_blocks(off["y0_hat"], r, spec.X.ineqs, deg_y)
    measure_blocks(off["y1"], r, spec.Z.ineqs, deg_y)
    measure_blocks(off["z"], r * d, spec.X.ineqs, deg_z)

    problem = ConicProblem(num, [(off["y0"], 1.0)], eqs, blocks)
    return ReachProblem(spec, r, off, problem, by, deg_y, deg_z)


@dataclass
class ReachResult:
    status: str
    solution: ConicSolution
    y0: MomentVector | None = None
    y0_hat: MomentVector | None = None
    y1: MomentVector | None = None
    z: MomentVector | None = None
    certificate: ReachCertificate | None = None


def solve_reach(problem: ReachProblem,
                settings: Settings | None = None) -> ReachResult:
    """Solve one order and recover the level-set certificate from the
    equality multipliers; validation failure downgrades the certificate to
    unverified without failing the run."""
    sol = solve(problem.problem, settings)
    res = ReachResult(status=sol.status, solution=sol)
    spec, lay = problem.spec, problem.layout
    n = spec.n
    N = len(problem.basis_y)
    if sol.primal is not None:
        x = sol.primal
        res.y0 = MomentVector(n, problem.deg_y, x[lay["y0"]:lay["y0"] + N])
        res.y0_hat = MomentVector(n, problem.deg_y,
                                  x[lay["y0_hat"]:lay["y0_hat"] + N])
        res.y1 = MomentVector(n, problem.deg_y, x[lay["y1"]:lay["y1"] + N])
        res.z = MomentVector(n, problem.deg_z, x[lay["z"]:])
    if sol.dual_eq is not None:
        lam = sol.dual_eq
        v = Polynomial(n, {b: lam[i] for i, b in enumerate(problem.basis_y)})
        w = Polynomial(n, {b: lam[N + i]
                           for i, b in enumerate(problem.basis_y)})
        cert = ReachCertificate(order=problem.r, w=w, v=v)
        wx = sum(c * lebesgue_moment(spec.X, b) for b, c in w.terms.items())
        dual_ok = abs(wx - sol.dual_obj) <= DUAL_MATCH_RTOL * (1 + abs(sol.dual_obj))
        cert.checks["dual_objective_match"] = dual_ok
        try:
            eps, margins = certificate_checks(w, v, spec.X, spec.Z,
                                              spec.f, 0)
            cert.checks.update(margins)
            cert.checks["tolerance"] = eps
            ok = dual_ok and all(margins[k] >= -eps for k in margins)
        except ValueError as exc:
            cert.checks["sampling_error"] = str(exc)
            ok = False
        cert.status = "verified" if ok else "unverified"
        res.certificate = cert
    return res


def solve_reach_hierarchy(spec: AutonomousSpec, orders,
                          settings: Settings | None = None):
    """Solve a sequence of orders and stitch the w history together.

    Returns (results, certificate): one ReachResult per order, and a
    combined certificate whose w/v come from the highest order that
    produced duals and whose history lists every recovered w in order.
    None when no order produced a certificate.
    """
    orders = list(orders)
    results = []
    history = []
    last = None
    for r in orders:
        res = solve_reach(build_reach_sdp(spec, r), settings)
        results.append(res)
        if res.certificate is not None:
            history.append(res.certificate.w)
            last = res.certificate
    if last is None:
        return results, None
    cert = ReachCertificate(order=last.order, w=last.w, v=last.v,
                            history=history, status=last.status,
                            checks=dict(last.checks))
    return results, cert


def member(cert: ReachCertificate, x, use_intersection: bool = False) -> bool:
    """Level-set membership test: w(x) >= 1, or min over the recorded
    hierarchy when use_intersection is set (an empty history falls back to
    the single test)."""
    if use_intersection and cert.history:
        return all(poly_eval(w, x) >= 1.0 for w in cert.history)
    return poly_eval(cert.w, x) >= 1.0
