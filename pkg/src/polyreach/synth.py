"""Controller synthesis via occupation-measure moment programs.

The primal scalar vector concatenates four truncated moment sequences:
y0 (initial measure on X), y0_hat (its slack against the Lebesgue measure),
y1 (final measure on Z), and z (occupation measure on X x U). Liouville
rows transport mass through the dynamics, domination rows cap y0 by the
Lebesgue moments of X, and the objective maximizes the steerable initial
mass y0_0.

Dual multipliers of the two equality families are the certificate
polynomials: w from the domination rows and v from the Liouville rows,
under the conic module's sign convention. At an optimum w and w - v - 1
are nonnegative on X, v is nonnegative on Z, and v does not increase along
the dynamics; the sampled validation checks exactly those four margins.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem, ConicSolution, Settings, solve
from .moments import (MomentVector, localizing_matrix_operator,
                      moment_matrix_operator, pushforward_row)
from .poly import (Polynomial, count_monomials, index_map, monomials_up_to,
                   poly_add, poly_embed, poly_eval, poly_mul)
from .sets import SemiAlgebraicSet, SystemSpec, lebesgue_moment

VALIDATION_SAMPLES = 10_000
DUAL_MATCH_RTOL = 1e-6


def clamp(u_val) -> np.ndarray:
    """Componentwise clip to the normalized input box [-1, 1]^m."""
    return np.clip(np.asarray(u_val, dtype=float), -1.0, 1.0)


def eval_batch(p: Polynomial, pts) -> np.ndarray:
    """Evaluate a polynomial at every row of an (N, num_vars) array."""
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != p.num_vars:
        raise ValueError("dimension mismatch")
    if not p.terms:
        return np.zeros(len(pts))
    exps = np.array(list(p.terms.keys()), dtype=np.int64)
    coefs = np.array(list(p.terms.values()))
    return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) @ coefs


class ControllerPoly:
    """Polynomial state feedback in normalized input units.

    evaluate() clamps to [-1, 1]^m, matching how inputs are applied in
    simulation; original_inputs() maps clamped values back to the physical
    units recorded when the input box was normalized.
    """

    __slots__ = ("n", "m", "degree", "coeffs", "input_scaling")

    def __init__(self, n, m, degree, coeffs, input_scaling=None):
        self.n, self.m = int(n), int(m)
        self.degree = int(degree)
        self.coeffs = list(coeffs)
        if len(self.coeffs) != self.m:
            raise ValueError("need one coefficient polynomial per input")
        for p in self.coeffs:
            if p.num_vars != self.n:
                raise ValueError("controller polynomials must use the state variables")
            if p.degree > self.degree:
                raise ValueError("coefficient degree exceeds the declared degree")
        self.input_scaling = input_scaling or \
            {"scale": [1.0] * self.m, "shift": [0.0] * self.m}

    def evaluate_unclamped(self, x) -> np.ndarray:
        return np.array([poly_eval(p, x) for p in self.coeffs])

    def evaluate(self, x) -> np.ndarray:
        return clamp(self.evaluate_unclamped(x))

    def original_inputs(self, u_normalized) -> np.ndarray:
        s = np.asarray(self.input_scaling["scale"], dtype=float)
        t = np.asarray(self.input_scaling["shift"], dtype=float)
        return s * np.asarray(u_normalized, dtype=float) + t

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "degree": self.degree,
                "coeffs": [p.to_json() for p in self.coeffs],
                "input_scaling": {
                    "scale": [float(v) for v in self.input_scaling["scale"]],
                    "shift": [float(v) for v in self.input_scaling["shift"]]}}

    @staticmethod
    def from_json(obj) -> "ControllerPoly":
        return ControllerPoly(
            obj["n"], obj["m"], obj["degree"],
            [Polynomial.from_json(p) for p in obj["coeffs"]],
            {"scale": [float(v) for v in obj["input_scaling"]["scale"]],
             "shift": [float(v) for v in obj["input_scaling"]["shift"]]})

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @staticmethod
    def load(path) -> "ControllerPoly":
        with open(path) as fh:
            return ControllerPoly.from_json(json.load(fh))


@dataclass
class DualCertificate:
    v: Polynomial
    w: Polynomial
    status: str = "unverified"  # verified | unverified
    checks: dict = field(default_factory=dict)


class SynthesisProblem:
    """Assembled moment program for one system and one relaxation order."""

    __slots__ = ("spec", "r", "layout", "problem", "basis_y", "deg_y",
                 "deg_z", "phi")

    def __init__(self, spec, r, layout, problem, basis_y, deg_y, deg_z, phi):
        self.spec = spec
        self.r = r
        self.layout = layout
        self.problem = problem
        self.basis_y = basis_y
        self.deg_y = deg_y
        self.deg_z = deg_z
        self.phi = phi


def build_synthesis_sdp(spec: SystemSpec, r: int) -> SynthesisProblem:
    """Moment relaxation of order r for steering spec to its target set.

    Scalar layout: y0 | y0_hat | y1 (each over x up to degree 2r) | z (over
    (x, u) up to degree 2rd). One Liouville row and one domination row per
    state monomial beta with |beta| <= 2r.
    """
    n, m, d = spec.n, spec.m, spec.d
    r_min = max((h.degree + 1) // 2
                for s in (spec.X, spec.U, spec.Z) for h in s.ineqs)
    if r < r_min:
        raise ValueError(
            f"relaxation order {r} below the minimum {r_min} for these sets")
    if spec.X.shape_hint == "generic":
        raise ValueError("state set has no analytic Lebesgue moments")
    deg_y, deg_z = 2 * r, 2 * r * d
    by = monomials_up_to(n, deg_y)
    iy = index_map(n, deg_y)
    iz = index_map(n + m, deg_z)
    N = len(by)
    off = {"y0": 0, "y0_hat": N, "y1": 2 * N, "z": 3 * N}
    num = 3 * N + count_monomials(n + m, deg_z)

    u_vars = [Polynomial.variable(n + m, n + j) for j in range(m)]
    phi = []
    for i in range(n):
        comp = poly_embed(spec.f[i], n + m)
        for j in range(m):
            comp = poly_add(comp, poly_mul(poly_embed(spec.g[i][j], n + m),
                                           u_vars[j]))
        phi.append(comp)

    eqs = []
    for beta in by:
        form = {off["y1"] + iy[beta]: 1.0,
                off["z"] + iz[beta + (0,) * m]: 1.0,
                off["y0"] + iy[beta]: -1.0}
        for k, c in pushforward_row(phi, beta, iz):
            key = off["z"] + k
            form[key] = form.get(key, 0.0) - c
        eqs.append(([(k, c) for k, c in sorted(form.items()) if c != 0.0],
                    0.0))
    for beta in by:
        eqs.append(([(off["y0"] + iy[beta], 1.0),
                     (off["y0_hat"] + iy[beta], 1.0)],
                    lebesgue_moment(spec.X, beta)))

    blocks = []

    def measure_blocks(offset, nv, order, carrier, tdeg):
        blocks.append(moment_matrix_operator(nv, order, tdeg).shifted(offset))
        for h in carrier:
            r_h = (h.degree + 1) // 2
            blocks.append(
                localizing_matrix_operator(h, order - r_h, tdeg).shifted(offset))

    measure_blocks(off["y0"], n, r, spec.X.ineqs, deg_y)
    measure_blocks(off["y0_hat"], n, r, spec.X.ineqs, deg_y)
    measure_blocks(off["y1"], n, r, spec.Z.ineqs, deg_y)
    z_carrier = [poly_embed(h, n + m) for h in spec.X.ineqs] + \
                [poly_embed(h, n + m, offset=n) for h in spec.U.ineqs]
    measure_blocks(off["z"], n + m, r * d, z_carrier, deg_z)

    problem = ConicProblem(num, [(off["y0"], 1.0)], eqs, blocks)
    return SynthesisProblem(spec, r, off, problem, by, deg_y, deg_z, phi)


def _sample_set(sas: SemiAlgebraicSet, count: int, rng) -> np.ndarray:
    """Uniform samples inside sas by rejection from its bounding box."""
    box = np.asarray(sas.bounding_box(), dtype=float)
    chunks, have = [], 0
    for _ in range(64):
        draw = rng.uniform(box[:, 0], box[:, 1], size=(count, sas.num_vars))
        mask = np.ones(count, dtype=bool)
        for h in sas.ineqs:
            mask &= eval_batch(h, draw) >= 0.0
        chunks.append(draw[mask])
        have += int(mask.sum())
        if have >= count:
            break
    pts = np.concatenate(chunks)[:count]
    if len(pts) < count:
        raise ValueError("rejection sampling starved; set volume too small "
                         "relative to its bounding box")
    return pts


def certificate_checks(w, v, X, Z, dynamics, num_inputs,
                       samples=VALIDATION_SAMPLES, seed=0):
    """Sampled nonnegativity margins for a recovered dual pair (w, v).

    dynamics is the list of next-state polynomials, over x alone when
    num_inputs == 0 or over (x, u) jointly otherwise. Returns (eps, margins)
    where every margin must be >= -eps for the certificate to verify.
    """
    rng = np.random.default_rng(seed)
    xs = _sample_set(X, samples, rng)
    zs = _sample_set(Z, samples, rng)
    w_x = eval_batch(w, xs)
    v_x = eval_batch(v, xs)
    eps = 1e-6 * (1.0 + float(np.max(np.abs(w_x))))
    if num_inputs:
        us = rng.uniform(-1.0, 1.0, size=(len(xs), num_inputs))
        pts = np.hstack([xs, us])
    else:
        pts = xs
    images = np.column_stack([eval_batch(p, pts) for p in dynamics])
    margins = {
        "w_on_X": float(w_x.min()),
        "w_minus_v_minus_1_on_X": float((w_x - v_x - 1.0).min()),
        "v_on_Z": float(eval_batch(v, zs).min()),
        "v_decrease_along_dynamics": float((v_x - eval_batch(v, images)).min()),
    }
    return eps, margins


@dataclass
class SynthesisResult:
    status: str
    solution: ConicSolution
    y0: MomentVector | None = None
    y0_hat: MomentVector | None = None
    y1: MomentVector | None = None
    z: MomentVector | None = None
    certificate: DualCertificate | None = None


def solve_synthesis(problem: SynthesisProblem,
                    settings: Settings | None = None) -> SynthesisResult:
    """Solve the assembled program and recover primal moments and the dual
    certificate. Certificate validation failure never fails the run; the
    certificate just comes back unverified with its margins attached."""
    sol = solve(problem.problem, settings)
    res = SynthesisResult(status=sol.status, solution=sol)
    spec, lay = problem.spec, problem.layout
    n, m = spec.n, spec.m
    N = len(problem.basis_y)
    if sol.primal is not None:
        x = sol.primal
        res.y0 = MomentVector(n, problem.deg_y, x[lay["y0"]:lay["y0"] + N])
        res.y0_hat = MomentVector(n, problem.deg_y,
                                  x[lay["y0_hat"]:lay["y0_hat"] + N])
        res.y1 = MomentVector(n, problem.deg_y, x[lay["y1"]:lay["y1"] + N])
        res.z = MomentVector(n + m, problem.deg_z, x[lay["z"]:])
    if sol.dual_eq is not None:
        lam = sol.dual_eq
        v = Polynomial(n, {b: lam[i] for i, b in enumerate(problem.basis_y)})
        w = Polynomial(n, {b: lam[N + i]
                           for i, b in enumerate(problem.basis_y)})
        cert = DualCertificate(v=v, w=w)
        wx = sum(c * lebesgue_moment(spec.X, b) for b, c in w.terms.items())
        dual_ok = abs(wx - sol.dual_obj) <= DUAL_MATCH_RTOL * (1 + abs(sol.dual_obj))
        cert.checks["dual_objective_match"] = dual_ok
        try:
            eps, margins = certificate_checks(w, v, spec.X, spec.Z,
                                              problem.phi, m)
            cert.checks.update(margins)
            cert.checks["tolerance"] = eps
            ok = dual_ok and all(margins[k] >= -eps for k in margins)
        except ValueError as exc:
            cert.checks["sampling_error"] = str(exc)
            ok = False
        cert.status = "verified" if ok else "unverified"
        res.certificate = cert
    return res


def extract_controller(z: MomentVector, n: int, m: int, d_u: int,
                       svd_tol: float = 1e-8,
                       input_scaling=None) -> ControllerPoly:
    """Least-squares controller from occupation moments.

    For each input i this solves M(rho) c_i = tau_i, where rho is the state
    marginal of z and tau_i pairs each state monomial with one power of
    input i, via a truncated-SVD pseudo-inverse with relative cutoff
    svd_tol. A zero moment matrix means the occupation measure carries no
    usable mass.
    """
    if z.num_vars != n + m:
        raise ValueError("moment vector is not over (x, u)")
    if d_u < 0:
        raise ValueError("controller degree must be non-negative")
    if z.max_degree < 2 * d_u + 1:
        raise ValueError(
            "occupation truncation too short for this controller degree")
    basis = monomials_up_to(n, d_u)
    idx = index_map(n + m, z.max_degree)
    k = len(basis)
    M = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            mono = tuple(p + q for p, q in zip(basis[a], basis[b])) + (0,) * m
            M[a, b] = M[b, a] = z.values[idx[mono]]
    taus = np.empty((k, m))
    for a in range(k):
        for i in range(m):
            unit = tuple(1 if j == i else 0 for j in range(m))
            taus[a, i] = z.values[idx[basis[a] + unit]]
    U, s, Vt = np.linalg.svd(M)
    keep = s > svd_tol * s[0]
    if not keep.any():
        raise ValueError("degenerate occupation measure")
    coefs = Vt[keep].T @ ((U[:, keep].T @ taus) / s[keep, None])
    polys = [Polynomial(n, {basis[a]: coefs[a, i] for a in range(k)})
             for i in range(m)]
    return ControllerPoly(n, m, d_u, polys, input_scaling)


def synthesize_controller(spec: SystemSpec, r: int, controller_degree: int,
                          svd_tol: float = 1e-8,
                          settings: Settings | None = None):
    """Build, solve, and extract in one call.

    Returns (SynthesisResult, ControllerPoly or None); extraction is
    attempted whenever the solve produced occupation moments.
    """
    if controller_degree > r:
        raise ValueError(
            "controller degree must not exceed the relaxation order")
    problem = build_synthesis_sdp(spec, r)
    result = solve_synthesis(problem, settings)
    ctrl = None
    if result.z is not None and result.status in ("optimal", "inaccurate"):
        ctrl = extract_controller(result.z, spec.n, spec.m, controller_degree,
                                  svd_tol, spec.input_scaling)
    return result, ctrl
