"""Semi-algebraic set descriptions and Lebesgue moments.

Sets are conjunctions h_i(x) >= 0. Boxes and balls carry a shape hint so
that exact Lebesgue moments are available; generic sets participate in
constraints but cannot serve as the volume carrier.
"""
from __future__ import annotations

import math

from .poly import Polynomial, poly_add, poly_mul, poly_scale, poly_eval


class SemiAlgebraicSet:
    __slots__ = ("num_vars", "ineqs", "shape_hint", "bounds", "center", "radius")

    def __init__(self, num_vars, ineqs, shape_hint="generic",
                 bounds=None, center=None, radius=None):
        self.num_vars = num_vars
        self.ineqs = list(ineqs)
        if not self.ineqs:
            raise ValueError("a set needs at least one defining inequality")
        for h in self.ineqs:
            if h.num_vars != num_vars:
                raise ValueError("inequality arity mismatch")
        self.shape_hint = shape_hint
        self.bounds = [tuple(map(float, ab)) for ab in bounds] if bounds else None
        self.center = list(map(float, center)) if center is not None else None
        self.radius = float(radius) if radius is not None else None

    @staticmethod
    def box(bounds) -> "SemiAlgebraicSet":
        """Box prod [a_i, b_i]; defining polys (x_i - a_i)(b_i - x_i)."""
        bounds = [tuple(map(float, ab)) for ab in bounds]
        n = len(bounds)
        ineqs = []
        for i, (a, b) in enumerate(bounds):
            if not a < b:
                raise ValueError("box needs a_i < b_i")
            xi = Polynomial.variable(n, i)
            lo = poly_add(xi, Polynomial.constant(n, -a))
            hi = poly_add(poly_scale(xi, -1.0), Polynomial.constant(n, b))
            ineqs.append(poly_mul(lo, hi))
        return SemiAlgebraicSet(n, ineqs, "box", bounds=bounds)

    @staticmethod
    def ball(center, radius) -> "SemiAlgebraicSet":
        """Ball ||x - c|| <= R; defining poly R^2 - ||x - c||^2."""
        center = list(map(float, center))
        n = len(center)
        h = Polynomial.constant(n, radius * radius)
        for i, c in enumerate(center):
            xi = Polynomial.variable(n, i)
            diff = poly_add(xi, Polynomial.constant(n, -c))
            h = poly_add(h, poly_scale(poly_mul(diff, diff), -1.0))
        return SemiAlgebraicSet(n, [h], "ball", center=center, radius=radius)

    @staticmethod
    def generic(ineqs) -> "SemiAlgebraicSet":
        return SemiAlgebraicSet(ineqs[0].num_vars, ineqs, "generic")

    def contains(self, x, tol=0.0) -> bool:
        return all(poly_eval(h, x) >= -tol for h in self.ineqs)

    def bounding_box(self):
        """Per-coordinate bounds when the shape provides them."""
        if self.shape_hint == "box":
            return list(self.bounds)
        if self.shape_hint == "ball":
            return [(c - self.radius, c + self.radius) for c in self.center]
        raise ValueError("generic set has no analytic bounding box")

    def to_json(self):
        if self.shape_hint == "box":
            return {"type": "box", "bounds": [list(ab) for ab in self.bounds]}
        if self.shape_hint == "ball":
            return {"type": "ball", "center": list(self.center),
                    "radius": self.radius}
        return {"type": "generic", "ineqs": [h.to_json() for h in self.ineqs]}

    @staticmethod
    def from_json(obj) -> "SemiAlgebraicSet":
        kind = obj["type"]
        if kind == "box":
            return SemiAlgebraicSet.box(obj["bounds"])
        if kind == "ball":
            return SemiAlgebraicSet.ball(obj["center"], obj["radius"])
        if kind == "generic":
            return SemiAlgebraicSet.generic(
                [Polynomial.from_json(h) for h in obj["ineqs"]])
        raise ValueError(f"unknown set type {kind!r}")


def _unit_ball_moment(alpha):
    # 0 for odd exponents; else 2 prod Gamma((a_i+1)/2) / ((|a|+n) Gamma((|a|+n)/2))
    if any(a % 2 for a in alpha):
        return 0.0
    n = len(alpha)
    s = sum(alpha)
    num = 2.0
    for a in alpha:
        num *= math.gamma((a + 1) / 2.0)
    return num / ((s + n) * math.gamma((s + n) / 2.0))


def lebesgue_moment(sas: SemiAlgebraicSet, alpha) -> float:
    """int_set x^alpha dx for box or ball shapes; exact closed form."""
    if sas.shape_hint == "box":
        v = 1.0
        for (a, b), e in zip(sas.bounds, alpha):
            v *= (b ** (e + 1) - a ** (e + 1)) / (e + 1)
        return v
    if sas.shape_hint == "ball":
        # affine change x = c + R y onto the unit ball; binomial expansion
        n = sas.num_vars
        R, c = sas.radius, sas.center
        total = 0.0
        ks = [range(a + 1) for a in alpha]

        def rec(i, k_acc, coef):
            nonlocal total
            if i == n:
                total += coef * R ** (sum(k_acc)) * _unit_ball_moment(tuple(k_acc))
                return
            for k in ks[i]:
                rec(i + 1, k_acc + [k],
                    coef * math.comb(alpha[i], k) * c[i] ** (alpha[i] - k))

        rec(0, [], 1.0)
        return total * R ** n
    raise ValueError("moments unavailable for generic sets")


def quadratic_module_degrees(sas: SemiAlgebraicSet, r: int):
    """Multiplier orders [r - ceil(deg h_i / 2)] with the unit h_0 first."""
    r_i = [(h.degree + 1) // 2 for h in sas.ineqs]
    if r < max(r_i):
        raise ValueError("relaxation order below the minimum for this set")
    return [r] + [r - ri for ri in r_i]


class SystemSpec:
    """Control-affine discrete-time system x+ = f(x) + g(x) u with sets X, U, Z.

    After construction U is always the box [-1,1]^m; input_scaling records
    the affine map back to original input units (u_orig = scale*u + shift).
    """

    __slots__ = ("n", "m", "f", "g", "X", "U", "Z", "d", "input_scaling",
                 "fixed_point", "name")

    def __init__(self, n, m, f, g, X, U, Z, input_scaling=None,
                 fixed_point=None, name=""):
        self.n, self.m = n, m
        self.f = list(f)
        self.g = [list(row) for row in g]
        if len(self.f) != n or len(self.g) != n or any(len(r) != m for r in self.g):
            raise ValueError("dynamics dimension mismatch")
        if X.num_vars != n or Z.num_vars != n or U.num_vars != m:
            raise ValueError("set dimension mismatch")
        self.X, self.U, self.Z = X, U, Z
        deg_f = max(p.degree for p in self.f)
        deg_g = max((p.degree for row in self.g for p in row), default=0)
        has_g = any(not p.is_zero() for row in self.g for p in row)
        self.d = max(deg_f, deg_g + 1) if has_g else deg_f
        self.input_scaling = input_scaling or \
            {"scale": [1.0] * m, "shift": [0.0] * m}
        self.fixed_point = list(map(float, fixed_point)) if fixed_point else None
        self.name = name


def rescale_inputs(n, m, f, g, X, U, Z, fixed_point=None, name="") -> SystemSpec:
    """Normalize a box input set to [-1,1]^m, absorbing the affine map.

    u_i = (b_i-a_i)/2 * u~_i + (b_i+a_i)/2; f absorbs g(x) * midpoint and
    g columns are scaled by the half-widths.
    """
    if U.shape_hint != "box":
        raise ValueError("input set must be a box")
    scale = [(b - a) / 2.0 for a, b in U.bounds]
    shift = [(b + a) / 2.0 for a, b in U.bounds]
    if any(s <= 0 for s in scale):
        raise ValueError("input box needs a_i < b_i")
    f2 = []
    for i in range(n):
        fi = f[i]
        for j in range(m):
            if shift[j] != 0.0:
                fi = poly_add(fi, poly_scale(g[i][j], shift[j]))
        f2.append(fi)
    g2 = [[poly_scale(g[i][j], scale[j]) for j in range(m)] for i in range(n)]
    U2 = SemiAlgebraicSet.box([(-1.0, 1.0)] * m)
    already = all(abs(s - 1.0) < 1e-15 and abs(t) < 1e-15
                  for s, t in zip(scale, shift))
    return SystemSpec(n, m, f2 if not already else list(f),
                      g2 if not already else [list(r) for r in g],
                      X, U2, Z,
                      input_scaling={"scale": scale, "shift": shift},
                      fixed_point=fixed_point, name=name)
