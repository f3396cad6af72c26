"""Sparse multivariate polynomials and multi-index combinatorics.

Monomials are exponent tuples alpha in N^n. The canonical ordering used by
every module is graded: lower total degree first, and within a degree level
lexicographic with the first coordinate most significant and larger
exponents preceding smaller ones. All moment-vector and matrix indexing
relies on this one order.
"""
from __future__ import annotations

import math


def grlex_key(alpha):
    """Sort key realizing the canonical graded order."""
    return (sum(alpha), tuple(-a for a in alpha))


def monomials_up_to(n: int, d: int):
    """All exponent tuples alpha with |alpha| <= d, canonically ordered.

    Length is binomial(n+d, n).
    """
    if n < 1:
        raise ValueError("need at least one variable")
    if d < 0:
        raise ValueError("degree must be non-negative")
    out = []

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    for deg in range(d + 1):
        out.extend(compositions(deg, n))
    return out


def index_map(n: int, d: int):
    """Monomial -> position under the canonical order, for degrees <= d."""
    return {m: i for i, m in enumerate(monomials_up_to(n, d))}


def count_monomials(n: int, d: int) -> int:
    return math.comb(n + d, n)


class Polynomial:
    """Immutable sparse polynomial: exponent tuple -> coefficient.

    Zero coefficients are never stored; two equal polynomials have identical
    term maps. The zero polynomial has degree 0 by convention.
    """

    __slots__ = ("num_vars", "terms")

    def __init__(self, num_vars: int, terms=None):
        if num_vars < 1:
            raise ValueError("need at least one variable")
        clean = {}
        for exps, coef in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != num_vars:
                raise ValueError("exponent arity mismatch")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent")
            coef = float(coef)
            if coef != 0.0:
                clean[exps] = clean.get(exps, 0.0) + coef
                if clean[exps] == 0.0:
                    del clean[exps]
        object.__setattr__(self, "num_vars", num_vars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @property
    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    @staticmethod
    def constant(n: int, c: float) -> "Polynomial":
        return Polynomial(n, {(0,) * n: c})

    @staticmethod
    def variable(n: int, i: int) -> "Polynomial":
        e = [0] * n
        e[i] = 1
        return Polynomial(n, {tuple(e): 1.0})

    def __eq__(self, other):
        return (isinstance(other, Polynomial)
                and self.num_vars == other.num_vars
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.num_vars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        parts = []
        for e in sorted(self.terms, key=grlex_key):
            parts.append(f"{self.terms[e]:+g}*x^{e}")
        return "Polynomial(" + " ".join(parts) + ")"

    def to_json(self):
        items = sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))
        return {"n": self.num_vars,
                "terms": [{"exps": list(e), "coef": c} for e, c in items]}

    @staticmethod
    def from_json(obj) -> "Polynomial":
        n = int(obj["n"])
        terms = {}
        for t in obj["terms"]:
            e = tuple(int(v) for v in t["exps"])
            if e in terms:
                raise ValueError("duplicate exponent tuple in polynomial JSON")
            terms[e] = float(t["coef"])
        return Polynomial(n, terms)


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    if p.num_vars != q.num_vars:
        raise ValueError("dimension mismatch")
    terms = dict(p.terms)
    for e, c in q.terms.items():
        terms[e] = terms.get(e, 0.0) + c
    return Polynomial(p.num_vars, terms)


def poly_scale(p: Polynomial, s: float) -> Polynomial:
    return Polynomial(p.num_vars, {e: c * s for e, c in p.terms.items()})


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    if p.num_vars != q.num_vars:
        raise ValueError("dimension mismatch")
    terms = {}
    for ea, ca in p.terms.items():
        for eb, cb in q.terms.items():
            e = tuple(a + b for a, b in zip(ea, eb))
            terms[e] = terms.get(e, 0.0) + ca * cb
    return Polynomial(p.num_vars, terms)


def poly_pow(p: Polynomial, k: int) -> Polynomial:
    out = Polynomial.constant(p.num_vars, 1.0)
    base = p
    while k > 0:
        if k & 1:
            out = poly_mul(out, base)
        k >>= 1
        if k:
            base = poly_mul(base, base)
    return out


def poly_compose(p: Polynomial, maps) -> Polynomial:
    """p(maps_1(x), ..., maps_k(x)) for k = p.num_vars polynomials in n vars."""
    maps = list(maps)
    if len(maps) != p.num_vars:
        raise ValueError("arity mismatch")
    n = maps[0].num_vars
    if any(m.num_vars != n for m in maps):
        raise ValueError("maps must share a variable count")
    out = Polynomial(n, {})
    for exps, coef in p.terms.items():
        term = Polynomial.constant(n, coef)
        for m, e in zip(maps, exps):
            if e:
                term = poly_mul(term, poly_pow(m, e))
        out = poly_add(out, term)
    return out


def poly_diff(p: Polynomial, var: int) -> Polynomial:
    """Partial derivative with respect to variable var."""
    if not 0 <= var < p.num_vars:
        raise ValueError("variable index out of range")
    terms = {}
    for exps, coef in p.terms.items():
        if exps[var]:
            e = list(exps)
            e[var] -= 1
            terms[tuple(e)] = coef * exps[var]
    return Polynomial(p.num_vars, terms)


def poly_embed(p: Polynomial, num_vars: int, offset: int = 0) -> Polynomial:
    """Reinterpret p over a wider variable tuple; variable i becomes offset+i."""
    if offset < 0 or offset + p.num_vars > num_vars:
        raise ValueError("embedding does not fit the target variable count")
    tail = num_vars - offset - p.num_vars
    return Polynomial(num_vars,
                      {(0,) * offset + e + (0,) * tail: c
                       for e, c in p.terms.items()})


def poly_eval(p: Polynomial, point) -> float:
    if len(point) != p.num_vars:
        raise ValueError("dimension mismatch")
    total = 0.0
    for exps, coef in p.terms.items():
        v = coef
        for x, e in zip(point, exps):
            if e:
                v *= x ** e
        total += v
    return total


def poly_map_power(phi, beta) -> Polynomial:
    """prod_i phi_i^{beta_i} for a polynomial map phi with len(phi) = len(beta)."""
    phi = list(phi)
    if len(phi) != len(beta):
        raise ValueError("map/exponent arity mismatch")
    n = phi[0].num_vars
    out = Polynomial.constant(n, 1.0)
    for comp, e in zip(phi, beta):
        if e:
            out = poly_mul(out, poly_pow(comp, e))
    return out
