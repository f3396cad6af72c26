"""Truncated moment sequences, the Riesz functional, and moment/localizing
matrices as linear operators on moment vectors."""
from __future__ import annotations

import numpy as np

from .poly import (Polynomial, monomials_up_to, index_map, count_monomials,
                   poly_map_power)
from .sets import SemiAlgebraicSet, lebesgue_moment


class MomentVector:
    """Moments of a measure up to max_degree, in the canonical monomial order."""

    __slots__ = ("num_vars", "max_degree", "values")

    def __init__(self, num_vars, max_degree, values):
        expected = count_monomials(num_vars, max_degree)
        values = np.asarray(values, dtype=float)
        if values.shape != (expected,):
            raise ValueError(f"expected {expected} moments, got {values.shape}")
        self.num_vars = num_vars
        self.max_degree = max_degree
        self.values = values

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def __len__(self):
        return len(self.values)


def dirac_moments(points, weights, num_vars, max_degree) -> MomentVector:
    """Moment vector of sum_k w_k * delta_{p_k}."""
    basis = monomials_up_to(num_vars, max_degree)
    vals = np.zeros(len(basis))
    for p, w in zip(points, weights):
        for i, mono in enumerate(basis):
            v = 1.0
            for x, e in zip(p, mono):
                if e:
                    v *= x ** e
            vals[i] += w * v
    return MomentVector(num_vars, max_degree, vals)


def lebesgue_moment_vector(sas: SemiAlgebraicSet, max_degree) -> MomentVector:
    basis = monomials_up_to(sas.num_vars, max_degree)
    vals = np.array([lebesgue_moment(sas, a) for a in basis])
    return MomentVector(sas.num_vars, max_degree, vals)


def riesz(y: MomentVector, p: Polynomial) -> float:
    """<p, y> = sum_alpha p_alpha y_alpha."""
    if p.num_vars != y.num_vars:
        raise ValueError("dimension mismatch")
    if p.degree > y.max_degree:
        raise ValueError("polynomial degree exceeds the moment truncation")
    idx = index_map(y.num_vars, y.max_degree)
    return float(sum(c * y.values[idx[e]] for e, c in p.terms.items()))


class LinearMatrixOperator:
    """Symmetric matrix whose entries are sparse linear forms over a moment
    vector. Stored as upper-triangle entries; `structure` optionally tags the
    operator as a moment/localizing matrix over a full graded basis so that
    solvers can exploit the layout."""

    __slots__ = ("size", "entries", "structure")

    def __init__(self, size, entries, structure=None):
        self.size = size
        # entries: list of (i, j, ((idx, coef), ...)) with i <= j
        self.entries = entries
        self.structure = structure

    def apply(self, values) -> np.ndarray:
        """Dense symmetric matrix at a concrete moment vector."""
        M = np.zeros((self.size, self.size))
        for i, j, form in self.entries:
            v = 0.0
            for k, c in form:
                v += c * values[k]
            M[i, j] = v
            if i != j:
                M[j, i] = v
        return M

    def shifted(self, offset) -> "LinearMatrixOperator":
        """Same operator acting on a concatenated vector at +offset."""
        ents = [(i, j, tuple((k + offset, c) for k, c in form))
                for i, j, form in self.entries]
        st = dict(self.structure, offset=self.structure.get("offset", 0) + offset) \
            if self.structure else None
        return LinearMatrixOperator(self.size, ents, st)

    def flat(self):
        """(rows, cols, var indices, coefs) over expanded upper-tri entries."""
        ii, jj, kk, vv = [], [], [], []
        for i, j, form in self.entries:
            for k, c in form:
                ii.append(i)
                jj.append(j)
                kk.append(k)
                vv.append(c)
        return (np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64),
                np.array(kk, dtype=np.int64), np.array(vv))


def moment_matrix_operator(n, r, target_degree) -> LinearMatrixOperator:
    """Operator alpha,beta -> y_{alpha+beta} of size binomial(n+r, n)."""
    if 2 * r > target_degree:
        raise ValueError("moment truncation too short for the requested order")
    basis = monomials_up_to(n, r)
    idx = index_map(n, target_degree)
    entries = []
    for i in range(len(basis)):
        for j in range(i, len(basis)):
            g = tuple(a + b for a, b in zip(basis[i], basis[j]))
            entries.append((i, j, ((idx[g], 1.0),)))
    structure = {"kind": "moment", "n": n, "order": r,
                 "target_degree": target_degree, "offset": 0,
                 "shifts": (((0,) * n, 1.0),)}
    return LinearMatrixOperator(len(basis), entries, structure)


def localizing_matrix_operator(h: Polynomial, r_loc, target_degree) -> LinearMatrixOperator:
    """Operator alpha,beta -> sum_gamma h_gamma y_{gamma+alpha+beta}."""
    if 2 * r_loc + h.degree > target_degree:
        raise ValueError("moment truncation too short for this localizer")
    n = h.num_vars
    basis = monomials_up_to(n, r_loc)
    idx = index_map(n, target_degree)
    hterms = tuple(sorted(h.terms.items()))
    entries = []
    for i in range(len(basis)):
        for j in range(i, len(basis)):
            g = tuple(a + b for a, b in zip(basis[i], basis[j]))
            form = tuple((idx[tuple(a + b for a, b in zip(g, mono))], c)
                         for mono, c in hterms)
            entries.append((i, j, form))
    structure = {"kind": "localizing", "n": n, "order": r_loc,
                 "target_degree": target_degree, "offset": 0,
                 "shifts": hterms}
    return LinearMatrixOperator(len(basis), entries, structure)


def pushforward_row(phi, beta, z_index):
    """Coefficients of phi^beta as a sparse linear form over z indices.

    z_index maps monomials of the occupation-moment vector to positions.
    """
    p = poly_map_power(phi, beta)
    form = []
    for mono, c in p.terms.items():
        if mono not in z_index:
            raise ValueError("pushforward exceeds the occupation truncation")
        form.append((z_index[mono], c))
    form.sort()
    return tuple(form)
