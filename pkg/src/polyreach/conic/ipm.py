"""Interior-point backend behind `conic.solve`.

cvxopt's conelp drives the path following; everything problem specific
lives in a custom KKT solver: Ruiz equilibration of the raw data, dense
Schur complement assembly (with an FFT fast path for moment-structured
blocks), and one LDL factorization per iteration. The returned solution
is judged in original problem units, never in the solver's scaled ones.
"""
from __future__ import annotations

import math
import time

import numpy as np
from cvxopt import matrix, solvers, spmatrix
from scipy import fft as sfft
from scipy import sparse
from scipy.linalg import lapack

from ..poly import monomials_up_to
from .problem import (EQ_RESIDUAL_LIMIT, MIN_EIG_LIMIT, ConicProblem,
                      ConicSolution, Settings)

# The convolution path only pays off for large blocks, and its entrywise
# accuracy is below the dense gather's, so it is reserved for block sizes
# where the gather dominates the iteration cost. Past FFT_GRID_LIMIT the
# padded exponent grid stops fitting comfortably in memory and the gather
# wins regardless.
FFT_MIN_SIZE = 150
FFT_GRID_LIMIT = 2500
RUIZ_SWEEPS = 30


def _ruiz(p, eq_rows, eq_cols, eq_vals, n_eq, blocks):
    """Max-norm equilibration: column scales per scalar, row scales per
    equality, congruence scales per PSD block index."""
    cs = np.ones(p)
    rs = np.ones(n_eq)
    gs = [np.ones(s) for s, *_ in blocks]
    for _ in range(RUIZ_SWEEPS):
        cn = np.zeros(p)
        for bi, (s, ii, jj, kk, vv, _st) in enumerate(blocks):
            eff = np.abs(vv) * gs[bi][ii] * gs[bi][jj] * cs[kk]
            np.maximum.at(cn, kk, eff)
        if n_eq:
            eff = np.abs(eq_vals) * rs[eq_rows] * cs[eq_cols]
            np.maximum.at(cn, eq_cols, eff)
        cn[cn == 0] = 1.0
        cs /= np.sqrt(cn)
        if n_eq:
            rn = np.zeros(n_eq)
            np.maximum.at(rn, eq_rows,
                          np.abs(eq_vals) * rs[eq_rows] * cs[eq_cols])
            rn[rn == 0] = 1.0
            rs /= np.sqrt(rn)
        for bi, (s, ii, jj, kk, vv, _st) in enumerate(blocks):
            eff = np.abs(vv) * gs[bi][ii] * gs[bi][jj] * cs[kk]
            bn = np.zeros(s)
            np.maximum.at(bn, ii, eff)
            np.maximum.at(bn, jj, eff)
            bn[bn == 0] = 1.0
            gs[bi] /= np.sqrt(np.sqrt(bn))
    return cs, rs, gs


def _conv_eligible(st, uvars, size):
    if size < FFT_MIN_SIZE:
        return False
    if not st or st.get("kind") not in ("moment", "localizing"):
        return False
    n, q = st["n"], st["order"]
    if (2 * q + 1) ** n > FFT_GRID_LIMIT:
        return False
    off = st["offset"]
    width = math.comb(n + st["target_degree"], n)
    return bool(uvars[0] >= off and uvars[-1] < off + width)


class _ConvPlan:
    """Schur-complement rows of one moment-structured block via FFT.

    For such a block the entry operator at scalar k is determined by the
    exponent of k's monomial alone, so <E_k, M' E_k' M'> is a gather from
    the self-convolution of M' scattered on the exponent grid. The block
    congruence scales fold into M' and the column scales multiply outside,
    which keeps the identity valid for the equilibrated problem.

    FFT roundoff is relative to the largest magnitude in the transform,
    while late interior-point scaling matrices span many decades, so the
    raw convolution would drown the small Schur entries. A per-call
    variable-wise scaling sigma^alpha (fit to the diagonal of M') is a
    congruence that preserves the moment structure; folding it into M'
    and compensating exactly in the gather weights flattens the dynamic
    range without changing the identity.
    """

    def __init__(self, st, uvars, cs, gblock):
        n, q = st["n"], st["order"]
        self.n, self.q = n, q
        basis = monomials_up_to(n, q)
        self.expo = np.array(basis, dtype=float)  # s x n
        self.scatter = np.array(
            [np.ravel_multi_index(a, (q + 1,) * n) for a in basis])
        self.fshape = (2 * q + 1,) * (2 * n)
        self.axes = tuple(range(2 * n))
        self.side = (q + 1) ** n
        self.grid = (2 * q + 1) ** n
        target = monomials_up_to(n, st["target_degree"])
        off = st["offset"]
        self.rows = []
        self.coefs = []
        self.deltas = []  # exponent of each gather position, for the weights
        for mono, coef in st["shifts"]:
            idx = np.empty(len(uvars), dtype=np.int64)
            dd = np.zeros((len(uvars), n))
            for t, k in enumerate(uvars):
                g = target[k - off]
                d = tuple(a - b for a, b in zip(g, mono))
                if min(d) < 0 or max(d) > 2 * q:
                    idx[t] = self.grid  # sentinel row/col of zeros
                else:
                    idx[t] = np.ravel_multi_index(d, (2 * q + 1,) * n)
                    dd[t] = d
            self.rows.append(idx)
            self.coefs.append(float(coef))
            self.deltas.append(dd)
        self.csub = cs[uvars]
        self.gblock = gblock

    def schur(self, M):
        Mp = M * self.gblock[:, None] * self.gblock[None, :]
        dm = np.diag(Mp)
        dm = np.maximum(dm, np.max(dm) * 1e-300)
        # least-squares fit log dm_i ~ -2 <alpha_i, logsig>
        E = self.expo
        lw, *_ = np.linalg.lstsq(E.T @ E + 1e-12 * np.eye(self.n),
                                 E.T @ (-0.5 * np.log(dm)), rcond=None)
        theta = np.exp(E @ lw)
        Mb = Mp * theta[:, None] * theta[None, :]
        U = np.zeros((self.side, self.side))
        U[self.scatter[:, None], self.scatter[None, :]] = Mb
        U = U.reshape((self.q + 1,) * (2 * self.n))
        F = sfft.rfftn(U, s=self.fshape, axes=self.axes)
        C = sfft.irfftn(F * F, s=self.fshape, axes=self.axes)
        C = np.ascontiguousarray(C).reshape(self.grid, self.grid)
        Cp = np.zeros((self.grid + 1, self.grid + 1))
        Cp[:self.grid, :self.grid] = C
        nu = len(self.csub)
        Hb = np.zeros((nu, nu))
        weights = []
        for ra, ca, dd in zip(self.rows, self.coefs, self.deltas):
            w = ca * np.exp(-(dd @ lw))
            w[ra == self.grid] = 0.0
            weights.append(w)
        for ra, wa in zip(self.rows, weights):
            for rb, wb in zip(self.rows, weights):
                Hb += (wa[:, None] * wb[None, :]) * Cp[np.ix_(ra, rb)]
        Hb *= self.csub[:, None] * self.csub[None, :]
        return Hb


def solve_ipm(problem: ConicProblem, settings: Settings) -> ConicSolution:
    t_start = time.time()
    p = problem.num_scalars
    if not problem.psd_blocks:
        raise ValueError("conic problem has no psd blocks")

    blocks = []
    for blk in problem.psd_blocks:
        ii, jj, kk, vv = blk.flat()
        blocks.append((blk.size, ii, jj, kk, vv, blk.structure))

    n_eq = len(problem.equalities)
    er, ec, ev = [], [], []
    rhs0 = np.zeros(n_eq)
    for ei, (form, rhs) in enumerate(problem.equalities):
        for k, coef in form:
            er.append(ei)
            ec.append(k)
            ev.append(coef)
        rhs0[ei] = rhs
    eq_rows = np.array(er, dtype=np.int64)
    eq_cols = np.array(ec, dtype=np.int64)
    eq_vals = np.array(ev, dtype=float)

    obj0 = np.zeros(p)
    for k, coef in problem.objective:
        obj0[k] += coef

    cs, rs, gs = _ruiz(p, eq_rows, eq_cols, eq_vals, n_eq, blocks)

    ev_s = eq_vals * rs[eq_rows] * cs[eq_cols]
    Ad = np.zeros((n_eq, p))
    np.add.at(Ad, (eq_rows, eq_cols), ev_s)
    A = spmatrix(ev_s.tolist(), eq_rows.tolist(), eq_cols.tolist(), (n_eq, p))
    b = matrix(rhs0 * rs)

    # per-block expanded entry arrays (both triangles), sorted by scalar
    cones = []
    Gr_all, Gc_all, Gv_all = [], [], []
    dims = {"l": 0, "q": [], "s": []}
    rc = 0
    n_fft = 0
    for bi, (s, ii, jj, kk, vv, st) in enumerate(blocks):
        vv_s = vv * gs[bi][ii] * gs[bi][jj] * cs[kk]
        offd = ii != jj
        ii2 = np.concatenate([ii, jj[offd]])
        jj2 = np.concatenate([jj, ii[offd]])
        kk2 = np.concatenate([kk, kk[offd]])
        vv2 = np.concatenate([vv_s, vv_s[offd]])
        order = np.argsort(kk2, kind="stable")
        ii2, jj2, kk2, vv2 = ii2[order], jj2[order], kk2[order], vv2[order]
        uvars, starts = np.unique(kk2, return_index=True)
        starts = np.append(starts, len(kk2))
        lk = np.searchsorted(uvars, kk2)
        plan = None
        if _conv_eligible(st, uvars, s):
            plan = _ConvPlan(st, uvars, cs, gs[bi])
            n_fft += 1
        cones.append(dict(s=s, i=ii2, j=jj2, k=kk2, v=vv2, uvars=uvars,
                          starts=starts, lk=lk, off=rc, plan=plan))
        Gr_all.append(rc + jj2 * s + ii2)  # column-major within the block
        Gc_all.append(kk2)
        Gv_all.append(-vv2)
        dims["s"].append(s)
        rc += s * s
    G = spmatrix(np.concatenate(Gv_all).tolist(),
                 np.concatenate(Gr_all).tolist(),
                 np.concatenate(Gc_all).tolist(), (rc, p))
    h = matrix(np.zeros(rc))

    state = {"factor": 0, "solves": 0, "budget_hit": False, "t_kkt": 0.0}

    def kktsolver(W):
        # conelp turns an ArithmeticError from here (past the first
        # iteration) into clean termination at the current iterate
        if (settings.time_budget is not None and state["factor"] >= 2
                and time.time() - t_start > settings.time_budget):
            state["budget_hit"] = True
            raise ArithmeticError("time budget exhausted")
        t0 = time.time()
        state["factor"] += 1
        rmats = [np.array(r) for r in W["r"]]
        Ms = [np.array(rt) @ np.array(rt).T for rt in W["rti"]]
        H = np.zeros((p, p))
        for cn, M in zip(cones, Ms):
            uv = cn["uvars"]
            if cn["plan"] is not None:
                H[np.ix_(uv, uv)] += cn["plan"].schur(M)
                continue
            ii, jj, kk, vv = cn["i"], cn["j"], cn["k"], cn["v"]
            starts, lk = cn["starts"], cn["lk"]
            nu = len(uv)
            Hloc = np.empty((nu, nu))
            for t in range(nu):
                u0, u1 = starts[t], starts[t + 1]
                U = M[:, ii[u0:u1]] * vv[u0:u1]
                B = U @ M[:, jj[u0:u1]].T
                Hloc[:, t] = np.bincount(lk, weights=vv * B[jj, ii],
                                         minlength=nu)
            H[np.ix_(uv, uv)] += Hloc
        H = 0.5 * (H + H.T)
        K = np.zeros((p + n_eq, p + n_eq))
        K[:p, :p] = H
        K[:p, p:] = Ad.T
        K[p:, :p] = Ad
        ldu, piv, info = lapack.dsytrf(K, lower=1)
        if info != 0:
            raise ArithmeticError("KKT factorization failed")
        state["t_kkt"] += time.time() - t0

        def f(x, y, z):
            state["solves"] += 1
            bx = np.array(x).ravel()
            by = np.array(y).ravel()
            bz = np.array(z).ravel()
            t1v = np.zeros(p)
            Qs = []
            for cn, M in zip(cones, Ms):
                s, off = cn["s"], cn["off"]
                B = bz[off:off + s * s].reshape(s, s).T
                B = np.tril(B) + np.tril(B, -1).T  # lower triangle is valid
                Q = M @ B @ M
                Qs.append(Q)
                np.add.at(t1v, cn["k"], -cn["v"] * Q[cn["i"], cn["j"]])
            rhs = np.concatenate([bx + t1v, by])
            sol12, _ = lapack.dsytrs(ldu, piv, rhs, lower=1)
            ux, uy = sol12[:p], sol12[p:]
            for cn, M, Q, rmat in zip(cones, Ms, Qs, rmats):
                s, off = cn["s"], cn["off"]
                Gx = np.zeros((s, s))
                np.add.at(Gx, (cn["i"], cn["j"]), -cn["v"] * ux[cn["k"]])
                Un = M @ Gx @ M - Q
                Zn = rmat.T @ Un @ rmat
                z[off:off + s * s] = matrix(Zn.T.reshape(s * s, 1))
            x[:] = matrix(ux)
            y[:] = matrix(uy)
        return f

    opts = {"show_progress": settings.verbose,
            "maxiters": settings.max_iters, "refinement": 2,
            "abstol": settings.gap_tol, "reltol": settings.gap_tol,
            "feastol": settings.feas_tol}
    try:
        sol = solvers.conelp(matrix(-(obj0 * cs)), G, h, dims, A, b,
                             kktsolver=kktsolver, options=opts)
    except ValueError as exc:
        return ConicSolution(status="failed", diagnostics={
            "error": str(exc), "time": time.time() - t_start,
            "time_budget_hit": state["budget_hit"]})

    diag = {"solver_status": sol["status"],
            "iterations": sol.get("iterations"),
            "kkt_factorizations": state["factor"],
            "kkt_solves": state["solves"],
            "kkt_time": state["t_kkt"],
            "fft_blocks": n_fft,
            "time": time.time() - t_start,
            "time_budget_hit": state["budget_hit"]}
    if sol["status"] == "primal infeasible":
        return ConicSolution(status="infeasible", diagnostics=diag)
    if sol["status"] == "dual infeasible":
        return ConicSolution(status="unbounded", diagnostics=diag)
    if sol["x"] is None or sol["y"] is None or sol["z"] is None:
        return ConicSolution(status="failed", diagnostics=diag)

    x = np.array(sol["x"]).ravel() * cs
    lam = np.array(sol["y"]).ravel() * rs
    zraw = np.array(sol["z"]).ravel()
    Sd = []
    for bi, cn in enumerate(cones):
        s, off = cn["s"], cn["off"]
        Bm = zraw[off:off + s * s].reshape(s, s).T
        Bm = np.tril(Bm) + np.tril(Bm, -1).T
        Sd.append(Bm * gs[bi][:, None] * gs[bi][None, :])

    pobj = float(obj0 @ x)
    dobj = float(lam @ rhs0)
    A0 = sparse.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(n_eq, p))
    eq_res = float(np.max(np.abs(A0 @ x - rhs0))) if n_eq else 0.0
    min_eig = np.inf
    for (s, ii, jj, kk, vv, _st) in blocks:
        B = np.zeros((s, s))
        np.add.at(B, (ii, jj), vv * x[kk])
        B = B + np.triu(B, 1).T
        min_eig = min(min_eig, float(np.linalg.eigvalsh(B)[0]))
    rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    # stationarity: objective = A^T lam - adj(S), so the residual adds back
    # the dual blocks
    dres = obj0 - A0.T @ lam
    for (s, ii, jj, kk, vv, _st), S in zip(blocks, Sd):
        w = np.where(ii == jj, 1.0, 2.0)
        np.add.at(dres, kk, vv * S[ii, jj] * w)
    diag.update(eq_residual=eq_res, min_eig=min_eig, rel_gap=rel_gap,
                dual_residual=float(np.max(np.abs(dres))),
                min_eig_dual=min(float(np.linalg.eigvalsh(S)[0]) for S in Sd))

    ok = (rel_gap <= settings.gap_tol and eq_res <= EQ_RESIDUAL_LIMIT
          and min_eig >= MIN_EIG_LIMIT)
    return ConicSolution(status="optimal" if ok else "inaccurate",
                         primal=x, dual_eq=lam, dual_psd=Sd,
                         primal_obj=pobj, dual_obj=dobj, diagnostics=diag)
