"""Standard-form conic problems: maximize a linear objective over linear
equalities and PSD matrix blocks, all expressed over one scalar vector.

The dual convention fixed here and relied on by the moment-program modules:
dual_eq holds one multiplier per equality, normalized so that
dual_obj = sum_i dual_eq[i] * rhs_i upper-bounds the primal objective at
optimality (maximization); dual_psd holds one PSD matrix per block, and
stationarity reads objective = A^T dual_eq - sum_j adj(S_j) on every scalar.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..moments import LinearMatrixOperator

# status=optimal additionally certifies these on the returned solution,
# in original problem units
EQ_RESIDUAL_LIMIT = 1e-6
MIN_EIG_LIMIT = -1e-6


@dataclass
class Settings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-6
    max_iters: int = 500
    time_budget: float | None = None  # seconds; None = unlimited
    verbose: bool = False

    @staticmethod
    def from_env(base: "Settings | None" = None) -> "Settings":
        s = base or Settings()
        env = os.environ
        if "POLYREACH_FEAS_TOL" in env:
            s.feas_tol = float(env["POLYREACH_FEAS_TOL"])
        if "POLYREACH_GAP_TOL" in env:
            s.gap_tol = float(env["POLYREACH_GAP_TOL"])
        if "POLYREACH_MAX_ITERS" in env:
            s.max_iters = int(env["POLYREACH_MAX_ITERS"])
        if "POLYREACH_TIME_BUDGET" in env:
            s.time_budget = float(env["POLYREACH_TIME_BUDGET"])
        return s


class ConicProblem:
    """maximize objective . x  s.t.  each equality form . x = rhs and every
    psd block, evaluated at x, is positive semidefinite."""

    __slots__ = ("num_scalars", "objective", "equalities", "psd_blocks")

    def __init__(self, num_scalars, objective, equalities, psd_blocks):
        self.num_scalars = int(num_scalars)
        self.objective = tuple((int(k), float(c)) for k, c in objective)
        self.equalities = [
            (tuple((int(k), float(c)) for k, c in form), float(rhs))
            for form, rhs in equalities
        ]
        self.psd_blocks = list(psd_blocks)
        self._validate()

    def _validate(self):
        p = self.num_scalars
        for k, _ in self.objective:
            if not 0 <= k < p:
                raise ValueError("objective index out of range")
        for form, _ in self.equalities:
            for k, _ in form:
                if not 0 <= k < p:
                    raise ValueError("equality index out of range")
        for blk in self.psd_blocks:
            for _, _, form in blk.entries:
                for k, _ in form:
                    if not 0 <= k < p:
                        raise ValueError("psd block index out of range")

    def objective_value(self, x) -> float:
        return float(sum(c * x[k] for k, c in self.objective))

    def equality_residual(self, x) -> float:
        worst = 0.0
        for form, rhs in self.equalities:
            r = sum(c * x[k] for k, c in form) - rhs
            worst = max(worst, abs(r))
        return worst

    def min_block_eig(self, x) -> float:
        worst = np.inf
        for blk in self.psd_blocks:
            M = blk.apply(x)
            worst = min(worst, float(np.linalg.eigvalsh(M)[0]))
        return worst

    def to_json(self) -> dict:
        return {
            "num_scalars": self.num_scalars,
            "objective": [[k, c] for k, c in self.objective],
            "equalities": [{"lhs": [[k, c] for k, c in form], "rhs": rhs}
                           for form, rhs in self.equalities],
            "psd_blocks": [
                {"size": blk.size,
                 "entries": [{"row": i, "col": j,
                              "lhs": [[k, c] for k, c in form]}
                             for i, j, form in blk.entries]}
                for blk in self.psd_blocks
            ],
        }

    @staticmethod
    def from_json(obj) -> "ConicProblem":
        blocks = []
        for b in obj["psd_blocks"]:
            entries = [(int(e["row"]), int(e["col"]),
                        tuple((int(k), float(c)) for k, c in e["lhs"]))
                       for e in b["entries"]]
            blocks.append(LinearMatrixOperator(int(b["size"]), entries))
        return ConicProblem(
            obj["num_scalars"],
            [(k, c) for k, c in obj["objective"]],
            [([(k, c) for k, c in e["lhs"]], e["rhs"])
             for e in obj["equalities"]],
            blocks,
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def load(path) -> "ConicProblem":
        with open(path) as fh:
            return ConicProblem.from_json(json.load(fh))


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | inaccurate | failed
    primal: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    dual_psd: list = field(default_factory=list)
    primal_obj: float = float("nan")
    dual_obj: float = float("nan")
    diagnostics: dict = field(default_factory=dict)


def solve(problem: ConicProblem, settings: Settings | None = None) -> ConicSolution:
    """Solve with the embedded interior-point backend.

    Never raises on solver trouble; any backend failure comes back as
    status = "failed" with the message in diagnostics. When settings is
    None, defaults are read from POLYREACH_* environment variables.
    """
    if settings is None:
        settings = Settings.from_env()
    from . import ipm
    try:
        return ipm.solve_ipm(problem, settings)
    except Exception as exc:  # pragma: no cover - defensive
        return ConicSolution(status="failed",
                             diagnostics={"error": f"{type(exc).__name__}: {exc}"})
