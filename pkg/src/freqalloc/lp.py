"""Dense-tableau simplex for the small LPs inside branch-and-bound.

The allocation LPs have few variables (frequencies, drives, radii) and many
rows, so :func:`maximize` solves the dual, whose tableau has one row per
primal variable. Pricing is Dantzig's most-negative reduced cost; after a run
of degenerate pivots the solver switches to Bland's rule, which cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9
_DEGENERATE_SWITCH = 25


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray | None
    objective: float
    iterations: int


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, max_iter: int):
        rows, cols = A.shape
        self.sign = np.where(b < 0, -1.0, 1.0)
        self.n_real = cols
        self.T = np.empty((rows, cols + rows + 1))
        self.T[:, :cols] = A * self.sign[:, None]
        self.T[:, cols : cols + rows] = np.eye(rows)
        self.T[:, -1] = b * self.sign
        self.basis = np.arange(cols, cols + rows)
        self.iterations = 0
        self.max_iter = max_iter

    @classmethod
    def from_basis(cls, A: np.ndarray, b: np.ndarray, basis: np.ndarray, max_iter: int):
        """Tableau whose ``basis`` columns are signed unit vectors of ``A``."""
        self = cls.__new__(cls)
        rows, cols = A.shape
        signs = A[np.arange(rows), basis]
        self.sign = signs
        self.n_real = cols
        self.T = np.empty((rows, cols + 1))
        self.T[:, :cols] = A * signs[:, None]
        self.T[:, -1] = b * signs
        self.basis = np.asarray(basis, dtype=np.intp).copy()
        self.iterations = 0
        self.max_iter = max_iter
        return self

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
        self.basis[r] = j
        self.iterations += 1

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Minimize ``cost`` over the current basis; ``allowed`` masks entering columns."""
        T = self.T
        bland = False
        degenerate = 0
        reduced = cost - cost[self.basis] @ T[:, :-1]
        while True:
            if self.iterations >= self.max_iter:
                return "iteration-limit"
            candidates = np.flatnonzero(allowed & (reduced < -TOL))
            if candidates.size == 0:
                return "optimal"
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmin(reduced[candidates])])
            column = T[:, j]
            rows = np.flatnonzero(column > TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + TOL * max(1.0, abs(best))]
            # Bland: among tied rows leave the smallest basic index
            r = int(ties[np.argmin(self.basis[ties])])
            if best <= TOL:
                degenerate += 1
                if degenerate >= _DEGENERATE_SWITCH:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, j)
            reduced = reduced - reduced[j] * T[r, :-1]


def simplex(c: np.ndarray, A: np.ndarray, b: np.ndarray, max_iter: int = 50_000):
    """Minimize ``c @ y`` subject to ``A @ y == b``, ``y >= 0``.

    Returns ``(status, y, multipliers, iterations)``. The multipliers ``pi``
    satisfy ``reduced_cost = c - A.T @ pi`` at the optimum.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    rows, cols = A.shape
    tab = _Tableau(A, b, max_iter)
    width = cols + rows
    real = np.zeros(width, dtype=bool)
    real[:cols] = True

    phase1 = np.concatenate([np.zeros(cols), np.ones(rows)])
    status = tab.run(phase1, np.ones(width, dtype=bool))
    if status == "iteration-limit":
        return status, None, None, tab.iterations
    if tab.T[:, -1] @ phase1[tab.basis] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return "infeasible", None, None, tab.iterations

    # drive zero-level artificials out of the basis where possible
    for r in range(rows):
        if tab.basis[r] >= cols:
            nz = np.flatnonzero(np.abs(tab.T[r, :cols]) > TOL)
            if nz.size:
                tab.pivot(r, int(nz[0]))

    phase2 = np.concatenate([c, np.zeros(rows)])
    status = tab.run(phase2, real)
    if status != "optimal":
        return status, None, None, tab.iterations
    y = np.zeros(cols)
    mask = tab.basis < cols
    y[tab.basis[mask]] = tab.T[mask, -1]
    reduced = phase2 - phase2[tab.basis] @ tab.T[:, :-1]
    # artificial column i is e_i of the sign-flipped system
    multipliers = -reduced[cols:] * tab.sign
    return "optimal", y, multipliers, tab.iterations


def maximize(
    c: np.ndarray,
    A_ub: np.ndarray,
    b_ub: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iter: int = 50_000,
) -> LPResult:
    """Maximize ``c @ x`` subject to ``A_ub @ x <= b_ub`` and finite box bounds.

    Solved through the dual ``min b @ y, A.T @ y = c, y >= 0``; the primal
    point is read off the dual multipliers. The bound rows give the dual a
    feasible starting basis, so no first phase is needed.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper + TOL):
        return LPResult("infeasible", None, -np.inf, 0)
    A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n)
    eye = np.eye(n)
    A = np.vstack([A_ub, eye, -eye])
    b = np.concatenate([np.asarray(b_ub, dtype=float), upper, -lower])
    m = A_ub.shape[0]
    idx = np.arange(n)
    start = np.where(c >= 0, m + idx, m + n + idx)
    tab = _Tableau.from_basis(A.T, c, start, max_iter)
    status = tab.run(b, np.ones(A.shape[0], dtype=bool))
    nit = tab.iterations
    if status == "optimal":
        reduced = b - b[tab.basis] @ tab.T[:, :-1]
        x = (b[start] - reduced[start]) / tab.sign
    if status == "unbounded":
        return LPResult("infeasible", None, -np.inf, nit)
    if status != "optimal":
        return LPResult(status, None, -np.inf, nit)
    x = np.clip(x, lower, upper)
    return LPResult("optimal", x, float(c @ x), nit)
