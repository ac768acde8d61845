"""Branch-and-bound for disjunctive linear programs.

A :class:`DisjunctiveProgram` is

    maximize  c @ x
    s.t.      G[always] @ x <= h[always]
              for every disjunction k: (all rows of side 0 hold) or (all rows of side 1 hold)
              lower <= x <= upper

which is the big-M MILP with one binary side selector ``z_k`` per
disjunction. The node LPs work in the projection of that MILP onto ``x``:
a fixed selector keeps the rows of its side, a free selector contributes the
big-M relaxation rows ``G_p x <= h_p + M`` and ``(G_p + G_q) x <= h_p + h_q + M``
(``p`` on side 0, ``q`` on side 1), which is exactly the set of ``x`` for
which some ``z`` in [0, 1] satisfies both big-M rows. Rows that the box
already implies are dropped.

Node selection is depth-first until an incumbent exists and best-first on the
LP bound afterwards, always plunging first into the child
whose side the LP point is closer to. Branching picks the most fractional
selector, i.e. the disjunction whose two sides are most evenly violated;
ties go to the earlier constraint family.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import maximize

FEAS_TOL = 1e-7


@dataclass
class DisjunctiveProgram:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    always: np.ndarray  # row indices
    sides: list[tuple[np.ndarray, np.ndarray]]  # per disjunction, row indices of each side
    priority: np.ndarray  # per disjunction, smaller branches first on ties
    big_m: float = 1e4

    def __post_init__(self) -> None:
        self.n_disj = len(self.sides)
        hi = np.where(self.G > 0, self.G * self.upper, self.G * self.lower)
        self._row_max = hi.sum(axis=1)  # max of G x over the box
        self._relax = None

    def _disjunction_rows(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        rows, rhs = [], []
        M = self.big_m
        s0, s1 = self.sides[k]
        for p in itertools.chain(s0, s1):
            if self._row_max[p] > self.h[p] + M:
                rows.append(self.G[p])
                rhs.append(self.h[p] + M)
        for p in s0:
            for q in s1:
                g = self.G[p] + self.G[q]
                top = np.where(g > 0, g * self.upper, g * self.lower).sum()
                if top > self.h[p] + self.h[q] + M:
                    rows.append(g)
                    rhs.append(self.h[p] + self.h[q] + M)
        if not rows:
            return np.zeros((0, self.c.size)), np.zeros(0)
        return np.array(rows), np.array(rhs)

    def relaxation_rows(self, free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Non-redundant big-M relaxation rows for the free disjunctions."""
        if self._relax is None:
            self._relax = [self._disjunction_rows(k) for k in range(self.n_disj)]
        parts = [self._relax[k] for k in free]
        if not parts:
            return np.zeros((0, self.c.size)), np.zeros(0)
        return np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def side_violation(self, x: np.ndarray) -> np.ndarray:
        """Largest row violation of each side at ``x``, shape (n_disj, 2)."""
        slack = self.G @ x - self.h
        out = np.empty((self.n_disj, 2))
        for k, (s0, s1) in enumerate(self.sides):
            out[k, 0] = slack[s0].max()
            out[k, 1] = slack[s1].max()
        return out

    def sides_at(self, x: np.ndarray) -> np.ndarray:
        """The less violated side of every disjunction at ``x``."""
        v = self.side_violation(x)
        return (v[:, 1] < v[:, 0]).astype(np.int8)


@dataclass
class BnBResult:
    status: str  # optimal | infeasible | limit-reached
    x: np.ndarray | None
    objective: float
    sides: np.ndarray | None
    root_bound: float
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)


class BranchAndBound:
    def __init__(
        self,
        program: DisjunctiveProgram,
        node_limit: int = 2000,
        time_limit: float | None = None,
        heuristic_every: int = 10,
    ):
        self.p = program
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.heuristic_every = heuristic_every
        self.nodes = 0
        self.lp_iterations = 0
        self.best_x: np.ndarray | None = None
        self.best_obj = -np.inf
        self.best_sides: np.ndarray | None = None

    def solve_fixed(self, sides: np.ndarray):
        """LP with every selector fixed; returns (x, objective) or (None, -inf)."""
        p = self.p
        rows = [p.always] + [p.sides[k][int(s)] for k, s in enumerate(sides)]
        idx = np.concatenate(rows) if rows else np.zeros(0, dtype=np.intp)
        res = maximize(p.c, p.G[idx], p.h[idx], p.lower, p.upper)
        self.lp_iterations += res.iterations
        if res.status != "optimal":
            return None, -np.inf
        return res.x, res.objective

    def offer(self, x: np.ndarray, obj: float, sides: np.ndarray) -> bool:
        if x is not None and obj > self.best_obj + FEAS_TOL:
            self.best_x, self.best_obj, self.best_sides = x, obj, sides.copy()
            return True
        return False

    def warm_start(self, x0: np.ndarray) -> bool:
        """Seed the incumbent from the cell containing ``x0``."""
        sides = self.p.sides_at(x0)
        x, obj = self.solve_fixed(sides)
        return self.offer(x, obj, sides)

    def _node_lp(self, fixed: np.ndarray):
        p = self.p
        free = np.flatnonzero(fixed < 0)
        parts = [p.always]
        for k in np.flatnonzero(fixed >= 0):
            parts.append(p.sides[k][int(fixed[k])])
        idx = np.concatenate(parts)
        G, h = p.G[idx], p.h[idx]
        Gr, hr = p.relaxation_rows(free)
        if len(hr):
            G, h = np.vstack([G, Gr]), np.concatenate([h, hr])
        res = maximize(p.c, G, h, p.lower, p.upper)
        self.lp_iterations += res.iterations
        return res

    def _pop(self, heap: list, stack: list):
        # depth-first until an incumbent exists, best-first afterwards
        if self.best_x is None and stack:
            return stack.pop()
        if stack:
            for item in stack:
                heapq.heappush(heap, item)
            stack.clear()
        while heap:
            item = heapq.heappop(heap)
            if -item[0] > self.best_obj + FEAS_TOL:
                return item
        return None

    def solve(self) -> BnBResult:
        p = self.p
        start = time.perf_counter()
        counter = itertools.count()
        heap: list = []
        stack: list = []
        root = np.full(p.n_disj, -1, dtype=np.int8)
        root_bound = None
        current = (-np.inf, 0, root)
        exhausted = False
        limit_hit = False
        while True:
            if current is None:
                current = self._pop(heap, stack)
                if current is None:
                    exhausted = True
                    break
            if self.nodes >= self.node_limit or (
                self.time_limit is not None and time.perf_counter() - start > self.time_limit
            ):
                limit_hit = True
                break
            neg_bound, _, fixed = current
            current = None
            if -neg_bound <= self.best_obj + FEAS_TOL:
                continue
            self.nodes += 1
            res = self._node_lp(fixed)
            if res.status == "iteration-limit":
                continue
            if root_bound is None:
                root_bound = res.objective if res.status == "optimal" else -np.inf
            if res.status != "optimal" or res.objective <= self.best_obj + FEAS_TOL:
                continue
            x = res.x
            viol = p.side_violation(x)
            free = fixed < 0
            resolved = (viol.min(axis=1) <= FEAS_TOL) | ~free
            if resolved.all():
                sides = np.where(free, (viol[:, 1] < viol[:, 0]).astype(np.int8), fixed)
                self.offer(x, res.objective, sides)
                continue
            if self.nodes == 1 or self.nodes % self.heuristic_every == 0:
                rounded = np.where(free, (viol[:, 1] < viol[:, 0]).astype(np.int8), fixed)
                hx, hobj = self.solve_fixed(rounded)
                self.offer(hx, hobj, rounded)
                if res.objective <= self.best_obj + FEAS_TOL:
                    continue
            cand = np.flatnonzero(~resolved)
            spread = np.abs(viol[cand, 0] - viol[cand, 1])
            order = np.lexsort((cand, p.priority[cand], np.round(spread, 9)))
            k = int(cand[order[0]])
            near = 0 if viol[k, 0] <= viol[k, 1] else 1
            far_child = fixed.copy()
            far_child[k] = 1 - near
            item = (-res.objective, next(counter), far_child)
            if self.best_x is None:
                stack.append(item)
            else:
                heapq.heappush(heap, item)
            near_child = fixed.copy()
            near_child[k] = near
            current = (-res.objective, next(counter), near_child)
        if root_bound is None:
            root_bound = -np.inf
        if self.best_x is None:
            status = "limit-reached" if limit_hit else "infeasible"
        else:
            status = "optimal" if exhausted else "limit-reached"
        return BnBResult(
            status,
            self.best_x,
            self.best_obj,
            self.best_sides,
            root_bound,
            self.nodes,
            self.lp_iterations,
            time.perf_counter() - start,
        )
