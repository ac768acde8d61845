"""Robust frequency allocation.

Three successive disjunctive programs push the target frequencies away from
every collision region:

1. one common radius ``R``: every constraint must hold with margin ``>= R``;
2. one radius per constraint type, each ``>= R``, maximizing their sum;
3. one radius per (type, edge) group, each ``>= floor_fraction * R_type``,
   maximizing their sum.

Each program is solved by :class:`~freqalloc.bnb.BranchAndBound`. Simulated
annealing on the minimum margin supplies the step-1 starting incumbent and is
the answer of last resort when branch-and-bound finds nothing. Later steps
start from the previous solution, which is always feasible for them.

Pinning node 0 to the middle of the band (``pin_first_node``) removes the
translation degeneracy but can cut off the optimum once the band binds, so
it is off by default.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .architecture import Architecture
from .bnb import BranchAndBound, DisjunctiveProgram
from .constraints import (
    AT_LEAST,
    AVOID,
    BETWEEN,
    CompiledConstraints,
    FrequencyAssignment,
    ThresholdTable,
    evaluate,
    instantiate_constraints,
    type_priority,
)
from .graph import DeviceGraph, require_valid

STATUSES = ("optimal", "feasible-heuristic", "infeasible", "limit-reached")


class InfeasibleError(RuntimeError):
    """No zero-collision layout was found."""


@dataclass(frozen=True)
class SolveConfig:
    band: tuple[float, float] = (4600.0, 5400.0)
    alpha: float = -330.0
    big_M: float | None = None
    node_limit: int = 2000
    time_limit: float | None = None
    fallback: str = "anneal"
    seed: int = 0
    radius_cap: float | None = None
    step3_floor_fraction: float = 1.0
    anneal_iterations: int = 20_000
    refine_node_limit: int = 100
    pin_first_node: bool = False

    def __post_init__(self) -> None:
        lo, hi = (float(v) for v in self.band)
        if not hi > lo:
            raise ValueError(f"allocation band must be nonempty, got [{lo}, {hi}]")
        object.__setattr__(self, "band", (lo, hi))
        if self.fallback not in ("none", "anneal"):
            raise ValueError(f"fallback must be 'none' or 'anneal', got {self.fallback!r}")
        if self.node_limit < 1 or self.refine_node_limit < 1:
            raise ValueError("node limits must be at least 1")
        if not 0.0 <= self.step3_floor_fraction <= 1.0:
            raise ValueError("step3_floor_fraction must lie in [0, 1]")

    @property
    def width(self) -> float:
        return self.band[1] - self.band[0]

    @property
    def mid(self) -> float:
        return 0.5 * (self.band[0] + self.band[1])

    def effective_big_m(self, table: ThresholdTable) -> float:
        minimum = self.width + 2 * abs(self.alpha) + table.max_delta
        if self.big_M is None:
            return minimum + 1.0
        if self.big_M < minimum:
            raise ValueError(f"big_M must be at least {minimum} MHz, got {self.big_M}")
        return float(self.big_M)

    @property
    def cap(self) -> float:
        return float(self.radius_cap) if self.radius_cap is not None else self.width


@dataclass
class SolveResult:
    assignment: FrequencyAssignment | None
    R: float
    R_type: dict[str, float]
    R_edge: dict[str, float]
    status: str
    stats: dict = field(default_factory=dict)
    min_margin: float = -math.inf
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible-heuristic", "limit-reached") and (
            self.assignment is not None and self.min_margin >= 0
        )

    def to_dict(self, graph: DeviceGraph | None = None, table: ThresholdTable | None = None) -> dict:
        a = self.assignment
        out = {
            "status": self.status,
            "R": self.R,
            "R_type": dict(self.R_type),
            "R_edge": dict(self.R_edge),
            "min_margin": self.min_margin,
            "frequencies": list(a.freqs) if a else None,
            "anharmonicities": list(a.anharms) if a else None,
            "drives": [[i, j, v] for (i, j), v in a.drives.items()] if a else [],
            "stats": dict(self.stats),
            "notes": list(self.notes),
        }
        if table is not None:
            out["architecture"] = table.architecture.value
        if graph is not None:
            out["graph"] = graph.to_dict()
        return out


def drive_edges(graph: DeviceGraph, table: ThresholdTable) -> tuple[tuple[int, int], ...]:
    return tuple(graph.edges) if table.architecture.is_cz else ()


def group_key(inst) -> str:
    return f"{inst.ctype}:{'-'.join(map(str, inst.group))}"


class _Problem:
    """Constraint data shared by the three steps (variables centered on the band)."""

    def __init__(self, graph: DeviceGraph, table: ThresholdTable, config: SolveConfig):
        require_valid(graph)
        self.graph, self.table, self.config = graph, table, config
        self.instances = instantiate_constraints(graph, table)
        self.drives = drive_edges(graph, table)
        self.cc = CompiledConstraints(self.instances, graph.node_count, self.drives)
        self.n = self.cc.n_vars
        self.anharms = [config.alpha] * graph.node_count
        off1, off2 = self.cc.offsets(self.anharms)
        mid = config.mid
        # expressions in centered variables y = x - mid
        self.off1 = off1 + mid * self.cc.coef.sum(axis=1)
        self.off2 = off2 + mid * self.cc.coef2.sum(axis=1)

    def assignment(self, y: np.ndarray) -> FrequencyAssignment:
        x = np.asarray(y[: self.n], dtype=float) + self.config.mid
        n = self.graph.node_count
        drives = {e: float(x[n + k]) for k, e in enumerate(self.drives)}
        return FrequencyAssignment(list(map(float, x[:n])), list(self.anharms), drives)

    def program(
        self,
        groups: np.ndarray,
        floors: np.ndarray,
        pin_first: bool,
    ) -> DisjunctiveProgram:
        cc, n, cfg = self.cc, self.n, self.config
        n_groups = len(floors)
        width = n + n_groups
        rows_G, rows_h = [], []

        def row(coef, off, g, sign):
            # sign * (coef @ y + off) >= delta + r_g
            r = np.zeros(width)
            r[:n] = -sign * coef
            r[n + g] = 1.0
            rows_G.append(r)
            rows_h.append(sign * off - delta)
            return len(rows_G) - 1

        always, sides, priority = [], [], []
        for k, inst in enumerate(cc.instances):
            delta = inst.threshold
            g = int(groups[k])
            if inst.sense == AT_LEAST:
                always.append(row(cc.coef[k], self.off1[k], g, 1.0))
            elif inst.sense == AVOID:
                up = row(cc.coef[k], self.off1[k], g, 1.0)
                down = row(cc.coef[k], self.off1[k], g, -1.0)
                sides.append((np.array([up]), np.array([down])))
                priority.append(type_priority(inst.ctype))
            elif inst.sense == BETWEEN:
                a = row(cc.coef[k], self.off1[k], g, 1.0)
                b = row(cc.coef2[k], self.off2[k], g, -1.0)
                c = row(cc.coef[k], self.off1[k], g, -1.0)
                d = row(cc.coef2[k], self.off2[k], g, 1.0)
                sides.append((np.array([a, b]), np.array([c, d])))
                priority.append(type_priority(inst.ctype))
        lower = np.empty(width)
        upper = np.empty(width)
        lower[:n] = cfg.band[0] - cfg.mid
        upper[:n] = cfg.band[1] - cfg.mid
        if pin_first and self.graph.node_count:
            lower[0] = upper[0] = 0.0
        lower[n:] = floors
        upper[n:] = np.maximum(cfg.cap, floors)
        c = np.zeros(width)
        c[n:] = 1.0
        G = np.array(rows_G) if rows_G else np.zeros((0, width))
        return DisjunctiveProgram(
            c=c,
            G=G,
            h=np.array(rows_h, dtype=float),
            lower=lower,
            upper=upper,
            always=np.array(always, dtype=np.intp),
            sides=sides,
            priority=np.array(priority, dtype=np.intp),
            big_m=cfg.effective_big_m(self.table),
        )

    def centered(self, assignment: FrequencyAssignment) -> np.ndarray:
        x = list(assignment.freqs) + [assignment.drives[e] for e in self.drives]
        return np.asarray(x, dtype=float) - self.config.mid

    def margins(self, assignment: FrequencyAssignment) -> np.ndarray:
        x = self.centered(assignment) + self.config.mid
        return self.cc.margins(x, self.anharms)


def _run_step(
    prob: _Problem,
    groups: np.ndarray,
    floors: np.ndarray,
    pin_first: bool,
    start: FrequencyAssignment | None,
    node_limit: int,
):
    cfg = prob.config
    program = prob.program(groups, floors, pin_first)
    bnb = BranchAndBound(program, node_limit=node_limit, time_limit=cfg.time_limit)
    seeded = False
    if start is not None:
        y0 = np.concatenate([prob.centered(start), floors])
        seeded = bnb.warm_start(y0)
    seed_obj = bnb.best_obj
    res = bnb.solve()
    stats = {
        "warm_start": seeded,
        "improved_warm_start": bool(res.objective > seed_obj + 1e-7) if seeded else None,
        "nodes": res.nodes,
        "lp_iterations": res.lp_iterations,
        "wall_time": res.wall_time,
        "root_bound": res.root_bound,
        "objective": res.objective if res.x is not None else None,
    }
    return res, stats


def _finish(prob: _Problem, y, status, stats, R, R_type, R_edge, notes=()):
    assignment = prob.assignment(y) if y is not None else None
    min_margin = -math.inf
    if assignment is not None:
        report = evaluate(assignment, prob.instances)
        min_margin = report.min_margin
        if status in ("optimal", "feasible-heuristic", "limit-reached") and min_margin < -1e-6:
            notes = list(notes) + [f"evaluator rejected layout (min margin {min_margin:.3g})"]
            status = "infeasible"
    return SolveResult(assignment, R, R_type, R_edge, status, stats, min_margin, list(notes))


def _types(prob: _Problem) -> list[str]:
    return list(prob.cc.types)


def solve_step1(
    graph: DeviceGraph,
    table: ThresholdTable,
    config: SolveConfig,
    start: FrequencyAssignment | None = None,
    _prob=None,
) -> SolveResult:
    """Largest common margin ``R`` over every constraint."""
    prob = _prob or _Problem(graph, table, config)
    K = len(prob.instances)
    if K == 0:
        y = np.zeros(prob.n)
        return _finish(
            prob, y, "optimal", {"nodes": 0, "lp_iterations": 0, "wall_time": 0.0},
            config.cap, {}, {}, [f"no constraints; radius clamped to cap {config.cap} MHz"],
        )
    res, stats = _run_step(
        prob, np.zeros(K, dtype=np.intp), np.zeros(1), config.pin_first_node, start,
        config.node_limit,
    )
    if res.x is None:
        return _finish(prob, None, res.status, stats, -math.inf, {}, {})
    R = float(res.x[prob.n])
    return _finish(prob, res.x, res.status, stats, R, {t: R for t in _types(prob)}, {})


def solve_step2(
    graph: DeviceGraph,
    table: ThresholdTable,
    config: SolveConfig,
    R_floor: float,
    start: FrequencyAssignment | None = None,
    _prob=None,
) -> SolveResult:
    """One radius per constraint type, each at least ``R_floor``."""
    prob = _prob or _Problem(graph, table, config)
    types = _types(prob)
    if not types:
        return solve_step1(graph, table, config, _prob=prob)
    groups = prob.cc.type_index.copy()
    floors = np.full(len(types), max(float(R_floor), 0.0))
    res, stats = _run_step(prob, groups, floors, False, start, config.refine_node_limit)
    if res.x is None:
        return _finish(prob, None, res.status, stats, R_floor, {}, {})
    radii = res.x[prob.n :]
    R_type = {t: float(radii[i]) for i, t in enumerate(types)}
    return _finish(prob, res.x, res.status, stats, R_floor, R_type, {})


def solve_step3(
    graph: DeviceGraph,
    table: ThresholdTable,
    config: SolveConfig,
    R_type_floor: dict[str, float],
    start: FrequencyAssignment | None = None,
    R: float | None = None,
    _prob=None,
) -> SolveResult:
    """One radius per (type, edge) group, floored at a fraction of its type radius."""
    prob = _prob or _Problem(graph, table, config)
    keys = list(dict.fromkeys(group_key(inst) for inst in prob.instances))
    if not keys:
        return solve_step1(graph, table, config, _prob=prob)
    index = {k: i for i, k in enumerate(keys)}
    groups = np.array([index[group_key(inst)] for inst in prob.instances], dtype=np.intp)
    frac = config.step3_floor_fraction
    floors = np.array(
        [max(frac * float(R_type_floor.get(k.split(":")[0], 0.0)), 0.0) for k in keys]
    )
    res, stats = _run_step(prob, groups, floors, False, start, config.refine_node_limit)
    base_R = R if R is not None else min(R_type_floor.values(), default=0.0)
    if res.x is None:
        return _finish(prob, None, res.status, stats, base_R, dict(R_type_floor), {})
    radii = res.x[prob.n :]
    R_edge = {k: float(radii[i]) for i, k in enumerate(keys)}
    return _finish(prob, res.x, res.status, stats, base_R, dict(R_type_floor), R_edge)


def anneal_fallback(
    graph: DeviceGraph,
    table: ThresholdTable,
    config: SolveConfig,
    iterations: int | None = None,
    _prob=None,
) -> SolveResult:
    """Simulated annealing on the minimum margin, with restarts."""
    prob = _prob or _Problem(graph, table, config)
    cfg = config
    iterations = cfg.anneal_iterations if iterations is None else int(iterations)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.band
    n_nodes = graph.node_count
    cc = prob.cc
    start_time = time.perf_counter()

    def initial():
        f = rng.uniform(lo, hi, size=n_nodes)
        d = [0.5 * (f[i] + f[j]) for i, j in prob.drives]
        return np.concatenate([f, d]) if d else f

    def energy(x):
        m = cc.margins(x, prob.anharms)
        if m.size == 0:
            return 0.0, math.inf
        worst = float(m.min())
        shortfall = float(np.minimum(m, 0.0).sum())
        return -worst - 0.1 * shortfall, worst

    x = initial()
    e, worst = energy(x)
    best_x, best_worst = x.copy(), worst
    restarts = 4
    per_run = iterations // restarts if iterations >= restarts else iterations
    n_vars = x.size
    it = 0
    for run in range(restarts if iterations else 0):
        if run:
            x = initial()
            e, worst = energy(x)
        t0, t1 = 50.0, 0.05
        for step in range(per_run):
            frac = step / max(per_run - 1, 1)
            temp = t0 * (t1 / t0) ** frac
            scale = max(cfg.width * 0.25 * (1 - frac), 1.0)
            cand = x.copy()
            k = int(rng.integers(n_vars))
            cand[k] = np.clip(cand[k] + rng.normal(0.0, scale), lo, hi)
            ce, cw = energy(cand)
            if ce <= e or rng.random() < math.exp(-(ce - e) / temp):
                x, e, worst = cand, ce, cw
                if worst > best_worst:
                    best_x, best_worst = x.copy(), worst
            it += 1
    y = best_x - cfg.mid
    status = "feasible-heuristic" if best_worst >= 0 else "infeasible"
    stats = {"iterations": it, "wall_time": time.perf_counter() - start_time}
    notes = [] if best_worst >= 0 else ["annealing found no zero-collision layout; best point returned"]
    types = _types(prob)
    R = float(best_worst)
    return _finish(prob, y, status, stats, R, {t: R for t in types}, {}, notes)


def polish(prob: _Problem, assignment: FrequencyAssignment) -> tuple[np.ndarray | None, float]:
    """Best common radius inside the collision-free cell containing ``assignment``."""
    K = len(prob.instances)
    program = prob.program(np.zeros(K, dtype=np.intp), np.zeros(1), False)
    bnb = BranchAndBound(program, node_limit=1)
    ok = bnb.warm_start(np.concatenate([prob.centered(assignment), [0.0]]))
    return (bnb.best_x, bnb.best_obj) if ok else (None, -math.inf)


def solve(graph: DeviceGraph, table: ThresholdTable | None = None, config: SolveConfig | None = None) -> SolveResult:
    """Run steps 1 to 3 and return the final layout."""
    table = table or ThresholdTable()
    config = config or SolveConfig()
    prob = _Problem(graph, table, config)
    wall = time.perf_counter()
    steps: dict[str, dict] = {}
    fb = None
    seed = None
    if config.fallback == "anneal" and prob.instances:
        # the annealed cell doubles as the step-1 incumbent
        fb = anneal_fallback(graph, table, config, _prob=prob)
        steps["anneal"] = fb.stats
        if fb.status == "feasible-heuristic":
            y, _ = polish(prob, fb.assignment)
            seed = prob.assignment(y) if y is not None else fb.assignment
    s1 = solve_step1(graph, table, config, start=seed, _prob=prob)
    steps["step1"] = s1.stats
    if s1.assignment is None or s1.min_margin < 0:
        out = fb if fb is not None and fb.assignment is not None else s1
        out.status = "infeasible"
        out.notes = list(out.notes) + (
            ["search limit reached without a zero-collision layout"]
            if s1.status == "limit-reached"
            else []
        )
        out.stats = {"steps": steps, "wall_time": time.perf_counter() - wall}
        return out
    if not prob.instances:
        s1.stats = {"steps": steps, "wall_time": time.perf_counter() - wall}
        return s1
    heuristic = s1.status != "optimal" and not s1.stats.get("improved_warm_start", True)
    R = s1.R
    s2 = solve_step2(graph, table, config, R, start=s1.assignment, _prob=prob)
    steps["step2"] = s2.stats
    if s2.assignment is None or s2.min_margin < 0:
        s2 = replace(s1)
    s3 = solve_step3(graph, table, config, s2.R_type, start=s2.assignment, R=R, _prob=prob)
    steps["step3"] = s3.stats
    final = s3 if (s3.assignment is not None and s3.min_margin >= 0) else s2
    final.R = R
    final.R_type = s2.R_type
    statuses = [s1.status, s2.status, s3.status]
    if all(s == "optimal" for s in statuses):
        final.status = "optimal"
    elif heuristic:
        final.status = "feasible-heuristic"
    else:
        final.status = "limit-reached"
    final.stats = {
        "steps": steps,
        "nodes": sum(s.get("nodes", 0) for s in steps.values()),
        "lp_iterations": sum(s.get("lp_iterations", 0) for s in steps.values()),
        "wall_time": time.perf_counter() - wall,
    }
    final.notes = list(s1.notes) + list(final.notes)
    return final
