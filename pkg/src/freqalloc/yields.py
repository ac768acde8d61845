"""Monte-Carlo fabrication yield.

Each trial draws every node frequency independently from
``Normal(target, sigma)``; anharmonicities stay fixed. A trial succeeds when
no constraint is violated.

Random numbers come from a Philox counter stream keyed by the seed. Trial
``t`` always consumes counter block ``t``, so a trial's frequencies depend
only on ``(seed, t)`` and results do not depend on block size or on how
blocks are spread over workers.

For CZ devices the drive frequency of every edge is re-chosen per trial: the
admissible drives form the band between the two endpoint frequencies minus a
union of open exclusion intervals, one per drive-dependent constraint. The
edge works iff that set is nonempty; the drive reported is the middle of the
widest admissible gap.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .architecture import Architecture
from .constraints import (
    ALL_TYPES,
    AVOID,
    BETWEEN,
    CompiledConstraints,
    FrequencyAssignment,
    ThresholdTable,
    instantiate_constraints,
)
from .graph import DeviceGraph

DEFAULT_BLOCK = 4096


@dataclass(frozen=True)
class DispersionModel:
    sigma: float
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if int(self.trials) < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")


@dataclass(frozen=True)
class YieldEstimate:
    value: float
    stderr: float
    trials: int
    successes: int
    per_type_collision_freq: dict[str, float] = field(default_factory=dict)
    sigma: float = 0.0

    @classmethod
    def from_counts(cls, successes: int, trials: int, type_totals: dict[str, int], sigma: float):
        y = successes / trials
        return cls(
            y,
            math.sqrt(y * (1.0 - y) / trials),
            trials,
            successes,
            {t: c / trials for t, c in type_totals.items()},
            sigma,
        )

    def confidence_interval(self, z: float = 1.96) -> tuple[float, float]:
        return max(0.0, self.value - z * self.stderr), min(1.0, self.value + z * self.stderr)


def _key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)


def trial_normals(seed: int, start: int, stop: int, n: int) -> np.ndarray:
    """Standard normals for trials ``start .. stop-1``, shape (stop-start, n)."""
    stride = max(1, -(-n // 4))
    bits = np.random.Philox(key=_key(seed))
    if start:
        bits.advance(start * stride)
    raw = bits.random_raw((stop - start) * stride * 4).reshape(stop - start, stride * 4)[:, :n]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _blocks(trials: int, block: int) -> list[tuple[int, int]]:
    return [(s, min(s + block, trials)) for s in range(0, trials, block)]


def _run_blocks(fn, trials: int, block: int, workers: int):
    spans = _blocks(trials, block)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: fn(*s), spans))
    return [fn(*s) for s in spans]


def _aggregate(parts, types: Sequence[str], trials: int, sigma: float) -> YieldEstimate:
    successes = sum(int(p[0]) for p in parts)
    totals = np.zeros(len(types), dtype=np.int64)
    for p in parts:
        totals += p[1]
    return YieldEstimate.from_counts(
        successes, trials, {t: int(c) for t, c in zip(types, totals)}, sigma
    )


def _sampled(layout: FrequencyAssignment, model: DispersionModel, start: int, stop: int):
    target = np.asarray(layout.freqs, dtype=float)
    if model.sigma == 0:
        return np.broadcast_to(target, (stop - start, target.size)).copy()
    z = trial_normals(model.seed, start, stop, target.size)
    return target + model.sigma * z


def estimate_yield(
    layout: FrequencyAssignment,
    graph: DeviceGraph,
    table: ThresholdTable,
    model: DispersionModel,
    workers: int = 1,
    block: int = DEFAULT_BLOCK,
) -> YieldEstimate:
    """Zero-collision yield of a cross-resonance device (drive at the target frequency)."""
    if table.architecture.is_cz:
        raise ValueError("use estimate_yield_cz for CZ devices")
    cc = CompiledConstraints(instantiate_constraints(graph, table), graph.node_count)
    anharms = layout.anharms

    def run(start, stop):
        f = _sampled(layout, model, start, stop)
        m = cc.margins(f, anharms)
        ok = (m >= 0).all(axis=1)
        return int(ok.sum()), cc.type_violations(m).sum(axis=0)

    parts = _run_blocks(run, int(model.trials), block, workers)
    return _aggregate(parts, cc.types, int(model.trials), model.sigma)


class DriveWindows:
    """Per-edge admissible drive sets for CZ constraint lists."""

    def __init__(self, cc: CompiledConstraints):
        self.cc = cc
        n = cc.node_count
        self.node_rows = np.flatnonzero(~np.any(cc.coef[:, n:] != 0, axis=1))
        self.edges = []
        for e, edge in enumerate(cc.drive_edges):
            col = n + e
            rows = np.flatnonzero(cc.coef[:, col] != 0)
            band = [r for r in rows if cc.is_between[r]]
            avoid = [r for r in rows if cc.is_avoid[r]]
            other = set(rows) - set(band) - set(avoid)
            if len(band) != 1 or other:
                raise ValueError(f"edge {edge}: expected one drive band and avoid-type rows")
            for r in avoid:
                if abs(cc.coef[r, col]) != 1.0 or np.count_nonzero(cc.coef[r, n:]) != 1:
                    raise ValueError(f"edge {edge}: drive must enter with coefficient +-1")
            self.edges.append((col, band[0], np.array(avoid, dtype=np.intp)))

    def window(self, f: np.ndarray, anharms, edge_pos: int):
        """Feasibility, chosen drive and widest gap width for one edge.

        ``f`` has shape (T, n). Returns arrays of shape (T,).
        """
        cc = self.cc
        n = cc.node_count
        col, band_row, avoid = self.edges[edge_pos]
        a = np.asarray(anharms, dtype=float)
        # band: d - f_i and d - f_j with the drive coefficient removed
        off1, off2 = cc.offsets(a)
        r1 = f @ cc.coef[band_row, :n] + off1[band_row]
        r2 = f @ cc.coef2[band_row, :n] + off2[band_row]
        # e1 = d + r1, e2 = d + r2  ->  endpoints at -r1, -r2
        lo = np.minimum(-r1, -r2) + cc.threshold[band_row]
        hi = np.maximum(-r1, -r2) - cc.threshold[band_row]
        T = f.shape[0]
        if avoid.size:
            sgn = cc.coef[avoid, col]
            rest = f @ cc.coef[avoid, :n].T + off1[avoid]
            centers = -rest / sgn
            half = cc.threshold[avoid]
            starts = centers - half
            ends = centers + half
            order = np.argsort(starts, axis=1, kind="stable")
            starts = np.take_along_axis(starts, order, axis=1)
            ends = np.maximum.accumulate(np.take_along_axis(ends, order, axis=1), axis=1)
            prev_end = np.concatenate([np.full((T, 1), -np.inf), ends], axis=1)
            next_start = np.concatenate([starts, np.full((T, 1), np.inf)], axis=1)
        else:
            prev_end = np.full((T, 1), -np.inf)
            next_start = np.full((T, 1), np.inf)
        left = np.maximum(prev_end, lo[:, None])
        right = np.minimum(next_start, hi[:, None])
        width = right - left
        best = np.argmax(width, axis=1)
        rows = np.arange(T)
        widest = width[rows, best]
        drive = 0.5 * (left[rows, best] + right[rows, best])
        # empty band: report the band midpoint, which sits between both endpoints
        empty = lo > hi
        drive = np.where(empty, 0.5 * (lo + hi), drive)
        feasible = (widest >= 0) & ~empty
        return feasible, drive, widest


def feasible_drive_gaps(
    freqs: Sequence[float], anharms: Sequence[float], graph: DeviceGraph, table: ThresholdTable, edge
) -> list[tuple[float, float]]:
    """Admissible drive intervals of one CZ edge for a single frequency sample."""
    cc = CompiledConstraints(instantiate_constraints(graph, table), graph.node_count, graph.edges)
    windows = DriveWindows(cc)
    pos = list(graph.edges).index(tuple(edge))
    col, band_row, avoid = windows.edges[pos]
    n = cc.node_count
    f = np.asarray(freqs, dtype=float)
    off1, off2 = cc.offsets(anharms)
    r1 = f @ cc.coef[band_row, :n] + off1[band_row]
    r2 = f @ cc.coef2[band_row, :n] + off2[band_row]
    lo = min(-r1, -r2) + cc.threshold[band_row]
    hi = max(-r1, -r2) - cc.threshold[band_row]
    if lo > hi:
        return []
    excl = []
    for r in avoid:
        c = -(f @ cc.coef[r, :n] + off1[r]) / cc.coef[r, col]
        excl.append((c - cc.threshold[r], c + cc.threshold[r]))
    excl.sort()
    gaps, cursor = [], lo
    for s, e in excl:
        if s >= cursor and cursor <= hi:
            gaps.append((cursor, min(s, hi)))
        cursor = max(cursor, e)
    if cursor <= hi:
        gaps.append((cursor, hi))
    return [(a, b) for a, b in gaps if b >= a]


def estimate_yield_cz(
    layout: FrequencyAssignment,
    graph: DeviceGraph,
    table: ThresholdTable,
    model: DispersionModel,
    workers: int = 1,
    block: int = DEFAULT_BLOCK,
) -> YieldEstimate:
    """Yield of a CZ device with the drive of every edge re-chosen per trial."""
    if not table.architecture.is_cz:
        raise ValueError("estimate_yield_cz needs a CZ threshold table")
    cc = CompiledConstraints(instantiate_constraints(graph, table), graph.node_count, graph.edges)
    windows = DriveWindows(cc)
    anharms = layout.anharms
    drive_rows = np.setdiff1d(np.arange(len(cc.types)), windows.node_rows)

    def run(start, stop):
        f = _sampled(layout, model, start, stop)
        T = f.shape[0]
        ok = np.ones(T, dtype=bool)
        drives = np.empty((T, len(graph.edges)))
        for e in range(len(graph.edges)):
            feasible, drive, _ = windows.window(f, anharms, e)
            ok &= feasible
            drives[:, e] = drive
        x = np.concatenate([f, drives], axis=1)
        m = cc.margins(x, anharms)
        node_m = m[:, windows.node_rows]
        ok &= (node_m >= 0).all(axis=1)
        # drive rows are judged by the window test; tiny negatives are rounding
        m[:, drive_rows] = np.where(m[:, drive_rows] > -1e-9, 0.0, m[:, drive_rows])
        return int(ok.sum()), cc.type_violations(m).sum(axis=0)

    parts = _run_blocks(run, int(model.trials), block, workers)
    return _aggregate(parts, cc.types, int(model.trials), model.sigma)


def estimate(
    layout: FrequencyAssignment,
    graph: DeviceGraph,
    table: ThresholdTable,
    model: DispersionModel,
    workers: int = 1,
) -> YieldEstimate:
    fn = estimate_yield_cz if table.architecture.is_cz else estimate_yield
    return fn(layout, graph, table, model, workers=workers)


def yield_sweep(
    layout: FrequencyAssignment,
    graph: DeviceGraph,
    table: ThresholdTable,
    sigmas: Sequence[float],
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> list[tuple[float, YieldEstimate]]:
    return [
        (float(s), estimate(layout, graph, table, DispersionModel(float(s), trials, seed), workers))
        for s in sigmas
    ]


def scale_yield(y_m: float, n_m: int, N: int) -> float:
    """Yield of an ``N``-site lattice tiled from a unit cell of ``n_m`` sites.

    ``y_m ** (N / n_m)``. Boundary sites have fewer neighbors and hence fewer
    possible collisions, so this is a lower bound for a finite lattice.
    """
    if not 0.0 <= y_m <= 1.0:
        raise ValueError(f"unit-cell yield must lie in [0, 1], got {y_m}")
    if int(n_m) != n_m or n_m < 1:
        raise ValueError(f"unit-cell size must be a positive integer, got {n_m}")
    if int(N) != N or N < 1:
        raise ValueError(f"lattice size must be a positive integer, got {N}")
    return y_m ** (N / n_m)


class UnreachableTarget(ValueError):
    """The requested scaled yield is not crossed in the searched sigma range."""


def dispersion_for_target_yield(
    layout: FrequencyAssignment,
    graph: DeviceGraph,
    table: ThresholdTable,
    target_yield: float,
    N: int,
    trials: int = 10_000,
    seed: int = 0,
    sigma_max: float = 200.0,
    tol: float = 0.5,
    workers: int = 1,
) -> float:
    """Dispersion at which the scaled yield of an ``N``-site lattice hits ``target_yield``."""
    if not 0.0 < target_yield < 1.0:
        raise ValueError(f"target yield must lie in (0, 1), got {target_yield}")
    n_m = graph.node_count

    def scaled(sigma: float) -> float:
        est = estimate(layout, graph, table, DispersionModel(sigma, trials, seed), workers)
        return scale_yield(est.value, n_m, N)

    lo, hi = 0.0, float(sigma_max)
    if scaled(lo) < target_yield:
        raise UnreachableTarget(f"scaled yield is below {target_yield} even at sigma = 0")
    if scaled(hi) >= target_yield:
        raise UnreachableTarget(f"scaled yield stays above {target_yield} up to sigma = {hi}")
    while hi - lo > 2 * tol:
        mid = 0.5 * (lo + hi)
        if scaled(mid) >= target_yield:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sweep_csv(
    rows: Sequence[tuple[float, YieldEstimate]],
    scale_n: int | None = None,
    n_m: int | None = None,
) -> str:
    """Sweep table: sigma, yield, stderr, optional scaled yield, then one column per type."""
    present = set()
    for _, est in rows:
        present.update(est.per_type_collision_freq)
    types = [t for t in ALL_TYPES if t in present]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["sigma_mhz", "yield", "stderr"]
    if scale_n is not None:
        header.append(f"scaled_yield_N{scale_n}")
    writer.writerow(header + types)
    for sigma, est in rows:
        line = [repr(float(sigma)), repr(est.value), repr(est.stderr)]
        if scale_n is not None:
            line.append(repr(scale_yield(est.value, n_m, scale_n)))
        line += [repr(est.per_type_collision_freq.get(t, 0.0)) for t in types]
        writer.writerow(line)
    return buf.getvalue()
