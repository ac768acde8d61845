"""Frequency-collision constraint catalog.

Every constraint is an affine expression over node frequencies ``f``, node
anharmonicities ``a`` and, for CZ devices, one drive frequency ``d`` per
directed edge. Three senses exist:

``avoid``
    ``|expr| >= threshold``; margin ``|expr| - threshold``.
``at-least``
    ``expr >= threshold``; margin ``expr - threshold``.
``between``
    the CZ drive band: the drive must sit between both endpoint frequencies,
    at least ``threshold`` away from each. Stored as two expressions
    ``d - f_i`` and ``d - f_j``; margin
    ``min(max(e1, e2), -min(e1, e2)) - threshold``.

A margin of exactly zero is satisfied.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .architecture import Architecture
from .graph import DeviceGraph, require_valid, spectator_triples

AVOID = "avoid"
AT_LEAST = "at-least"
BETWEEN = "between"

QUBIT_TYPES = ("A1", "A2", "C1", "E1", "E2", "D1", "S1", "S2", "T1")
QUTRIT_TYPES = ("QA1", "QA2", "QE1", "QE2", "QD1", "QS1", "QS2", "QT1", "QL")
ALL_TYPES = QUBIT_TYPES + QUTRIT_TYPES

# qutrit families reuse the threshold of their qubit analog
_THRESHOLD_FAMILY = {t: t for t in QUBIT_TYPES}
_THRESHOLD_FAMILY.update({q: q[1:] for q in QUTRIT_TYPES if q != "QL"})
_THRESHOLD_FAMILY["QL"] = "S2"

# branching priority: addressability first, then C, E, D, S, T
_PRIORITY_LETTERS = "ACEDSTQL"


def type_priority(ctype: str) -> int:
    letter = ctype[1] if ctype.startswith("Q") and len(ctype) > 2 else ctype[0]
    return _PRIORITY_LETTERS.index(letter) if letter in _PRIORITY_LETTERS else len(_PRIORITY_LETTERS)


@dataclass(frozen=True)
class ThresholdTable:
    """Collision thresholds in MHz."""

    delta_A1: float = 17.0
    delta_A2: float = 30.0
    delta_E1: float = 17.0
    delta_E2: float = 30.0
    delta_D1: float = 2.0
    delta_S1: float = 17.0
    delta_S2: float = 25.0
    delta_T1: float = 17.0
    delta_C1: float = 5.0
    architecture: Architecture = Architecture.CR_QUBIT

    def __post_init__(self) -> None:
        object.__setattr__(self, "architecture", Architecture.parse(self.architecture))
        for f in fields(self):
            if f.name.startswith("delta_"):
                value = float(getattr(self, f.name))
                if not math.isfinite(value) or value <= 0:
                    raise ValueError(f"{f.name} must be strictly positive, got {value}")
                object.__setattr__(self, f.name, value)

    def delta(self, ctype: str) -> float:
        return getattr(self, "delta_" + _THRESHOLD_FAMILY[ctype])

    @property
    def max_delta(self) -> float:
        return max(getattr(self, f.name) for f in fields(self) if f.name.startswith("delta_"))

    def with_architecture(self, arch: Architecture | str) -> "ThresholdTable":
        data = asdict(self)
        data["architecture"] = Architecture.parse(arch)
        return ThresholdTable(**data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["architecture"] = self.architecture.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "ThresholdTable":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {', '.join(sorted(unknown))}")
        return cls(**dict(data))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ThresholdTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


Edge = tuple[int, int]


@dataclass
class FrequencyAssignment:
    """Node frequencies and anharmonicities in MHz, plus CZ drive frequencies."""

    freqs: list[float]
    anharms: list[float]
    drives: dict[Edge, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.freqs = [float(f) for f in self.freqs]
        self.anharms = [float(a) for a in self.anharms]
        if len(self.freqs) != len(self.anharms):
            raise ValueError(
                f"{len(self.freqs)} frequencies but {len(self.anharms)} anharmonicities"
            )
        self.drives = {(int(i), int(j)): float(v) for (i, j), v in self.drives.items()}

    @classmethod
    def uniform_alpha(cls, freqs: Sequence[float], alpha: float, drives=None) -> "FrequencyAssignment":
        return cls(list(freqs), [alpha] * len(freqs), dict(drives or {}))

    def value(self, key) -> float:
        kind, idx = key
        if kind == "f":
            return self.freqs[idx]
        if kind == "a":
            return self.anharms[idx]
        try:
            return self.drives[idx]
        except KeyError:
            raise ValueError(f"missing drive frequency for edge {idx}") from None

    def shifted(self, offset: float) -> "FrequencyAssignment":
        return FrequencyAssignment(
            [f + offset for f in self.freqs],
            list(self.anharms),
            {e: v + offset for e, v in self.drives.items()},
        )


Term = tuple[tuple[str, object], float]


@dataclass(frozen=True)
class ConstraintInstance:
    ctype: str
    participants: tuple[int, ...]
    terms: tuple[Term, ...]
    threshold: float
    sense: str = AVOID
    const: float = 0.0
    terms2: tuple[Term, ...] = ()
    group: tuple = ()

    def expression(self, assignment: FrequencyAssignment) -> float:
        return self.const + sum(c * assignment.value(k) for k, c in self.terms)

    def margin(self, assignment: FrequencyAssignment) -> float:
        e = self.expression(assignment)
        if self.sense == AVOID:
            return abs(e) - self.threshold
        if self.sense == AT_LEAST:
            return e - self.threshold
        e2 = self.const + sum(c * assignment.value(k) for k, c in self.terms2)
        return min(max(e, e2), -min(e, e2)) - self.threshold

    def label(self) -> str:
        return f"{self.ctype}[{'-'.join(map(str, self.participants))}]"


def _f(i):
    return ("f", i)


def _a(i):
    return ("a", i)


def _terms(*pairs) -> tuple[Term, ...]:
    merged: dict = {}
    for key, coef in pairs:
        merged[key] = merged.get(key, 0.0) + coef
    return tuple((k, c) for k, c in merged.items() if c != 0.0)


def instantiate_constraints(
    graph: DeviceGraph, table: ThresholdTable | None = None
) -> list[ConstraintInstance]:
    """All collision constraints of ``graph`` for ``table.architecture``."""
    require_valid(graph)
    table = table or ThresholdTable()
    arch = table.architecture
    out: list[ConstraintInstance] = []

    def add(ctype, participants, terms, sense=AVOID, terms2=(), group=None):
        out.append(
            ConstraintInstance(
                ctype,
                tuple(participants),
                terms,
                table.delta(ctype),
                sense,
                terms2=terms2,
                group=group if group is not None else tuple(participants[:2]),
            )
        )

    couplings = graph.couplings
    for i, j in couplings:
        add("A1", (i, j), _terms((_f(i), 1), (_f(j), -1)))
    for i, j in couplings:
        for p, q in ((i, j), (j, i)):
            add("A2", (p, q), _terms((_f(p), 1), (_f(q), -1), (_a(q), -1)), group=(i, j))

    if arch.is_cz:
        _cz_entangling(graph, add)
    else:
        _cr_entangling(graph, add)
    if arch is Architecture.CR_QUTRIT:
        _qutrit_extension(graph, add)
    return out


def _cr_entangling(graph, add):
    for i, j in graph.edges:
        drive = (_f(j), 1)
        add("C1", (i, j), _terms(drive, (_f(i), -1), (_a(i), -1)), sense=AT_LEAST)
        add("C1", (i, j), _terms((_f(i), 1), (_f(j), -1)), sense=AT_LEAST)
        add("E1", (i, j), _terms(drive, (_f(i), -1)))
        add("E2", (i, j), _terms(drive, (_f(i), -1), (_a(i), -1)))
        add("D1", (i, j), _terms(drive, (_f(i), -1), (_a(i), -0.5)))
    for t in spectator_triples(graph, Architecture.CR_QUBIT):
        i, j, k = t.control, t.target, t.spectator
        drive = (_f(j), 1)
        add("S1", (i, j, k), _terms(drive, (_f(k), -1)))
        add("S2", (i, j, k), _terms(drive, (_f(k), -1), (_a(k), -1)))
        add("T1", (i, j, k), _terms(drive, (_f(k), 1), (_f(i), -2), (_a(i), -1)))


def _cz_entangling(graph, add):
    for i, j in graph.edges:
        d = ("d", (i, j))
        add(
            "C1",
            (i, j),
            _terms((d, 1), (_f(i), -1)),
            sense=BETWEEN,
            terms2=_terms((d, 1), (_f(j), -1)),
        )
        for p in (i, j):
            add("E1", (i, j, p), _terms((d, 1), (_f(p), -1)))
            add("E2", (i, j, p), _terms((d, 1), (_f(p), -1), (_a(p), -1)))
            add("D1", (i, j, p), _terms((d, 1), (_f(p), -1), (_a(p), -0.5)))
    for t in spectator_triples(graph, Architecture.CZ_QUBIT):
        i, j, k, s = t.control, t.target, t.spectator, t.anchor
        d = ("d", (i, j))
        add("S1", (i, j, k, s), _terms((d, 1), (_f(k), -1)))
        add("S2", (i, j, k, s), _terms((d, 1), (_f(k), -1), (_a(k), -1)))
        add("T1", (i, j, k, s), _terms((d, 1), (_f(k), 1), (_f(s), -2), (_a(s), -1)))


def _qutrit_extension(graph, add):
    # single-qutrit drive on the 1-2 transition of i, f_i + a_i
    for i, j in graph.couplings:
        for p, q in ((i, j), (j, i)):
            add("QA1", (p, q), _terms((_f(p), 1), (_a(p), 1), (_f(q), -1)), group=(i, j))
        add("QA2", (i, j), _terms((_f(i), 1), (_a(i), 1), (_f(j), -1), (_a(j), -1)))
        for p, q in ((i, j), (j, i)):
            # both single-transmon drives of p against the 2-3 transition of q
            add("QL", (p, q, 0), _terms((_f(p), 1), (_f(q), -1), (_a(q), -2)), group=(i, j))
            add(
                "QL",
                (p, q, 1),
                _terms((_f(p), 1), (_a(p), 1), (_f(q), -1), (_a(q), -2)),
                group=(i, j),
            )
    # entangling drive on the 1-2 transition of the target, f_j + a_j
    for i, j in graph.edges:
        drive = ((_f(j), 1), (_a(j), 1))
        add("QE1", (i, j), _terms(*drive, (_f(i), -1)))
        add("QE2", (i, j), _terms(*drive, (_f(i), -1), (_a(i), -1)))
        add("QD1", (i, j), _terms(*drive, (_f(i), -1), (_a(i), -0.5)))
        add("QL", (i, j, i, 0), _terms((_f(j), 1), (_f(i), -1), (_a(i), -2)))
        add("QL", (i, j, i, 1), _terms(*drive, (_f(i), -1), (_a(i), -2)))
    for t in spectator_triples(graph, Architecture.CR_QUBIT):
        i, j, k = t.control, t.target, t.spectator
        drive = ((_f(j), 1), (_a(j), 1))
        add("QS1", (i, j, k), _terms(*drive, (_f(k), -1)))
        add("QS2", (i, j, k), _terms(*drive, (_f(k), -1), (_a(k), -1)))
        add("QT1", (i, j, k), _terms(*drive, (_f(k), 1), (_f(i), -2), (_a(i), -1)))
        add("QL", (i, j, k, 0), _terms((_f(j), 1), (_f(k), -1), (_a(k), -2)))
        add("QL", (i, j, k, 1), _terms(*drive, (_f(k), -1), (_a(k), -2)))


def type_counts(instances: Iterable[ConstraintInstance]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for inst in instances:
        counts[inst.ctype] = counts.get(inst.ctype, 0) + 1
    return counts


@dataclass(frozen=True)
class CollisionReport:
    counts: dict[str, int]
    margins: tuple[float, ...]
    min_margin: float
    min_margin_instance: int | None
    instances: tuple[ConstraintInstance, ...] = field(repr=False, default=())

    @property
    def zero_collision(self) -> bool:
        return self.min_margin >= 0

    @property
    def total_collisions(self) -> int:
        return sum(self.counts.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["type", "participants", "threshold_mhz", "margin_mhz", "violated"])
        for inst, m in zip(self.instances, self.margins):
            writer.writerow(
                [
                    inst.ctype,
                    "-".join(map(str, inst.participants)),
                    repr(inst.threshold),
                    repr(float(m)),
                    int(m < 0),
                ]
            )
        return buf.getvalue()


def evaluate(
    assignment: FrequencyAssignment, instances: Sequence[ConstraintInstance]
) -> CollisionReport:
    """Signed margin of every instance and per-type violation counts."""
    counts = {t: 0 for t in dict.fromkeys(inst.ctype for inst in instances)}
    margins = []
    worst, worst_idx = math.inf, None
    for idx, inst in enumerate(instances):
        m = inst.margin(assignment)
        margins.append(m)
        if m < 0:
            counts[inst.ctype] += 1
        if m < worst:
            worst, worst_idx = m, idx
    return CollisionReport(counts, tuple(margins), worst, worst_idx, tuple(instances))


def is_zero_collision(
    assignment: FrequencyAssignment, instances: Sequence[ConstraintInstance]
) -> bool:
    return evaluate(assignment, instances).min_margin >= 0


class CompiledConstraints:
    """Dense-matrix form of an instance list for vectorized margin evaluation.

    Variables are ordered as node frequencies, then drives in ``drive_edges``
    order. Anharmonicities are folded in per call since they are constants
    for both the solver and the yield engine.
    """

    def __init__(
        self,
        instances: Sequence[ConstraintInstance],
        node_count: int,
        drive_edges: Sequence[Edge] = (),
    ):
        self.instances = tuple(instances)
        self.node_count = node_count
        self.drive_edges = tuple(drive_edges)
        self.drive_index = {e: k for k, e in enumerate(self.drive_edges)}
        K, n, m = len(self.instances), node_count, len(self.drive_edges)
        self.types = tuple(dict.fromkeys(inst.ctype for inst in self.instances))
        self.type_index = np.array(
            [self.types.index(inst.ctype) for inst in self.instances], dtype=np.intp
        )
        self.threshold = np.array([inst.threshold for inst in self.instances], dtype=float)
        self.const = np.array([inst.const for inst in self.instances], dtype=float)
        self.is_avoid = np.array([inst.sense == AVOID for inst in self.instances], dtype=bool)
        self.is_between = np.array([inst.sense == BETWEEN for inst in self.instances], dtype=bool)
        self.coef = np.zeros((K, n + m))
        self.alpha_coef = np.zeros((K, n))
        self.coef2 = np.zeros((K, n + m))
        self.alpha_coef2 = np.zeros((K, n))
        for r, inst in enumerate(self.instances):
            self._fill(r, inst.terms, self.coef, self.alpha_coef)
            if inst.sense == BETWEEN:
                self._fill(r, inst.terms2, self.coef2, self.alpha_coef2)

    def _fill(self, row, terms, coef, alpha_coef):
        for (kind, idx), c in terms:
            if kind == "f":
                coef[row, idx] += c
            elif kind == "a":
                alpha_coef[row, idx] += c
            else:
                try:
                    coef[row, self.node_count + self.drive_index[idx]] += c
                except KeyError:
                    raise ValueError(f"no drive variable for edge {idx}") from None

    @property
    def n_vars(self) -> int:
        return self.node_count + len(self.drive_edges)

    def offsets(self, anharms) -> tuple[np.ndarray, np.ndarray]:
        """Constant part of each expression once anharmonicities are fixed."""
        a = np.asarray(anharms, dtype=float)
        return self.const + self.alpha_coef @ a, self.const + self.alpha_coef2 @ a

    def margins(self, x: np.ndarray, anharms) -> np.ndarray:
        """Margins for variable vectors ``x`` of shape (..., n_vars)."""
        off1, off2 = self.offsets(anharms)
        e1 = x @ self.coef.T + off1
        out = np.where(self.is_avoid, np.abs(e1), e1)
        if self.is_between.any():
            e2 = x @ self.coef2.T + off2
            band = np.minimum(np.maximum(e1, e2), -np.minimum(e1, e2))
            out = np.where(self.is_between, band, out)
        return out - self.threshold

    def type_violations(self, margins: np.ndarray) -> np.ndarray:
        """Violation counts per type, shape (..., n_types)."""
        bad = margins < 0
        out = np.zeros(bad.shape[:-1] + (len(self.types),), dtype=np.int64)
        for t in range(len(self.types)):
            out[..., t] = bad[..., self.type_index == t].sum(axis=-1)
        return out
