"""Device connectivity graphs.

A device is a set of transmons (nodes) and a set of directed couplings
``(control, target)``. The direction only matters for cross-resonance gates,
where the drive is applied on the control at the target frequency.

Standard lattices are built as a single unit cell with periodic boundary
conditions; wrap-around couplings are ordinary edges, so the solver and the
yield engine never need to know about tiling.

Lattice constructions
---------------------
chain
    ``n`` sites on a line, node ``i`` coupled to ``i + 1``; periodic adds
    ``(n - 1, 0)``.
square
    ``L x L`` grid, node ``r * L + c``; periodic closes both directions
    (torus). ``L >= 3`` for periodic cells.
hexagon
    Honeycomb torus with ``k = n / 2`` two-site cells arranged on a cyclic
    group ``Z_k``. Site ``A_c`` (node ``2c``) couples to ``B_c``, ``B_{c-1}``
    and ``B_{c-t}`` (node ``2c' + 1``). The twist ``t`` is the smallest value
    for which the graph is simple and free of 4-cycles, so every face is a
    hexagon. For 20 sites this gives ``k = 10, t = 3``.
heavy-hexagon
    The honeycomb torus above with one extra site on every honeycomb bond
    (data qubits on the hexagon vertices, bridge qubits on the bonds). A cell
    of ``n`` sites holds ``k = n / 5`` honeycomb cells: ``2k`` degree-3 vertex
    sites (nodes ``0 .. 2k-1``) and ``3k`` degree-2 bond sites. For 15 sites
    the vertex graph is K(3,3) and the cell has 6 degree-3 and 9 degree-2
    nodes.

Orientation rule: when the graph is bipartite, edges run from the sublattice
containing the lowest-numbered node of each component to the other one.
Otherwise every edge runs from the lower to the higher index.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .architecture import Architecture

LATTICE_KINDS = ("chain", "square", "hexagon", "heavy-hexagon", "custom")

STANDARD_CELL_SIZES = {
    "chain": 8,
    "square": 16,
    "hexagon": 20,
    "heavy-hexagon": 15,
}


class GraphError(ValueError):
    """Raised for invalid graphs or lattice requests."""


@dataclass(frozen=True)
class DeviceGraph:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "edges", tuple((int(i), int(j)) for i, j in self.edges)
        )
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def couplings(self) -> tuple[tuple[int, int], ...]:
        """Undirected couplings ``(min, max)``, in first-seen order."""
        seen: dict[tuple[int, int], None] = {}
        for i, j in self.edges:
            if i != j:
                seen.setdefault((min(i, j), max(i, j)), None)
        return tuple(seen)

    def neighbors(self, node: int) -> tuple[int, ...]:
        out = set()
        for i, j in self.edges:
            if i == node and j != node:
                out.add(j)
            elif j == node and i != node:
                out.add(i)
        return tuple(sorted(out))

    def degree(self, node: int) -> int:
        return len(self.neighbors(node))

    def degree_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for n in range(self.node_count):
            d = self.degree(n)
            hist[d] = hist.get(d, 0) + 1
        return dict(sorted(hist.items()))

    def to_dict(self) -> dict:
        out: dict = {"nodes": self.node_count, "edges": [list(e) for e in self.edges]}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceGraph":
        try:
            nodes = int(data["nodes"])
            edges = tuple((int(e[0]), int(e[1])) for e in data["edges"])
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise GraphError(f"malformed graph document: {exc}") from exc
        labels = data.get("labels")
        return cls(nodes, edges, tuple(labels) if labels is not None else None)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DeviceGraph":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class GraphViolation:
    kind: str
    detail: str


def validate(graph: DeviceGraph) -> list[GraphViolation]:
    """Every broken invariant of ``graph``, as data. Empty means valid."""
    out: list[GraphViolation] = []
    if graph.node_count < 1:
        out.append(GraphViolation("node count", f"node_count={graph.node_count}"))
    seen: set[tuple[int, int]] = set()
    for i, j in graph.edges:
        if not (0 <= i < graph.node_count and 0 <= j < graph.node_count):
            out.append(GraphViolation("node out of range", f"({i}, {j})"))
        if i == j:
            out.append(GraphViolation("self-loop", f"({i}, {j})"))
        if (i, j) in seen:
            out.append(GraphViolation("duplicate edge", f"({i}, {j})"))
        seen.add((i, j))
    if graph.labels is not None and len(graph.labels) != graph.node_count:
        out.append(
            GraphViolation(
                "label count", f"{len(graph.labels)} labels for {graph.node_count} nodes"
            )
        )
    return out


def require_valid(graph: DeviceGraph) -> DeviceGraph:
    problems = validate(graph)
    if problems:
        listing = "; ".join(f"{p.kind} {p.detail}" for p in problems)
        raise GraphError(f"invalid device graph: {listing}")
    return graph


@dataclass(frozen=True)
class SpectatorTriple:
    """Spectator ``spectator`` of the gate on directed edge (control, target).

    ``anchor`` is the endpoint the drive is applied to and whose neighbor the
    spectator is. For cross-resonance this is always the control.
    """

    control: int
    target: int
    spectator: int
    anchor: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.anchor == -1:
            object.__setattr__(self, "anchor", self.control)

    @property
    def edge(self) -> tuple[int, int]:
        return (self.control, self.target)


def spectator_triples(
    graph: DeviceGraph, arch: Architecture | str = Architecture.CR_QUBIT
) -> list[SpectatorTriple]:
    arch = Architecture.parse(arch)
    out = []
    for i, j in graph.edges:
        for k in graph.neighbors(i):
            if k != j:
                out.append(SpectatorTriple(i, j, k, i))
        if arch.is_cz:
            for k in graph.neighbors(j):
                if k != i:
                    out.append(SpectatorTriple(i, j, k, j))
    return out


@dataclass(frozen=True)
class LatticeSpec:
    kind: str
    unit_cell_size: int
    periodic: bool = True

    def __post_init__(self) -> None:
        kind = self.kind.strip().lower().replace("_", "-")
        if kind in ("heavy-hex", "heavyhex", "heavy-hexagonal"):
            kind = "heavy-hexagon"
        if kind in ("hex", "honeycomb", "hexagonal"):
            kind = "hexagon"
        if kind == "ring":
            kind = "chain"
        object.__setattr__(self, "kind", kind)

    @classmethod
    def standard(cls, kind: str) -> "LatticeSpec":
        spec = cls(kind, 0, True)
        if spec.kind not in STANDARD_CELL_SIZES:
            raise GraphError(f"no standard cell for lattice kind {kind!r}")
        return cls(spec.kind, STANDARD_CELL_SIZES[spec.kind], True)


def build_lattice(spec: LatticeSpec) -> DeviceGraph:
    if spec.kind not in LATTICE_KINDS:
        raise GraphError(
            f"unknown lattice kind {spec.kind!r}; expected one of {', '.join(LATTICE_KINDS)}"
        )
    if spec.kind == "custom":
        raise GraphError("custom lattices are loaded from a graph file, not generated")
    n = int(spec.unit_cell_size)
    if n < 1:
        raise GraphError(f"unit cell size must be positive, got {n}")
    builder = {
        "chain": _chain,
        "square": _square,
        "hexagon": _hexagon,
        "heavy-hexagon": _heavy_hexagon,
    }[spec.kind]
    couplings, labels = builder(n, spec.periodic)
    return DeviceGraph(n, tuple(orient(n, couplings)), tuple(labels))


def orient(node_count: int, couplings: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Direct undirected couplings by the bipartition rule (see module doc)."""
    couplings = [(min(a, b), max(a, b)) for a, b in couplings]
    colors = two_coloring(node_count, couplings)
    if colors is None:
        return couplings
    return [(a, b) if colors[a] == 0 else (b, a) for a, b in couplings]


def two_coloring(node_count: int, couplings: Sequence[tuple[int, int]]) -> list[int] | None:
    adj: list[list[int]] = [[] for _ in range(node_count)]
    for a, b in couplings:
        adj[a].append(b)
        adj[b].append(a)
    color = [-1] * node_count
    for root in range(node_count):
        if color[root] != -1:
            continue
        color[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if color[v] == -1:
                    color[v] = 1 - color[u]
                    queue.append(v)
                elif color[v] == color[u]:
                    return None
    return color


def _chain(n: int, periodic: bool):
    if n < 2:
        raise GraphError("a chain needs at least 2 sites")
    if periodic and n < 3:
        raise GraphError(f"periodic chain needs at least 3 sites, got {n}")
    couplings = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        couplings.append((0, n - 1))
    return couplings, [f"q{i}" for i in range(n)]


def _square(n: int, periodic: bool):
    side = int(round(n**0.5))
    if side * side != n or side < 2:
        raise GraphError(f"square cell needs a perfect-square site count >= 4, got {n}")
    if periodic and side < 3:
        raise GraphError(f"periodic square cell needs side >= 3, got {side}")
    couplings = []
    for r in range(side):
        for c in range(side):
            u = r * side + c
            if c + 1 < side or periodic:
                couplings.append((u, r * side + (c + 1) % side))
            if r + 1 < side or periodic:
                couplings.append((u, ((r + 1) % side) * side + c))
    labels = [f"q{r}_{c}" for r in range(side) for c in range(side)]
    return _dedupe(couplings), labels


def honeycomb_twist(cells: int, require_hexagonal_faces: bool) -> int:
    """Smallest twist ``t`` giving a simple (and optionally 4-cycle free) torus."""
    for t in range(2, cells):
        offsets = {0, 1 % cells, t % cells}
        if len(offsets) < 3:
            continue
        if require_hexagonal_faces:
            diffs = [1, t, t - 1]
            residues = [d % cells for d in diffs] + [(-d) % cells for d in diffs]
            if len(set(residues)) < 6:
                continue
        return t
    raise GraphError(f"no honeycomb torus closure with {cells} cells")


def _honeycomb_bonds(cells: int, twist: int) -> list[tuple[int, int]]:
    bonds = []
    for c in range(cells):
        for offset in (0, 1, twist):
            bonds.append((2 * c, 2 * ((c - offset) % cells) + 1))
    return bonds


def _hexagon(n: int, periodic: bool):
    if not periodic:
        raise GraphError("hexagon cells are only built with periodic boundaries")
    if n % 2 or n < 6:
        raise GraphError(f"hexagon cell needs an even site count >= 6, got {n}")
    cells = n // 2
    twist = honeycomb_twist(cells, require_hexagonal_faces=True)
    labels = [f"{s}{c}" for c in range(cells) for s in "AB"]
    return _honeycomb_bonds(cells, twist), labels


def _heavy_hexagon(n: int, periodic: bool):
    if not periodic:
        raise GraphError("heavy-hexagon cells are only built with periodic boundaries")
    if n % 5 or n < 15:
        raise GraphError(f"heavy-hexagon cell needs a multiple of 5 sites >= 15, got {n}")
    cells = n // 5
    twist = honeycomb_twist(cells, require_hexagonal_faces=False)
    labels = [f"{s}{c}" for c in range(cells) for s in "AB"]
    couplings = []
    bridge = 2 * cells
    for a, b in _honeycomb_bonds(cells, twist):
        couplings.append((a, bridge))
        couplings.append((b, bridge))
        labels.append(f"{labels[a]}-{labels[b]}")
        bridge += 1
    return couplings, labels


def _dedupe(couplings):
    seen: dict[tuple[int, int], None] = {}
    for a, b in couplings:
        seen.setdefault((min(a, b), max(a, b)), None)
    return list(seen)
