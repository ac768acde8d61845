import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqalloc.architecture import Architecture
from freqalloc.graph import (
    DeviceGraph,
    GraphError,
    LatticeSpec,
    build_lattice,
    require_valid,
    spectator_triples,
    validate,
)


def undirected(graph):
    g = nx.Graph()
    g.add_nodes_from(range(graph.node_count))
    g.add_edges_from(graph.edges)
    return g


def test_periodic_chain_is_a_ring():
    g = build_lattice(LatticeSpec("chain", 8, True))
    assert g.node_count == 8
    assert len(g.couplings) == 8
    assert g.degree_histogram() == {2: 8}
    assert nx.is_isomorphic(undirected(g), nx.cycle_graph(8))


def test_open_chain_of_two():
    g = build_lattice(LatticeSpec("chain", 2, False))
    assert g.node_count == 2
    assert g.couplings == ((0, 1),)


@pytest.mark.parametrize("n", [3, 5, 8, 11])
def test_chain_coupling_counts(n):
    assert len(build_lattice(LatticeSpec("chain", n, True)).couplings) == n
    assert len(build_lattice(LatticeSpec("chain", n, False)).couplings) == n - 1


def test_square_is_4x4_torus():
    g = build_lattice(LatticeSpec.standard("square"))
    assert g.node_count == 16
    assert g.degree_histogram() == {4: 16}
    torus = nx.grid_2d_graph(4, 4, periodic=True)
    assert nx.is_isomorphic(undirected(g), torus)


def test_hexagon_cell():
    g = build_lattice(LatticeSpec.standard("hexagon"))
    u = undirected(g)
    assert g.node_count == 20
    assert g.degree_histogram() == {3: 20}
    assert nx.is_bipartite(u)
    assert nx.is_connected(u)
    # honeycomb: no triangles or squares, shortest cycles are hexagons
    assert nx.girth(u) == 6


def test_heavy_hexagon_is_subdivided_k33():
    g = build_lattice(LatticeSpec.standard("heavy-hexagon"))
    assert g.node_count == 15
    # frozen fixture from adjacency enumeration of the cell
    assert g.degree_histogram() == {2: 9, 3: 6}
    k33 = nx.complete_bipartite_graph(3, 3)
    subdivided = nx.Graph()
    for n, (a, b) in enumerate(k33.edges()):
        mid = ("m", n)
        subdivided.add_edge(a, mid)
        subdivided.add_edge(mid, b)
    assert nx.is_isomorphic(undirected(g), subdivided)
    degree2 = [n for n in range(15) if g.degree(n) == 2]
    assert degree2 == list(range(6, 15))


@pytest.mark.parametrize("kind", ["chain", "square", "hexagon", "heavy-hexagon"])
def test_standard_lattices_valid_and_bipartite_oriented(kind):
    g = build_lattice(LatticeSpec.standard(kind))
    assert validate(g) == []
    color = nx.bipartite.color(undirected(g))
    # orientation runs from node 0's class to the other
    assert all(color[i] == color[0] and color[j] != color[0] for i, j in g.edges)


def test_ring_orientation_even_to_odd():
    g = build_lattice(LatticeSpec.standard("chain"))
    assert all(i % 2 == 0 and j % 2 == 1 for i, j in g.edges)


def test_lattice_errors():
    with pytest.raises(GraphError):
        build_lattice(LatticeSpec("bogus", 8))
    with pytest.raises(GraphError):
        build_lattice(LatticeSpec("square", 15))
    with pytest.raises(GraphError):
        build_lattice(LatticeSpec("hexagon", 20, periodic=False))
    with pytest.raises(GraphError):
        build_lattice(LatticeSpec("chain", 2, periodic=True))
    with pytest.raises(GraphError):
        LatticeSpec.standard("custom")


def test_lattice_aliases():
    assert LatticeSpec("heavy_hex", 15).kind == "heavy-hexagon"
    assert LatticeSpec("ring", 8).kind == "chain"


def test_validate_examples():
    assert [v.kind for v in validate(DeviceGraph(4, ((3, 3),)))] == ["self-loop"]
    assert [v.kind for v in validate(DeviceGraph(2, ((0, 1), (0, 1))))] == ["duplicate edge"]
    assert [v.kind for v in validate(DeviceGraph(2, ((0, 2),)))] == ["node out of range"]
    assert validate(build_lattice(LatticeSpec.standard("chain"))) == []
    assert validate(DeviceGraph(2, ((0, 1), (1, 0)))) == []
    with pytest.raises(GraphError):
        require_valid(DeviceGraph(4, ((3, 3),)))


def test_json_round_trip(tmp_path):
    g = build_lattice(LatticeSpec.standard("heavy-hexagon"))
    path = tmp_path / "g.json"
    g.save(path)
    assert DeviceGraph.load(path) == g
    with pytest.raises(GraphError):
        DeviceGraph.from_dict({"edges": []})


def brute_force_triples(graph, cz):
    """Set-builder definition, enumerated over all node triples."""
    directed = set(graph.edges)
    out = set()
    for i, j, k in itertools.product(range(graph.node_count), repeat=3):
        if (i, j) not in directed or k == j:
            continue
        if (i, k) in directed or (k, i) in directed:
            out.add((i, j, k, i))
    if cz:
        for i, j, k in itertools.product(range(graph.node_count), repeat=3):
            if (i, j) not in directed or k == i:
                continue
            if (j, k) in directed or (k, j) in directed:
                out.add((i, j, k, j))
    return out


def as_set(triples):
    return {(t.control, t.target, t.spectator, t.anchor) for t in triples}


def bidirected_ring():
    g = build_lattice(LatticeSpec.standard("chain"))
    return DeviceGraph(8, tuple(g.edges) + tuple((j, i) for i, j in g.edges))


def test_spectator_counts_on_rings():
    both = bidirected_ring()
    assert len(spectator_triples(both, Architecture.CR_QUBIT)) == 16
    assert len(spectator_triples(both, Architecture.CZ_QUBIT)) == 32
    ring = build_lattice(LatticeSpec.standard("chain"))
    assert len(spectator_triples(ring, Architecture.CR_QUBIT)) == 8
    assert len(spectator_triples(ring, Architecture.CZ_QUBIT)) == 16


def test_no_spectators_on_single_edge():
    assert spectator_triples(DeviceGraph(2, ((0, 1),))) == []


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 7))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=14))
    return DeviceGraph(n, tuple(edges))


@settings(max_examples=150, deadline=None)
@given(graphs())
def test_triples_match_set_builder(graph):
    cr = spectator_triples(graph, Architecture.CR_QUBIT)
    cz = spectator_triples(graph, Architecture.CZ_QUBIT)
    assert as_set(cr) == brute_force_triples(graph, cz=False)
    assert as_set(cz) == brute_force_triples(graph, cz=True)
    assert as_set(cr) <= as_set(cz)
    directed = set(graph.edges)
    for t in cz:
        assert (t.control, t.target) in directed
        partner = t.target if t.anchor == t.control else t.control
        assert t.spectator != partner
        assert t.spectator in graph.neighbors(t.anchor)
