import pytest

from freqalloc.architecture import Architecture
from freqalloc.constraints import ThresholdTable
from freqalloc.graph import LatticeSpec, build_lattice
from freqalloc.solver import SolveConfig, solve

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ring():
    return build_lattice(LatticeSpec.standard("chain"))


@pytest.fixture(scope="session")
def cr_table():
    return ThresholdTable()


@pytest.fixture(scope="session")
def cz_table():
    return ThresholdTable(architecture=Architecture.CZ_QUBIT)


@pytest.fixture(scope="session")
def qutrit_table():
    return ThresholdTable(architecture=Architecture.CR_QUTRIT)


@pytest.fixture(scope="session")
def ring_cr(ring, cr_table):
    return solve(ring, cr_table, SolveConfig())


@pytest.fixture(scope="session")
def ring_cz(ring, cz_table):
    return solve(ring, cz_table, SolveConfig())


_LATTICES: dict = {}


@pytest.fixture(scope="session")
def solved_lattice(cr_table):
    """Solve a standard lattice once per session."""

    def get(kind):
        if kind not in _LATTICES:
            graph = build_lattice(LatticeSpec.standard(kind))
            _LATTICES[kind] = (graph, solve(graph, cr_table, SolveConfig()))
        return _LATTICES[kind]

    return get
