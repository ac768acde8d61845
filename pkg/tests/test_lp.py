import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from freqalloc.bnb import BranchAndBound, DisjunctiveProgram
from freqalloc.lp import maximize, simplex


def random_lp(rng, n, m):
    A = rng.normal(size=(m, n))
    b = rng.uniform(-2, 5, size=m)
    c = rng.normal(size=n)
    lo = rng.uniform(-5, 0, size=n)
    hi = lo + rng.uniform(0.1, 6, size=n)
    return c, A, b, lo, hi


def test_maximize_matches_highs():
    rng = np.random.default_rng(11)
    solved = infeasible = 0
    for _ in range(300):
        n, m = rng.integers(1, 7), rng.integers(0, 12)
        c, A, b, lo, hi = random_lp(rng, n, m)
        ref = linprog(-c, A_ub=A if m else None, b_ub=b if m else None,
                      bounds=list(zip(lo, hi)), method="highs")
        got = maximize(c, A, b, lo, hi)
        if ref.status == 2:
            assert got.status == "infeasible"
            infeasible += 1
            continue
        assert ref.status == 0
        assert got.status == "optimal"
        assert got.objective == pytest.approx(-ref.fun, abs=1e-7)
        assert np.all(A @ got.x <= b + 1e-7)
        assert np.all(got.x >= lo - 1e-9) and np.all(got.x <= hi + 1e-9)
        solved += 1
    assert solved > 50 and infeasible > 10


def test_maximize_small_example():
    # max x + y, x + 2y <= 4, 3x + y <= 6, 0 <= x, y <= 10 -> (1.6, 1.2)
    res = maximize(np.array([1.0, 1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]),
                   np.array([4.0, 6.0]), np.zeros(2), np.full(2, 10.0))
    assert res.status == "optimal"
    assert res.x == pytest.approx([1.6, 1.2])
    assert res.objective == pytest.approx(2.8)


def test_maximize_infeasible_and_inverted_bounds():
    res = maximize(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([1.0, -2.0]),
                   np.array([-5.0]), np.array([5.0]))
    assert res.status == "infeasible"
    assert maximize(np.array([1.0]), np.zeros((0, 1)), np.zeros(0),
                    np.array([1.0]), np.array([0.0])).status == "infeasible"


def test_maximize_degenerate_many_ties():
    # many identical rows through one vertex
    A = np.tile([[1.0, 1.0]], (30, 1))
    res = maximize(np.array([1.0, 2.0]), A, np.ones(30), np.zeros(2), np.full(2, 3.0))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(2.0)


def test_simplex_beale_cycling_example():
    # Beale's example cycles under textbook Dantzig pricing without anti-cycling
    c = np.array([-0.75, 150, -0.02, 6, 0, 0, 0])
    A = np.array([
        [0.25, -60, -0.04, 9, 1, 0, 0],
        [0.5, -90, -0.02, 3, 0, 1, 0],
        [0, 0, 1, 0, 0, 0, 1],
    ])
    b = np.array([0.0, 0.0, 1.0])
    status, y, pi, _ = simplex(c, A, b)
    assert status == "optimal"
    assert c @ y == pytest.approx(-0.05)
    assert np.all(c - A.T @ pi >= -1e-9)


def test_simplex_standard_form_against_highs():
    rng = np.random.default_rng(3)
    for _ in range(100):
        m, n = rng.integers(1, 5), rng.integers(2, 8)
        A = rng.normal(size=(m, n))
        b = A @ rng.uniform(0, 2, size=n) if rng.random() < 0.8 else rng.normal(size=m)
        c = rng.uniform(0.1, 2, size=n)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        status, y, pi, _ = simplex(c, A, b)
        if ref.status == 2:
            assert status == "infeasible"
            continue
        assert status == "optimal"
        assert c @ y == pytest.approx(ref.fun, abs=1e-7)
        assert A @ y == pytest.approx(b, abs=1e-7)
        assert b @ pi == pytest.approx(ref.fun, abs=1e-7)


def random_disjunctive(rng, n, k):
    # each disjunction: |x_a - x_b + s| >= t, written as two one-row sides
    rows, rhs, sides = [], [], []
    for d in range(k):
        a, b = rng.choice(n, 2, replace=False)
        t = rng.uniform(0.5, 3)
        g = np.zeros(n)
        g[a], g[b] = 1, -1
        rows += [g, -g]
        rhs += [-t, -t]
        sides.append((np.array([2 * d]), np.array([2 * d + 1])))
    # objective: maximize a radius-like variable in the last slot
    G = np.array(rows)
    G = np.hstack([G, np.ones((len(rows), 1))])
    c = np.zeros(n + 1)
    c[-1] = 1
    lower = np.concatenate([np.zeros(n), [0.0]])
    upper = np.concatenate([np.full(n, 6.0), [10.0]])
    return DisjunctiveProgram(c, G, np.array(rhs), lower, upper, np.zeros(0, dtype=np.intp),
                              sides, np.arange(k), big_m=40.0)


def enumerate_sides(p):
    best = -np.inf
    for sides in itertools.product((0, 1), repeat=p.n_disj):
        idx = np.concatenate([p.sides[k][s] for k, s in enumerate(sides)])
        ref = linprog(-p.c, A_ub=p.G[idx], b_ub=p.h[idx],
                      bounds=list(zip(p.lower, p.upper)), method="highs")
        if ref.status == 0:
            best = max(best, -ref.fun)
    return best


@pytest.mark.parametrize("seed", range(12))
def test_branch_and_bound_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    p = random_disjunctive(rng, n=int(rng.integers(2, 5)), k=int(rng.integers(1, 7)))
    want = enumerate_sides(p)
    res = BranchAndBound(p, node_limit=5000).solve()
    if want == -np.inf:
        assert res.status == "infeasible"
        return
    assert res.status == "optimal"
    assert res.objective == pytest.approx(want, abs=1e-6)
    assert res.root_bound >= res.objective - 1e-6
    assert np.all(p.side_violation(res.x).min(axis=1) <= 1e-6)


def test_relaxation_contains_every_side_choice():
    rng = np.random.default_rng(5)
    p = random_disjunctive(rng, 4, 5)
    Gr, hr = p.relaxation_rows(np.arange(p.n_disj))
    for sides in itertools.product((0, 1), repeat=p.n_disj):
        idx = np.concatenate([p.sides[k][s] for k, s in enumerate(sides)])
        ref = linprog(-p.c, A_ub=p.G[idx], b_ub=p.h[idx],
                      bounds=list(zip(p.lower, p.upper)), method="highs")
        if ref.status == 0 and len(hr):
            assert np.all(Gr @ ref.x <= hr + 1e-7)


def test_warm_start_and_node_limit():
    # x0 - x1 and x1 - x2 separated by at least 2, radius column appended
    G = np.array([[-1, 1, 0, 1], [1, -1, 0, 1], [0, -1, 1, 1], [0, 1, -1, 1.0]])
    h = np.full(4, -2.0)
    sides = [(np.array([0]), np.array([1])), (np.array([2]), np.array([3]))]
    p = DisjunctiveProgram(np.array([0, 0, 0, 1.0]), G, h, np.zeros(4), np.array([6, 6, 6, 10.0]),
                           np.zeros(0, dtype=np.intp), sides, np.arange(2), big_m=40.0)
    bnb = BranchAndBound(p, node_limit=1)
    assert bnb.warm_start(np.array([5.0, 3.0, 4.0, 0.0]))
    # cell x0 >= x1 + 2, x2 >= x1 + 2: best radius 4 with x1 = 0, x0 = x2 = 6
    assert bnb.best_obj == pytest.approx(4.0)
    res = bnb.solve()
    assert res.status == "limit-reached"
    assert res.objective == pytest.approx(4.0)
    full = BranchAndBound(p).solve()
    assert full.status == "optimal" and full.objective == pytest.approx(enumerate_sides(p))
