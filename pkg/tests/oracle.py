"""Independent references for the solver tests: catalog rows and exact side search."""

import numpy as np
from scipy.optimize import linprog

QUBIT = ("A1", "A2", "C1", "E1", "E2", "D1", "S1", "S2", "T1")


def cr_rows(n, edges, alpha, delta):
    """(coef, const, threshold, avoid) for every CR constraint, written from the formulas.

    An avoid row asks |coef @ f + const| >= threshold, the others coef @ f + const >= threshold.
    """
    a = alpha

    def e(*pairs):
        c = np.zeros(n)
        for i, val in pairs:
            c[i] += val
        return c

    adj = {x: set() for x in range(n)}
    couplings = set()
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
        couplings.add((min(i, j), max(i, j)))
    out = []
    for i, j in sorted(couplings):
        out.append((e((i, 1), (j, -1)), 0.0, delta["A1"], True))
        out.append((e((i, 1), (j, -1)), -a, delta["A2"], True))
        out.append((e((j, 1), (i, -1)), -a, delta["A2"], True))
    for i, j in edges:
        # drive at f_j: f_i + a_i + C1 <= f_j <= f_i - C1
        out.append((e((j, 1), (i, -1)), -a, delta["C1"], False))
        out.append((e((i, 1), (j, -1)), 0.0, delta["C1"], False))
        out.append((e((j, 1), (i, -1)), 0.0, delta["E1"], True))
        out.append((e((j, 1), (i, -1)), -a, delta["E2"], True))
        out.append((e((j, 1), (i, -1)), -a / 2, delta["D1"], True))
        for k in sorted(adj[i] - {j}):
            out.append((e((j, 1), (k, -1)), 0.0, delta["S1"], True))
            out.append((e((j, 1), (k, -1)), -a, delta["S2"], True))
            out.append((e((j, 1), (k, 1), (i, -2)), -a, delta["T1"], True))
    return out


def min_margin(rows, f):
    """Smallest margin of the catalog rows at frequencies ``f`` (last axis)."""
    worst = np.inf
    for coef, const, thr, avoid in rows:
        v = f @ coef + const
        worst = np.minimum(worst, (np.abs(v) if avoid else v) - thr)
    return worst


def exact_radius(n, edges, alpha, band, delta, cap=None):
    """Largest common margin, by depth-first search over every avoid side with LP pruning."""
    rows = cr_rows(n, edges, alpha, delta)
    lo, hi = band
    cap = hi - lo if cap is None else cap
    bounds = [(lo, hi)] * n + [(0, cap)]
    c = np.zeros(n + 1)
    c[-1] = -1
    base_G, base_h = [], []
    for coef, const, thr, avoid in rows:
        if not avoid:
            base_G.append(np.append(-coef, 1.0))
            base_h.append(const - thr)
    avoid_rows = [r for r in rows if r[3]]
    best = [-np.inf]

    def lp(G, h):
        r = linprog(c, A_ub=np.array(G) if G else None, b_ub=np.array(h) if G else None,
                    bounds=bounds, method="highs")
        return -r.fun if r.status == 0 else -np.inf

    def dfs(k, G, h):
        if lp(G, h) <= best[0] + 1e-9:
            return
        if k == len(avoid_rows):
            best[0] = lp(G, h)
            return
        coef, const, thr, _ = avoid_rows[k]
        for s in (1.0, -1.0):
            dfs(k + 1, G + [np.append(-s * coef, 1.0)], h + [s * const - thr])

    dfs(0, base_G, base_h)
    return best[0]


def cz_drive_scan(f, a, edges, edge, delta):
    """Drive grid points (in 0.01 MHz units) of one CZ edge that violate nothing.

    ``f`` and ``a`` are integer arrays in 0.01 MHz units; comparisons are exact.
    """
    i, j = edge
    d = {t: int(round(100 * delta[t])) for t in QUBIT}
    adj = {x: set() for x in range(len(f))}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    lo, hi = min(f[i], f[j]), max(f[i], f[j])
    fd = np.arange(lo, hi + 1, dtype=np.int64)
    ok = (fd - lo >= d["C1"]) & (hi - fd >= d["C1"])
    for p, q in ((i, j), (j, i)):
        ok &= np.abs(fd - f[p]) >= d["E1"]
        ok &= np.abs(fd - f[p] - a[p]) >= d["E2"]
        ok &= np.abs(2 * fd - 2 * f[p] - a[p]) >= 2 * d["D1"]
        for k in adj[p] - {q}:
            ok &= np.abs(fd - f[k]) >= d["S1"]
            ok &= np.abs(fd - f[k] - a[k]) >= d["S2"]
            ok &= np.abs(fd + f[k] - 2 * f[p] - a[p]) >= d["T1"]
    return fd[ok]
