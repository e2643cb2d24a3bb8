"""Independent reference implementations used only by the tests.

* ``tableau_simplex``: dense two-phase tableau simplex with Bland's rule.
* ``enumerate_binary_lp``: brute force over binary assignments, continuous
  part solved by scipy's HiGHS.
* ``exhaustive_taylor``: maximize a separable linear objective over all
  budget-feasible indicator vectors.
* ``dispatch_highs``: DC dispatch with shedding solved by HiGHS.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

EPS = 1e-11


def _pivot(T, r, c):
    T[r] /= T[r, c]
    for i in range(T.shape[0]):
        if i != r and T[i, c] != 0.0:
            T[i] -= T[i, c] * T[r]


def _bland(T, basis, allowed, cost_row):
    """Run Bland's rule on ``T`` minimizing the objective stored in ``cost_row``."""
    m = T.shape[0] - 1
    while True:
        red = T[cost_row, :-1]
        enter = next((j for j in allowed if red[j] < -EPS), None)
        if enter is None:
            return "optimal"
        col = T[:m, enter]
        rows = [i for i in range(m) if col[i] > EPS]
        if not rows:
            return "unbounded"
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in rows]
        best = min(r[0] for r in ratios)
        leave = min((b, i) for t, b, i in ratios if t <= best + 1e-12 * (1 + abs(best)))[1]
        _pivot(T, leave, enter)
        basis[leave] = enter


def tableau_simplex(c, A, senses, b, lb, ub):
    """Minimize ``c x`` s.t. ``A x (senses) b``, ``lb <= x <= ub`` with finite ``lb``.

    Returns ``(status, objective)``.
    """
    c, A, b, lb, ub = (np.asarray(v, dtype=float) for v in (c, A, b, lb, ub))
    m0, n = A.shape
    const = float(c @ lb)
    rows, rhs, kinds = [list(r) for r in A], list(b - A @ lb), list(senses)
    for j in range(n):
        if np.isfinite(ub[j]):
            e = [0.0] * n
            e[j] = 1.0
            rows.append(e)
            rhs.append(ub[j] - lb[j])
            kinds.append("<=")
    m = len(rows)
    slack_cols = [i for i in range(m) if kinds[i] != "="]
    ns = len(slack_cols)
    M = np.zeros((m, n + ns))
    M[:, :n] = np.array(rows)
    for k, i in enumerate(slack_cols):
        M[i, n + k] = 1.0 if kinds[i] == "<=" else -1.0
    rhs = np.array(rhs)
    neg = rhs < 0
    M[neg] *= -1
    rhs[neg] *= -1
    nt = n + ns
    T = np.zeros((m + 2, nt + m + 1))
    T[:m, :nt] = M
    T[:m, nt:nt + m] = np.eye(m)
    T[:m, -1] = rhs
    T[m, :n] = c
    T[m + 1, :nt] = -M.sum(axis=0)
    T[m + 1, -1] = -rhs.sum()
    basis = list(range(nt, nt + m))
    # phase 1 tableau keeps the phase-2 cost row updated alongside
    T1 = np.vstack([T[:m], T[m + 1:m + 2], T[m:m + 1]])
    _bland(T1, basis, list(range(nt + m)), m)
    if -T1[m, -1] > 1e-7 * (1 + np.abs(rhs).sum()):
        return "infeasible", None
    T = np.vstack([T1[:m], T1[m + 1:m + 2]])
    # drive artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= nt:
            cand = [j for j in range(nt) if abs(T[i, j]) > 1e-9]
            if cand:
                _pivot(T, i, cand[0])
                basis[i] = cand[0]
            else:
                continue
        keep.append(i)
    T = np.vstack([T[keep], T[-1:]])
    basis = [basis[i] for i in keep]
    T = np.delete(T, np.s_[nt:nt + m], axis=1)
    status = _bland(T, basis, list(range(nt)), T.shape[0] - 1)
    if status == "unbounded":
        return "unbounded", None
    return "optimal", -T[-1, -1] + const


def enumerate_binary_lp(c, A_ub, b_ub, bounds, binaries):
    """Minimum over all 0/1 assignments of ``binaries``; ``None`` when infeasible."""
    best = None
    for bits in itertools.product((0, 1), repeat=len(binaries)):
        bnd = list(bounds)
        for j, v in zip(binaries, bits):
            bnd[j] = (v, v)
        r = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bnd, method="highs")
        if r.status == 0 and (best is None or r.fun < best):
            best = r.fun
    return best


def enumerate_pure_binary(c, A_ub, b_ub):
    """Pure 0/1 program by vectorized enumeration."""
    n = len(c)
    X = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    ok = np.all(X @ np.asarray(A_ub).T <= np.asarray(b_ub) + 1e-9, axis=1)
    if not ok.any():
        return None
    return float((X[ok] @ np.asarray(c)).min())


def subsets(n: int, k: int, support=None):
    idx = list(range(n)) if support is None else list(support)
    for a in range(min(k, len(idx)) + 1):
        for combo in itertools.combinations(idx, a):
            z = np.zeros(n)
            z[list(combo)] = 1
            yield z


def exhaustive_taylor(gd, gg, gamma_d, gamma_g):
    """Max of ``gd @ zd + gg @ zg`` over all indicator vectors within the budgets."""
    best_d = max(float(gd @ z) for z in subsets(len(gd), gamma_d))
    best_g = max(float(gg @ z) for z in subsets(len(gg), gamma_g))
    return best_d, best_g


def dispatch_highs(case, built, demand, capacity):
    """DC dispatch with shedding via HiGHS, written from scratch on a reduced-angle form.

    Angles of the lowest bus in each component are eliminated; returns the
    optimal cost and the demand and capacity sensitivities from HiGHS'
    equality and inequality marginals.
    """
    nb = case.n_buses
    on = list(case.existing) + [k for k, b in zip(case.candidates, built) if b]
    ng, nl = len(case.generators), len(case.loads)
    nf = len(on)
    # x = [theta (nb), pg (ng), pu (nl), pl (nf)]
    n = nb + ng + nl + nf
    c = np.zeros(n)
    c[nb:nb + ng] = case.gen_cost
    c[nb + ng:nb + ng + nl] = case.shed_cost
    A_eq, b_eq = [], []
    bal = np.zeros((nb, n))
    for i, g in enumerate(case.generators):
        bal[g.bus, nb + i] += 1
    for j, d in enumerate(case.loads):
        bal[d.bus, nb + ng + j] += 1
    for f, k in enumerate(on):
        ln = case.lines[k]
        bal[ln.to_bus, nb + ng + nl + f] += 1
        bal[ln.from_bus, nb + ng + nl + f] -= 1
    rhs = np.zeros(nb)
    for j, d in enumerate(case.loads):
        rhs[d.bus] += demand[j]
    A_eq.extend(bal)
    b_eq.extend(rhs)
    for f, k in enumerate(on):
        ln = case.lines[k]
        row = np.zeros(n)
        row[nb + ng + nl + f] = 1
        row[ln.from_bus] -= case.base_mva / ln.reactance
        row[ln.to_bus] += case.base_mva / ln.reactance
        A_eq.append(row)
        b_eq.append(0.0)
    seen = set()
    parent = list(range(nb))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for k in on:
        a, b = find(case.lines[k].from_bus), find(case.lines[k].to_bus)
        if a != b:
            parent[max(a, b)] = min(a, b)
    for i in range(nb):
        r = find(i)
        if r not in seen:
            seen.add(r)
            row = np.zeros(n)
            row[r] = 1
            A_eq.append(row)
            b_eq.append(0.0)
    bounds = [(None, None)] * nb
    bounds += [(0, capacity[i]) for i in range(ng)]
    bounds += [(0, case.shed_fraction[j] * demand[j]) for j in range(nl)]
    bounds += [(-case.lines[k].capacity, case.lines[k].capacity) for k in on]
    r = linprog(c, A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
    if r.status != 0:
        return None
    lam = r.eqlin.marginals[:nb]
    ub_marg = r.upper.marginals
    load_bus = np.array([d.bus for d in case.loads], dtype=int)
    # d cost / d demand: balance dual plus shedding-bound dual scaled by gamma
    mu_d = lam[load_bus] + case.shed_fraction * ub_marg[nb + ng:nb + ng + nl]
    mu_g = ub_marg[nb:nb + ng]
    return float(r.fun), mu_d, mu_g
