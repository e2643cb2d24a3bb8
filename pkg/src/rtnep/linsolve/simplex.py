"""Bounded-variable revised simplex (primal and dual) with deterministic pivoting.

Every row ``a_r x`` gets a logical column ``s_r`` so the working system is
``A x - s = 0`` and row senses become bounds on ``s``.  Right-hand-side and
bound changes therefore touch bounds only, which keeps a previous optimal
basis dual feasible and lets the dual simplex re-optimize from it.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import (
    INF, INFEASIBLE, OPTIMAL, UNBOUNDED, Basis, LinearProgram, LpSolution, NumericalError,
    Tolerances,
)

log = logging.getLogger(__name__)

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

DENSE_LIMIT = 300
REFACTOR_EVERY = 60
BLAND_AFTER = 60
PIVOT_REL = 1e-9


class _Unstable(Exception):
    pass


class _Factor:
    """Basis factorization with product-form updates between refactorizations."""

    def __init__(self, A: sp.csc_matrix, m: int):
        self.A = A
        self.m = m
        self.dense = m <= DENSE_LIMIT
        self.etas: list[tuple[int, np.ndarray]] = []

    def refactor(self, basic: np.ndarray) -> None:
        B = self.A[:, basic]
        self.etas = []
        if self.dense:
            lu, piv = sla.lu_factor(B.toarray(), check_finite=False)
            if np.min(np.abs(np.diag(lu))) < 1e-13 * max(1.0, np.max(np.abs(np.diag(lu)))):
                raise np.linalg.LinAlgError("singular basis")
            self.inv = sla.lu_solve((lu, piv), np.eye(self.m), check_finite=False)
        else:
            try:
                self.lu = splu(sp.csc_matrix(B), permc_spec="COLAMD", options={"SymmetricMode": False})
            except RuntimeError as exc:
                raise np.linalg.LinAlgError(str(exc)) from exc

    @property
    def updates(self) -> int:
        return len(self.etas)

    def ftran(self, a: np.ndarray) -> np.ndarray:
        if self.dense:
            return self.inv @ a
        x = self.lu.solve(a)
        for r, col in self.etas:
            xr = x[r] / col[r]
            if xr != 0.0:
                x -= xr * col
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        if self.dense:
            return c @ self.inv
        c = c.copy()
        for r, col in reversed(self.etas):
            cr = c[r]
            c[r] = (cr - (col @ c - col[r] * cr)) / col[r]
        return self.lu.solve(c, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        if self.dense:
            row = self.inv[r] / alpha[r]
            self.inv -= np.outer(alpha, row)
            self.inv[r] = row
            self.etas.append((r, alpha))  # counted for refactor scheduling only
        else:
            self.etas.append((r, alpha.copy()))


class SimplexEngine:
    """One LP solve.  Build, call :meth:`run`, read :meth:`solution`."""

    def __init__(self, lp: LinearProgram, tol: Tolerances | None = None, basis: Basis | None = None):
        self.tol = tol or Tolerances()
        self.lp = lp
        A = lp.matrix()
        m, n = A.shape
        self.m, self.n = m, n
        self.N = n + m
        self.Afull = sp.hstack([A, -sp.identity(m, format="csr")], format="csc")
        self.AT = self.Afull.T.tocsr()
        self.c = np.concatenate([np.asarray(lp.cost, dtype=float), np.zeros(m)])
        rlo, rhi = lp.row_bounds()
        self.lo = np.concatenate([np.asarray(lp.lb, dtype=float), rlo])
        self.up = np.concatenate([np.asarray(lp.ub, dtype=float), rhi])
        self.movable = self.lo < self.up
        self.iterations = 0
        self.factor = _Factor(self.Afull, m)
        self._init_basis(basis)

    # -- setup -----------------------------------------------------------------
    def _nonbasic_status(self, j: int, hint: int) -> int:
        lo, up = self.lo[j], self.up[j]
        if hint == AT_UB and up < INF:
            return AT_UB
        if hint == AT_LB and lo > -INF:
            return AT_LB
        if lo > -INF:
            return AT_LB
        if up < INF:
            return AT_UB
        return FREE

    def _init_basis(self, basis: Basis | None) -> None:
        N, n, m = self.N, self.n, self.m
        status = np.full(N, AT_LB, dtype=np.int8)
        if basis is not None and len(basis.status) == N and len(basis.basic) == m:
            basic = np.asarray(basis.basic, dtype=np.int64).copy()
            hints = basis.status
        else:
            basic = np.arange(n, n + m, dtype=np.int64)
            hints = np.full(N, AT_LB, dtype=np.int8)
        is_basic = np.zeros(N, dtype=bool)
        is_basic[basic] = True
        for j in range(N):
            status[j] = BASIC if is_basic[j] else self._nonbasic_status(j, hints[j])
        self.basic = basic
        self.status = status
        self.x = np.zeros(N)
        self._place_nonbasics()
        try:
            self._refactor()
        except np.linalg.LinAlgError:
            log.debug("warm-start basis singular; falling back to slack basis")
            self._slack_basis()

    def _slack_basis(self) -> None:
        n, m = self.n, self.m
        self.basic = np.arange(n, n + m, dtype=np.int64)
        self.status[:] = AT_LB
        self.status[self.basic] = BASIC
        for j in range(n):
            self.status[j] = self._nonbasic_status(j, AT_LB)
        self._place_nonbasics()
        self._refactor()

    def _place_nonbasics(self) -> None:
        st = self.status
        self.x = np.where(st == AT_LB, self.lo, np.where(st == AT_UB, self.up, 0.0))
        self.x[st == BASIC] = 0.0

    def _refactor(self) -> None:
        self.factor.refactor(self.basic)
        self._recompute_xb()

    def _recompute_xb(self) -> None:
        xn = self.x.copy()
        xn[self.basic] = 0.0
        rhs = -(self.Afull @ xn)
        self.x[self.basic] = self.factor.ftran(rhs)

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        s, e = self.Afull.indptr[j], self.Afull.indptr[j + 1]
        col[self.Afull.indices[s:e]] = self.Afull.data[s:e]
        return col

    def _reduced_costs(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self.factor.btran(cost[self.basic])
        d = cost - self.AT @ y
        d[self.basic] = 0.0
        return y, d

    def _maybe_refactor(self) -> None:
        if self.factor.updates >= REFACTOR_EVERY:
            self._refactor()

    def _tick(self) -> None:
        self.iterations += 1
        if self.iterations > self.tol.max_iter:
            raise NumericalError("simplex iteration limit", self.iterations, self.primal_residual())

    def _pivot(self, r: int, q: int, alpha: np.ndarray, leave_status: int) -> None:
        p = self.basic[r]
        self.status[p] = leave_status
        self.x[p] = self.lo[p] if leave_status == AT_LB else self.up[p]
        self.basic[r] = q
        self.status[q] = BASIC
        self.factor.update(r, alpha)

    # -- feasibility measures ---------------------------------------------------
    def primal_infeasibility(self) -> np.ndarray:
        xb = self.x[self.basic]
        return np.maximum(np.maximum(self.lo[self.basic] - xb, xb - self.up[self.basic]), 0.0)

    def primal_residual(self) -> float:
        r = self.Afull @ self.x
        scale = 1.0 + np.max(np.abs(self.x), initial=0.0)
        return float(np.max(np.abs(r), initial=0.0) / scale)

    def is_dual_feasible(self, d: np.ndarray) -> bool:
        st, tol = self.status, self.tol.opt_tol
        mv = self.movable
        bad = mv & (((st == AT_LB) & (d < -tol)) | ((st == AT_UB) & (d > tol)) | ((st == FREE) & (np.abs(d) > tol)))
        return not bad.any()

    # -- dual simplex -----------------------------------------------------------
    def dual_simplex(self) -> str:
        ftol, ptol = self.tol.feas_tol, self.tol.pivot_tol
        st = self.status
        degenerate = 0
        rejected: set[int] = set()
        d = None
        # dual steepest-edge weights ||row r of B^-1||^2; exact for the slack basis
        w = np.ones(self.m)
        while True:
            self._maybe_refactor()
            if d is None or self.factor.updates == 0:
                _, d = self._reduced_costs(self.c)
            infeas = self.primal_infeasibility()
            scale = 1.0 + np.abs(self.x[self.basic])
            viol = infeas / scale
            if viol.max(initial=0.0) <= ftol:
                return OPTIMAL
            self._tick()
            bland = degenerate > BLAND_AFTER
            if bland:
                r = int(np.flatnonzero(viol > ftol)[np.argmin(self.basic[viol > ftol])])
            else:
                score = np.where(viol > ftol, infeas * infeas / w, 0.0)
                r = int(np.argmax(score))
            p = self.basic[r]
            to_lower = self.x[p] < self.lo[p]
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self.factor.btran(e)
            w[r] = max(float(rho @ rho), 1e-12)
            arow = self.AT @ rho
            arow[self.basic] = 0.0
            mv = self.movable
            if to_lower:
                cand = mv & (((st == AT_LB) & (arow < -ptol)) | ((st == AT_UB) & (arow > ptol))
                             | ((st == FREE) & (np.abs(arow) > ptol)))
            else:
                cand = mv & (((st == AT_LB) & (arow > ptol)) | ((st == AT_UB) & (arow < -ptol))
                             | ((st == FREE) & (np.abs(arow) > ptol)))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                self._infeasible_basic = r
                return INFEASIBLE
            if rejected:
                idx = np.array([j for j in idx if j not in rejected], dtype=np.int64)
                if idx.size == 0:
                    raise _Unstable("no stable pivot in dual ratio test")
            big = np.abs(arow[idx]).max()
            keep = np.abs(arow[idx]) > PIVOT_REL * big
            if not keep.all() and keep.any():
                idx = idx[keep]
            dj = d[idx]
            sj = st[idx]
            dpos = np.where(sj == AT_LB, np.maximum(dj, 0.0),
                            np.where(sj == AT_UB, np.maximum(-dj, 0.0), np.abs(dj)))
            absa = np.abs(arow[idx])
            ratios = dpos / absa
            best = ratios.min()
            if bland:
                q = int(idx[ratios <= best + 1e-12 * (1.0 + best)].min())
            else:
                # Harris: among steps within the dual tolerance take the largest pivot
                harris = ((dpos + self.tol.opt_tol) / absa).min()
                ties = idx[ratios <= harris]
                q = int(ties[np.argmax(np.abs(arow[ties]))])
            alpha = self.factor.ftran(self._column(q))
            if abs(alpha[r] - arow[q]) > 1e-6 * (1.0 + abs(alpha[r])) and self.factor.updates:
                # row and column disagree; refresh factorization before trusting either
                self._refactor()
                continue
            if abs(alpha[r]) <= PIVOT_REL * np.abs(alpha).max(initial=0.0) or abs(alpha[r]) <= self.tol.pivot_tol:
                if self.factor.updates:
                    self._refactor()
                    continue
                rejected.add(q)
                continue
            bound = self.lo[p] if to_lower else self.up[p]
            theta = (self.x[p] - bound) / alpha[r]
            self.x[self.basic] -= theta * alpha
            self.x[q] += theta
            tau = self.factor.ftran(rho)
            ratio = alpha / alpha[r]
            wr = w[r]
            w = np.maximum(w - 2.0 * ratio * tau + ratio * ratio * wr, 1e-6)
            w[r] = max(wr / (alpha[r] * alpha[r]), 1e-12)
            self._pivot(r, q, alpha, AT_LB if to_lower else AT_UB)
            theta_d = d[q] / arow[q]
            d -= theta_d * arow
            d[q] = 0.0
            d[p] = -theta_d
            rejected.clear()
            step = ratios[int(np.flatnonzero(idx == q)[0])]
            degenerate = degenerate + 1 if step <= 1e-12 else 0

    # -- primal simplex ---------------------------------------------------------
    def primal_simplex(self) -> str:
        ftol, otol, ptol = self.tol.feas_tol, self.tol.opt_tol, self.tol.pivot_tol
        st = self.status
        degenerate = 0
        zero_cost = np.zeros(self.N)
        while True:
            self._maybe_refactor()
            basic = self.basic
            xb = self.x[basic]
            lob, upb = self.lo[basic], self.up[basic]
            scale = 1.0 + np.abs(xb)
            below = (lob - xb) / scale > ftol
            above = (xb - upb) / scale > ftol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cost = zero_cost.copy()
                cost[basic] = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            else:
                cost = self.c
            _, d = self._reduced_costs(cost)
            mv = self.movable
            inc = mv & ((st == AT_LB) | (st == FREE)) & (d < -otol)
            dec = mv & ((st == AT_UB) | (st == FREE)) & (d > otol)
            elig = np.flatnonzero(inc | dec)
            if elig.size == 0:
                if phase1:
                    self._phase1_rows = (below | above)
                    return INFEASIBLE
                return OPTIMAL
            self._tick()
            bland = degenerate > BLAND_AFTER
            if bland:
                q = int(elig[0])
            else:
                q = int(elig[np.argmax(np.abs(d[elig]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.factor.ftran(self._column(q))
            rate = -direction * alpha
            ptol = max(self.tol.pivot_tol, PIVOT_REL * np.abs(alpha).max(initial=0.0))
            t = np.full(self.m, INF)
            target = np.full(self.m, np.nan)
            dec_m = rate < -ptol
            inc_m = rate > ptol
            # decreasing basics
            tgt = np.where(above, upb, np.where(below, -INF, lob))
            sel = dec_m & np.isfinite(tgt)
            t[sel] = (tgt[sel] - xb[sel]) / rate[sel]
            target[sel] = tgt[sel]
            # increasing basics
            tgt = np.where(below, lob, np.where(above, INF, upb))
            sel = inc_m & np.isfinite(tgt)
            t[sel] = (tgt[sel] - xb[sel]) / rate[sel]
            target[sel] = tgt[sel]
            t = np.maximum(t, 0.0)
            tmin = t.min(initial=INF)
            flip = self.up[q] - self.lo[q] if st[q] != FREE else INF
            if flip <= tmin and flip < INF:
                self.x[basic] += flip * rate
                self.x[q] = self.up[q] if st[q] == AT_LB else self.lo[q]
                st[q] = AT_UB if st[q] == AT_LB else AT_LB
                degenerate = 0
                continue
            if tmin == INF:
                return UNBOUNDED
            ties = np.flatnonzero(t <= tmin + 1e-12 * (1.0 + tmin))
            if bland:
                r = int(ties[np.argmin(basic[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            p = basic[r]
            leave = AT_LB if target[r] == self.lo[p] else AT_UB
            self.x[basic] += tmin * rate
            self.x[q] += direction * tmin
            self._pivot(r, q, alpha, leave)
            degenerate = degenerate + 1 if tmin <= 1e-12 else 0

    # -- driver -------------------------------------------------------------------
    def run(self) -> str:
        if self.m == 0:
            return self._no_rows()
        try:
            return self._run()
        except (_Unstable, np.linalg.LinAlgError) as exc:
            # restart once from the slack basis, trading speed for stability
            log.debug("simplex restart: %s", exc)
            self._slack_basis()
            return self._run()

    def _run(self) -> str:
        _, d = self._reduced_costs(self.c)
        status = None
        if self.is_dual_feasible(d):
            status = self.dual_simplex()
            if status == INFEASIBLE:
                # confirm with a fresh factorization before declaring infeasibility
                self._refactor()
                status = self.dual_simplex()
                if status == INFEASIBLE:
                    self.final_status = INFEASIBLE
                    return INFEASIBLE
        for _ in range(3):
            status = self.primal_simplex()
            if status != OPTIMAL:
                break
            self._refactor()
            _, d = self._reduced_costs(self.c)
            viol = self.primal_infeasibility() / (1.0 + np.abs(self.x[self.basic]))
            if viol.max(initial=0.0) <= self.tol.feas_tol and self.is_dual_feasible(d):
                break
        self.final_status = status
        return status

    def _no_rows(self) -> str:
        c = self.c
        x = np.where(c > 0, self.lo, np.where(c < 0, self.up, np.where(np.isfinite(self.lo), self.lo,
                                                                          np.where(np.isfinite(self.up), self.up, 0.0))))
        self.x = x
        self.final_status = UNBOUNDED if not np.all(np.isfinite(x)) else OPTIMAL
        return self.final_status

    def solution(self) -> LpSolution:
        n, m = self.n, self.m
        status = self.final_status
        if m == 0:
            x = self.x[:n]
            return LpSolution(status, x, float(self.c[:n] @ x) if status == OPTIMAL else np.nan,
                              np.zeros(0), self.c[:n].copy(), 0, Basis(np.zeros(0, dtype=np.int64), self.status.copy()))
        y, d = self._reduced_costs(self.c)
        basis = Basis(self.basic.copy(), self.status.copy())
        if status == INFEASIBLE:
            rows = self._infeasible_rows()
            return LpSolution(status, self.x[:n].copy(), np.nan, y, d[:n], self.iterations, basis, rows)
        if status == UNBOUNDED:
            return LpSolution(status, self.x[:n].copy(), -INF, y, d[:n], self.iterations, basis)
        x = self.x[:n].copy()
        obj = float(self.c[:n] @ x)
        nb = self.status != BASIC
        xb = np.where(np.isfinite(self.x), self.x, 0.0)
        dual_obj = float(d[nb] @ xb[nb])
        return LpSolution(status, x, obj, y, d[:n], self.iterations, basis, (), dual_obj)

    def _infeasible_rows(self) -> tuple[int, ...]:
        viol = self.primal_infeasibility() > self.tol.feas_tol * (1.0 + np.abs(self.x[self.basic]))
        cols = self.basic[viol]
        return tuple(sorted(int(j - self.n) for j in cols if j >= self.n))


def solve_lp(lp: LinearProgram, tol: Tolerances | None = None, basis: Basis | None = None) -> LpSolution:
    """Solve ``lp`` to optimality, infeasibility or unboundedness.

    ``basis`` (from a previous :class:`LpSolution` of a problem with the same
    shape) warm-starts the search; the dual simplex is used whenever the
    starting basis is dual feasible, the primal simplex otherwise.
    """
    tol = tol or Tolerances()
    eng = SimplexEngine(lp, tol, basis)
    status = eng.run()
    sol = eng.solution()
    if status == OPTIMAL:
        res = eng.primal_residual()
        if res > 1e3 * tol.feas_tol:
            raise NumericalError("primal residual too large", eng.iterations, res)
    return sol
