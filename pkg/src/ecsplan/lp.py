"""Linear programming relaxations.

``solve_lp`` works on a :class:`MilpModel` with integrality ignored and
optional per-column bound overrides (used by branch-and-bound). Two
backends sit behind it:

* ``simplex``: a dense bounded-variable primal simplex written here.
  Rows become logical variables ``s = A x`` with the row bounds, so the
  slack basis is always a valid start. Phase 1 minimises the sum of
  bound infeasibilities of the basic variables (composite method), which
  also lets a warm-started basis repair itself after a bound change.
* ``highs``: scipy's HiGHS interface, for models whose dense basis
  inverse would not fit comfortably in memory.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from ecsplan.model import MilpModel

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
AUTO_DENSE_LIMIT = 1500  # rows; above this ``auto`` uses HiGHS

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Basis:
    basic: tuple[int, ...]
    status: tuple[int, ...]  # per variable (structurals then logicals)


@dataclass
class LpResult:
    status: LpStatus
    objective: float
    values: np.ndarray
    basis: Basis | None = None
    iterations: int = 0
    backend: str = ""


@dataclass
class LpData:
    """Dense arrays for a model, reused across many bound changes."""

    c: np.ndarray
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray

    @classmethod
    def from_model(cls, model: MilpModel) -> "LpData":
        lo, hi = model.bounds()
        rlo, rhi = model.row_bounds()
        return cls(model.objective_vector(), model.matrix().toarray(), rlo, rhi, lo, hi)


class _Simplex:
    def __init__(self, data: LpData, col_lo, col_hi, max_iter: int):
        m, n = data.A.shape
        self.m, self.n = m, n
        self.M = np.hstack([data.A, -np.eye(m)])
        self.cost = np.concatenate([data.c, np.zeros(m)])
        self.lo = np.concatenate([col_lo, data.row_lo])
        self.hi = np.concatenate([col_hi, data.row_hi])
        self.max_iter = max_iter
        self.iterations = 0

    # -- basis handling -------------------------------------------------
    def _nonbasic_value(self, j: int, status: int) -> float:
        lo, hi = self.lo[j], self.hi[j]
        if status == AT_UPPER and math.isfinite(hi):
            return hi
        if status == AT_LOWER and math.isfinite(lo):
            return lo
        if math.isfinite(lo):
            return lo
        if math.isfinite(hi):
            return hi
        return 0.0

    def _status_for(self, j: int, value: float) -> int:
        if math.isfinite(self.lo[j]) and value == self.lo[j]:
            return AT_LOWER
        if math.isfinite(self.hi[j]) and value == self.hi[j]:
            return AT_UPPER
        return AT_ZERO

    def _slack_basis(self):
        total = self.n + self.m
        self.basic = np.arange(self.n, total)
        self.status = np.full(total, AT_LOWER)
        self.status[self.basic] = BASIC
        self.x = np.zeros(total)
        for j in range(self.n):
            self.x[j] = self._nonbasic_value(j, AT_LOWER)
            self.status[j] = self._status_for(j, self.x[j])

    def start(self, warm: Basis | None):
        total = self.n + self.m
        if warm is not None and len(warm.status) == total and len(warm.basic) == self.m:
            self.basic = np.array(warm.basic, dtype=int)
            self.status = np.array(warm.status, dtype=int)
            self.x = np.zeros(total)
            for j in np.flatnonzero(self.status != BASIC):
                self.x[j] = self._nonbasic_value(j, self.status[j])
                self.status[j] = self._status_for(j, self.x[j])
            if not self._refactor():
                self._slack_basis()
                self._refactor()
        else:
            self._slack_basis()
            self._refactor()

    def _refactor(self) -> bool:
        B = self.M[:, self.basic]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.Binv)):
            return False
        nonbasic = self.status != BASIC
        rhs = -self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basic] = self.Binv @ rhs
        return True

    # -- iteration ------------------------------------------------------
    def _ratio_test(self, xb, lob, hib, rate, alpha, t_max, bland):
        """Largest step keeping feasible basics feasible (breakpoint rule).

        Infeasible basics moving towards their violated bound block when
        they reach it; those moving away never block.
        """
        with np.errstate(invalid="ignore"):
            dec = rate < -PIVOT_TOL
            inc = rate > PIVOT_TOL
            target = np.full(len(xb), np.nan)
            t_dec = np.where(xb > hib + FEAS_TOL, hib, np.where(xb >= lob - FEAS_TOL, lob, np.nan))
            t_inc = np.where(xb < lob - FEAS_TOL, lob, np.where(xb <= hib + FEAS_TOL, hib, np.nan))
            target[dec] = t_dec[dec]
            target[inc] = t_inc[inc]
            steps = (target - xb) / np.where(dec | inc, rate, 1.0)
        steps[~np.isfinite(steps)] = np.inf
        np.maximum(steps, 0.0, out=steps)
        best = float(steps.min()) if len(steps) else math.inf
        if best >= t_max:
            return -1, t_max, 0.0
        ties = np.flatnonzero(steps <= best + 1e-12)
        if bland:
            r = int(ties[np.argmin(self.basic[ties])])
        else:
            r = int(ties[np.argmax(np.abs(alpha[ties]))])
        return r, float(steps[r]), float(target[r])

    def run(self) -> LpStatus:
        lo, hi = self.lo, self.hi
        since_refactor = 0
        bland = False
        stall = 0
        last_obj = math.inf
        while True:
            if self.iterations >= self.max_iter:
                return LpStatus.ITERATION_LIMIT
            xb = self.x[self.basic]
            lob, hib = lo[self.basic], hi[self.basic]
            below = xb < lob - FEAS_TOL
            above = xb > hib + FEAS_TOL
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = None
                obj = float(np.sum(lob[below] - xb[below]) + np.sum(xb[above] - hib[above]))
            else:
                cb = self.cost[self.basic]
                cost = self.cost
                obj = float(self.cost @ self.x)
            if obj < last_obj - 1e-12 * max(1.0, abs(obj)):
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > 50:
                    bland = True
            last_obj = obj

            y = cb @ self.Binv
            d = -(y @ self.M)
            if cost is not None:
                d += cost
            d[self.basic] = 0.0

            st = self.status
            fixed = lo == hi
            inc = ((st == AT_LOWER) | (st == AT_ZERO)) & (d < -OPT_TOL) & ~fixed
            dec = ((st == AT_UPPER) | (st == AT_ZERO)) & (d > OPT_TOL) & ~fixed
            # a nonbasic already at its upper bound cannot increase
            inc &= ~((st == AT_ZERO) & (self.x >= hi))
            dec &= ~((st == AT_ZERO) & (self.x <= lo))
            candidates = np.flatnonzero(inc | dec)
            if candidates.size == 0:
                if phase1:
                    return LpStatus.INFEASIBLE
                return LpStatus.OPTIMAL
            if bland:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = 1.0 if inc[q] else -1.0

            alpha = self.Binv @ self.M[:, q]
            rate = -direction * alpha  # d x_B / d t
            t_max = hi[q] - lo[q] if (math.isfinite(hi[q]) and math.isfinite(lo[q])) else math.inf
            leave, best, leave_to = self._ratio_test(xb, lob, hib, rate, alpha, t_max, bland)
            if math.isinf(best):
                return LpStatus.UNBOUNDED if not phase1 else LpStatus.INFEASIBLE

            self.iterations += 1
            t = best
            self.x[q] += direction * t
            self.x[self.basic] += t * rate
            if leave < 0:
                # bound flip of the entering variable
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[q] = hi[q] if direction > 0 else lo[q]
                continue
            out = int(self.basic[leave])
            self.x[out] = leave_to
            self.status[out] = AT_LOWER if leave_to == lo[out] else AT_UPPER
            self.basic[leave] = q
            self.status[q] = BASIC
            piv = alpha[leave]
            row = self.Binv[leave] / piv
            # in-place rank-1 update; Binv.T is the Fortran view BLAS expects
            dger(-1.0, row, alpha, a=self.Binv.T, overwrite_a=True)
            self.Binv[leave] = row
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                since_refactor = 0
                if not self._refactor():
                    return LpStatus.ITERATION_LIMIT


def _simplex(model: MilpModel, data: LpData | None, col_lo, col_hi, warm, max_iter) -> LpResult:
    data = data or LpData.from_model(model)
    solver = _Simplex(data, col_lo, col_hi, max_iter)
    solver.start(warm)
    status = solver.run()
    values = solver.x[: solver.n].copy()
    basis = Basis(tuple(int(b) for b in solver.basic), tuple(int(s) for s in solver.status))
    objective = float(data.c @ values) if status == LpStatus.OPTIMAL else math.nan
    return LpResult(status, objective, values, basis, solver.iterations, "simplex")


def _highs(model: MilpModel, col_lo, col_hi) -> LpResult:
    import scipy.sparse as sp
    from scipy.optimize import linprog

    A = model.matrix()
    rlo, rhi = model.row_bounds()
    eq = rlo == rhi
    ub_rows = ~eq & np.isfinite(rhi)
    lb_rows = ~eq & np.isfinite(rlo)
    A_ub = sp.vstack([A[ub_rows], -A[lb_rows]]).tocsr()
    b_ub = np.concatenate([rhi[ub_rows], -rlo[lb_rows]])
    res = linprog(
        model.objective_vector(),
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        A_eq=A[eq] if eq.any() else None,
        b_eq=rlo[eq] if eq.any() else None,
        bounds=np.column_stack([col_lo, col_hi]),
        method="highs",
    )
    status = {
        0: LpStatus.OPTIMAL,
        1: LpStatus.ITERATION_LIMIT,
        2: LpStatus.INFEASIBLE,
        3: LpStatus.UNBOUNDED,
    }.get(res.status, LpStatus.ITERATION_LIMIT)
    values = np.asarray(res.x) if res.x is not None else np.full(model.n_cols, math.nan)
    objective = float(res.fun) if status == LpStatus.OPTIMAL else math.nan
    return LpResult(status, objective, values, None, int(getattr(res, "nit", 0) or 0), "highs")


def choose_backend(model: MilpModel, backend: str = "auto") -> str:
    if backend == "auto":
        return "simplex" if model.n_rows <= AUTO_DENSE_LIMIT else "highs"
    if backend not in ("simplex", "highs"):
        raise ValueError(f"unknown LP backend {backend!r}")
    return backend


def solve_lp(
    model: MilpModel,
    col_lo=None,
    col_hi=None,
    warm_basis: Basis | None = None,
    backend: str = "auto",
    max_iter: int = 50_000,
    data: LpData | None = None,
) -> LpResult:
    """Solve the continuous relaxation of ``model``.

    ``col_lo``/``col_hi`` override the model's column bounds. Optimal
    results satisfy column bounds to 1e-7 and rows to 1e-6.
    """
    lo, hi = model.bounds()
    lo = lo if col_lo is None else np.asarray(col_lo, dtype=float)
    hi = hi if col_hi is None else np.asarray(col_hi, dtype=float)
    if np.any(lo > hi + FEAS_TOL):
        return LpResult(LpStatus.INFEASIBLE, math.nan, np.clip(np.zeros(model.n_cols), lo, hi), None, 0, "")
    if choose_backend(model, backend) == "simplex":
        return _simplex(model, data, lo, hi, warm_basis, max_iter)
    return _highs(model, lo, hi)
