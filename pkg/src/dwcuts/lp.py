"""Bounded-variable revised simplex.

Rows are ``a x (<=|=|>=) b``; every row gets a slack ``s`` so that
``A x + s = b`` with sense-dependent slack bounds. Duals follow the
minimization convention ``d = c - y A``: ``<=`` rows have ``y <= 0`` and
``>=`` rows ``y >= 0`` at an optimum.

When the problem is infeasible the returned ``farkas`` vector ``y`` satisfies
``y b - sum_j sup_{l_j <= z_j <= u_j} (y A_j) z_j > 0`` over structural and
slack columns, which certifies that no point satisfies rows and bounds.

Work is counted in simplex pivots (``iterations``); this is the
deterministic budget unit used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iterationLimit"
NUMERICAL = "numerical"

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
CHECK_TOL = 1e-6
REFACTOR_EVERY = 50
BLAND_AFTER = 1000

_LOWER, _UPPER, _FREE, _BASIC = 0, 1, 2, 3


@dataclass
class LinearProgram:
    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    A: np.ndarray
    sense: list[str]
    rhs: np.ndarray

    @classmethod
    def empty(cls, n_rows: int = 0) -> "LinearProgram":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((n_rows, 0)), ["="] * n_rows, np.zeros(n_rows))

    @classmethod
    def from_arrays(cls, cost, A, sense, rhs, lower=None, upper=None) -> "LinearProgram":
        cost = np.asarray(cost, dtype=float)
        n = cost.size
        A = np.asarray(A, dtype=float).reshape(-1, n)
        lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
        return cls(cost, lower.copy(), upper.copy(), A, list(sense), np.asarray(rhs, dtype=float).copy())

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.cost.size

    def copy(self) -> "LinearProgram":
        return LinearProgram(self.cost.copy(), self.lower.copy(), self.upper.copy(), self.A.copy(),
                             list(self.sense), self.rhs.copy())

    def add_columns(self, cost, lower, upper, coeffs) -> range:
        cost = np.atleast_1d(np.asarray(cost, dtype=float))
        coeffs = np.asarray(coeffs, dtype=float).reshape(self.m, cost.size)
        start = self.n
        self.cost = np.concatenate([self.cost, cost])
        self.lower = np.concatenate([self.lower, np.broadcast_to(np.asarray(lower, dtype=float), cost.shape)])
        self.upper = np.concatenate([self.upper, np.broadcast_to(np.asarray(upper, dtype=float), cost.shape)])
        self.A = np.hstack([self.A, coeffs])
        return range(start, self.n)

    def add_rows(self, coeffs, sense, rhs) -> range:
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        coeffs = np.asarray(coeffs, dtype=float).reshape(rhs.size, self.n)
        start = self.m
        self.A = np.vstack([self.A, coeffs])
        self.sense = self.sense + ([sense] * rhs.size if isinstance(sense, str) else list(sense))
        self.rhs = np.concatenate([self.rhs, rhs])
        return range(start, self.m)

    def slack_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([0.0 if s in ("<=", "=") else -np.inf for s in self.sense])
        hi = np.array([0.0 if s in (">=", "=") else np.inf for s in self.sense])
        return lo, hi


@dataclass(frozen=True)
class Basis:
    """Basic variable keys; ``j >= 0`` is column j, ``-(i + 1)`` is the slack of row i.

    Keys are stable under appending rows and columns, which is what warm
    restarts rely on.
    """

    head: tuple[int, ...]
    at_upper: frozenset = frozenset()


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    duals: np.ndarray
    objective: float
    iterations: int
    farkas: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basis: Basis | None = None
    warm: bool = False
    ray: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Simplex:
    def __init__(self, lp: LinearProgram, basis: Basis | None, bland_after: int):
        self.lp = lp
        m, n = lp.m, lp.n
        self.m, self.n = m, n
        self.A = np.hstack([lp.A, np.eye(m)]) if m else np.zeros((0, n))
        self.b = lp.rhs.astype(float)
        slo, shi = lp.slack_bounds()
        self.lo = np.concatenate([lp.lower, slo])
        self.hi = np.concatenate([lp.upper, shi])
        self.c = np.concatenate([lp.cost, np.zeros(m)])
        self.N = n + m
        self.iters = 0
        self.pivots_since_refactor = 0
        self.degenerate = 0
        self.bland_after = bland_after
        self.bland = False
        self.warm = False
        if basis is None or not self._load(basis):
            self._cold()

    # -- basis setup ---------------------------------------------------
    def _index(self, key: int) -> int | None:
        if key >= 0:
            return key if key < self.n else None
        row = -key - 1
        return self.n + row if row < self.m else None

    def _key(self, j: int) -> int:
        return j if j < self.n else -(j - self.n) - 1

    def _place_nonbasic(self, j: int, prefer_upper: bool):
        lo, hi = self.lo[j], self.hi[j]
        if prefer_upper and np.isfinite(hi):
            self.state[j], self.x[j] = _UPPER, hi
        elif np.isfinite(lo):
            self.state[j], self.x[j] = _LOWER, lo
        elif np.isfinite(hi):
            self.state[j], self.x[j] = _UPPER, hi
        else:
            self.state[j], self.x[j] = _FREE, 0.0

    def _cold(self):
        self.head = np.arange(self.n, self.N)
        self.state = np.empty(self.N, dtype=np.int8)
        self.x = np.zeros(self.N)
        for j in range(self.n):
            self._place_nonbasic(j, False)
        self.state[self.head] = _BASIC
        self.Binv = np.eye(self.m)
        self._recompute_basics()

    def _load(self, basis: Basis) -> bool:
        head = []
        for key in basis.head:
            j = self._index(key)
            if j is None:
                return False
            head.append(j)
        # rows appended since the basis was saved enter with their slack basic
        for i in range(len(basis.head), self.m):
            head.append(self.n + i)
        if len(head) != self.m or len(set(head)) != self.m:
            return False
        self.head = np.array(head, dtype=int)
        try:
            Bm = self.A[:, self.head]
            if self.m and np.linalg.cond(Bm) > 1e12:
                return False
            self.Binv = np.linalg.inv(Bm) if self.m else np.eye(0)
        except np.linalg.LinAlgError:
            return False
        self.state = np.empty(self.N, dtype=np.int8)
        self.x = np.zeros(self.N)
        upper = {self._index(k) for k in basis.at_upper}
        for j in range(self.N):
            self._place_nonbasic(j, j in upper)
        self.state[self.head] = _BASIC
        self._recompute_basics()
        self.warm = True
        return True

    def _recompute_basics(self):
        if self.m == 0:
            return
        nb = self.state != _BASIC
        r = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.head] = self.Binv @ r

    def _refactor(self):
        if self.m:
            self.Binv = np.linalg.inv(self.A[:, self.head])
        self._recompute_basics()
        self.pivots_since_refactor = 0

    # -- helpers ---------------------------------------------------------
    def _infeasibility(self):
        xb = self.x[self.head]
        lo, hi = self.lo[self.head], self.hi[self.head]
        return xb < lo - PRIMAL_TOL, xb > hi + PRIMAL_TOL

    def _eligible(self, d):
        st = self.state
        movable = self.lo < self.hi
        elig = ((st == _LOWER) & (d < -DUAL_TOL)) | ((st == _UPPER) & (d > DUAL_TOL)) | ((st == _FREE) & (np.abs(d) > DUAL_TOL))
        return elig & movable

    def _pivot(self, r: int, q: int, alpha: np.ndarray):
        piv = alpha[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        self.head[r] = q
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def dual_feasible(self) -> bool:
        y = self.c[self.head] @ self.Binv if self.m else np.zeros(0)
        d = self.c - y @ self.A if self.m else self.c.copy()
        d[self.state == _BASIC] = 0.0
        return not self._eligible(d).any()

    # -- primal simplex --------------------------------------------------
    def primal(self, limit: int):
        while True:
            if self.iters >= limit:
                return ITERATION_LIMIT, None
            below, above = self._infeasibility()
            phase1 = bool(below.any() or above.any())
            if phase1:
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                y = cB @ self.Binv
                d = -(y @ self.A)
            else:
                y = self.c[self.head] @ self.Binv if self.m else np.zeros(0)
                d = self.c - y @ self.A if self.m else self.c.copy()
            d[self.head] = 0.0
            elig = self._eligible(d)
            if not elig.any():
                if phase1:
                    return INFEASIBLE, y
                return OPTIMAL, None
            cand = np.flatnonzero(elig)
            q = int(cand[0]) if self.bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if (d[q] < 0) else -1.0
            alpha = self.Binv @ self.A[:, q] if self.m else np.zeros(0)
            theta, r, to_upper = self._ratio(alpha, direction, phase1, below, above)
            if self.lo[q] > -np.inf and self.hi[q] < np.inf and self.hi[q] - self.lo[q] <= theta:
                theta, r = self.hi[q] - self.lo[q], -1
            if not np.isfinite(theta):
                if phase1:
                    return NUMERICAL, None
                self.ray_column = q
                return UNBOUNDED, None
            self.iters += 1
            self.degenerate = self.degenerate + 1 if theta < 1e-12 else 0
            if self.degenerate > self.bland_after:
                self.bland = True
            self.x[q] += direction * theta
            if self.m:
                self.x[self.head] -= theta * direction * alpha
            if r < 0:
                self.state[q] = _UPPER if direction > 0 else _LOWER
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                continue
            leaving = self.head[r]
            self.state[leaving] = _UPPER if to_upper else _LOWER
            self.x[leaving] = self.hi[leaving] if to_upper else self.lo[leaving]
            self.state[q] = _BASIC
            self._pivot(r, q, alpha)

    def _ratio(self, alpha, direction, phase1, below, above):
        best, best_r, best_up, best_piv = np.inf, -1, False, 0.0
        xb = self.x[self.head]
        lo, hi = self.lo[self.head], self.hi[self.head]
        rate = direction * alpha
        for i in np.flatnonzero(np.abs(alpha) > PIVOT_TOL):
            ri = rate[i]
            if ri > 0:
                if phase1 and below[i]:
                    continue
                target, up = (hi[i], True) if (phase1 and above[i]) else (lo[i], False)
                if not np.isfinite(target):
                    continue
                t = (xb[i] - target) / ri
            else:
                if phase1 and above[i]:
                    continue
                target, up = (lo[i], False) if (phase1 and below[i]) else (hi[i], True)
                if not np.isfinite(target):
                    continue
                t = (target - xb[i]) / -ri
            t = max(t, 0.0)
            piv = abs(alpha[i])
            if t < best - 1e-12:
                best, best_r, best_up, best_piv = t, i, up, piv
            elif t <= best + 1e-12:
                if self.bland:
                    if self.head[i] < self.head[best_r]:
                        best, best_r, best_up, best_piv = min(t, best), i, up, piv
                elif piv > best_piv:
                    best, best_r, best_up, best_piv = min(t, best), i, up, piv
        return best, best_r, best_up

    # -- dual simplex (warm restarts after bound or row changes) ---------
    def dual(self, limit: int) -> bool:
        """Run until primal feasible; False if it gave up (caller runs primal)."""
        while True:
            if self.iters >= limit:
                return False
            below, above = self._infeasibility()
            if not (below.any() or above.any()):
                return True
            xb = self.x[self.head]
            lo, hi = self.lo[self.head], self.hi[self.head]
            viol = np.where(below, lo - xb, np.where(above, xb - hi, 0.0))
            r = int(np.argmax(viol))
            increase = bool(below[r])
            y = self.c[self.head] @ self.Binv
            d = self.c - y @ self.A
            d[self.head] = 0.0
            row = self.Binv[r] @ self.A
            st = self.state
            movable = self.lo < self.hi
            if increase:
                elig = ((st == _LOWER) & (row < -PIVOT_TOL)) | ((st == _UPPER) & (row > PIVOT_TOL))
            else:
                elig = ((st == _LOWER) & (row > PIVOT_TOL)) | ((st == _UPPER) & (row < -PIVOT_TOL))
            elig |= (st == _FREE) & (np.abs(row) > PIVOT_TOL)
            elig &= movable
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return False
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12]
            q = int(ties[0]) if self.bland else int(ties[np.argmax(np.abs(row[ties]))])
            alpha = self.Binv @ self.A[:, q]
            leaving = self.head[r]
            target = self.lo[leaving] if increase else self.hi[leaving]
            step = (xb[r] - target) / alpha[r]
            self.iters += 1
            self.degenerate = self.degenerate + 1 if best < 1e-12 else 0
            if self.degenerate > self.bland_after:
                self.bland = True
            self.x[q] += step
            self.x[self.head] -= step * alpha
            self.x[leaving] = target
            self.state[leaving] = _LOWER if increase else _UPPER
            self.state[q] = _BASIC
            self._pivot(r, q, alpha)

    # -- results ---------------------------------------------------------
    def basis(self) -> Basis:
        return Basis(tuple(self._key(int(j)) for j in self.head),
                     frozenset(self._key(int(j)) for j in np.flatnonzero(self.state == _UPPER)))

    def max_violation(self) -> float:
        x = self.x
        bound = np.maximum(self.lo - x, x - self.hi).max(initial=0.0)
        resid = np.abs(self.A @ x - self.b).max(initial=0.0) if self.m else 0.0
        return max(bound, resid)


def solve_lp(lp: LinearProgram, iteration_limit: int = 100_000, basis: Basis | None = None,
             bland_after: int = BLAND_AFTER) -> LpSolution:
    """Solve ``lp``; ``basis`` optionally warm-starts from a previous solve."""
    s = _Simplex(lp, basis, bland_after)
    status = None
    for attempt in range(3):
        if s.warm and attempt == 0 and s.m:
            below, above = s._infeasibility()
            if (below.any() or above.any()) and s.dual_feasible():
                s.dual(iteration_limit)
        status, y1 = s.primal(iteration_limit)
        if status != OPTIMAL:
            break
        s._refactor()
        if s.max_violation() <= CHECK_TOL:
            break
        status = NUMERICAL
    return _result(s, status, y1 if status == INFEASIBLE else None)


def _result(s: _Simplex, status: str, farkas) -> LpSolution:
    n = s.n
    x = s.x[:n].copy()
    if status == OPTIMAL:
        y = s.c[s.head] @ s.Binv if s.m else np.zeros(0)
        d = s.c - y @ s.A if s.m else s.c.copy()
        d[s.head] = 0.0
        obj = float(s.lp.cost @ x)
        return LpSolution(status, x, y, obj, s.iters, None, d[:n].copy(), s.basis(), s.warm)
    if status == UNBOUNDED:
        return LpSolution(status, x, np.zeros(s.m), -np.inf, s.iters, None, None, s.basis(), s.warm)
    obj = float(s.lp.cost @ x)
    return LpSolution(status, x, np.zeros(s.m), obj, s.iters, farkas, None, s.basis(), s.warm)


def resolve(lp: LinearProgram, prior: LpSolution | Basis | None, iteration_limit: int = 100_000,
            bland_after: int = BLAND_AFTER) -> LpSolution:
    """Warm restart after rows/columns were appended or data changed.

    New columns start nonbasic at a bound and new rows start with their
    slack basic; the result contract is identical to :func:`solve_lp`.
    """
    basis = prior.basis if isinstance(prior, LpSolution) else prior
    return solve_lp(lp, iteration_limit, basis, bland_after)


def farkas_gap(lp: LinearProgram, y: np.ndarray) -> float:
    """``y b - sup over bounds of y (A x + s)``; positive certifies infeasibility."""
    slo, shi = lp.slack_bounds()
    lo = np.concatenate([lp.lower, slo])
    hi = np.concatenate([lp.upper, shi])
    g = np.concatenate([y @ lp.A if lp.n else np.zeros(0), y])
    sup = 0.0
    for gj, l, h in zip(g, lo, hi):
        if abs(gj) <= 1e-12:
            continue
        bound = h if gj > 0 else l
        if not np.isfinite(bound):
            return -np.inf
        sup += gj * bound
    return float(y @ lp.rhs - sup)


def dual_objective(lp: LinearProgram, sol: LpSolution) -> float:
    """Dual value ``y b + sum_j`` (bound terms of reduced costs)."""
    val = float(sol.duals @ lp.rhs) if lp.m else 0.0
    d = sol.reduced_costs
    for j in range(lp.n):
        if abs(d[j]) <= DUAL_TOL:
            continue
        if d[j] > 0:
            val += d[j] * lp.lower[j]
        else:
            val += d[j] * lp.upper[j]
    return val
