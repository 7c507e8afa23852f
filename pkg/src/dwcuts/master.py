"""Restricted master problem over block columns.

Row families, in LP order:

* coupling rows (constraints of set 0), dual ``kappa``
* variable-linking rows ``copy_a(v) - copy_b(v) = 0`` for consecutive blocks
  a < b containing v, dual ``omega``
* convexity rows ``sum lambda_i = 1``, dual ``pi``
* consistency rows (appended as cuts arrive), dual ``sigma``

Variables that appear in no block are plain master columns. Every
non-consistency row carries a pair of penalty columns implementing a
width-0 box penalty on its dual around a stabilization center.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cuts import Pattern, column_pattern
from .lp import INFEASIBLE, OPTIMAL, LinearProgram, LpSolution, resolve
from .model import Decomposition, MipProblem

log = logging.getLogger(__name__)

INT_TOL = 1e-6
LINK_TOL = 1e-6


class MasterError(RuntimeError):
    pass


@dataclass(eq=False)
class Column:
    block: int
    values: dict[int, float]
    cost: float
    patterns: dict[int, Pattern] = field(default_factory=dict, repr=False)
    id: int = -1

    def key(self) -> tuple:
        return (self.block, tuple(sorted((v, round(float(x), 9)) for v, x in self.values.items())))


def make_column(problem: MipProblem, dec: Decomposition, block: int, values) -> Column:
    """Column for ``block`` from a full or block-restricted assignment."""
    vals = {v: float(values[v]) for v in dec.block_vars[block]}
    for v, var in ((v, problem.variables[v]) for v in vals):
        if var.is_integer:
            vals[v] = float(round(vals[v]))
    cost = sum(float(dec.cost_share(v, block)) * x for v, x in vals.items())
    return Column(block, vals, cost)


def column_feasible(problem: MipProblem, dec: Decomposition, col: Column, tol=1e-6) -> bool:
    for v, x in col.values.items():
        var = problem.variables[v]
        if x < float(var.lower) - tol or x > float(var.upper) + tol:
            return False
    for c in dec.block_rows[col.block]:
        if not problem.constraints[c].satisfied(col.values, tol):
            return False
    return True


@dataclass
class DualValues:
    coupling: dict[int, float]
    linking: dict[tuple[int, int, int], float]
    convexity: dict[int, float]
    consistency: dict[Pattern, float]
    vector: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def zeros(cls, master: "RmpState") -> "DualValues":
        return master.duals_from_vector(np.zeros(master.lp.m))


@dataclass
class RmpSolution:
    status: str
    lam: np.ndarray
    master_x: dict[int, float]
    duals: DualValues | None
    objective: float
    dual_value: float
    penalty_usage: float
    farkas: DualValues | None = None
    lp: LpSolution | None = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


class RmpState:
    def __init__(self, problem: MipProblem, dec: Decomposition, bounds: dict[int, tuple[float, float]] | None = None):
        self.problem = problem
        self.dec = dec
        self.bounds = dict(bounds or {})
        self.row_keys: list[tuple] = []
        rhs, sense = [], []
        for c in dec.block_rows[0]:
            con = problem.constraints[c]
            self.row_keys.append(("coupling", c))
            rhs.append(float(con.rhs))
            sense.append(con.sense)
        for v in dec.linking_vars():
            bs = dec.var_blocks[v]
            for a, b in zip(bs, bs[1:]):
                self.row_keys.append(("link", (v, a, b)))
                rhs.append(0.0)
                sense.append("=")
        for i in range(1, dec.k + 1):
            self.row_keys.append(("conv", i))
            rhs.append(1.0)
            sense.append("=")
        self.row_index = {key: r for r, key in enumerate(self.row_keys)}
        m = len(self.row_keys)
        self.n_stabilized = m
        self.lp = LinearProgram(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((m, 0)), sense, np.array(rhs))
        # master-only variables
        self.master_vars = list(dec.master_only)
        self.master_cols = {}
        for v in self.master_vars:
            var = problem.variables[v]
            lo, hi = self.bounds.get(v, (float(var.lower), float(var.upper)))
            vec = np.zeros(m)
            for c in dec.block_rows[0]:
                a = problem.constraints[c].coeffs.get(v)
                if a is not None:
                    vec[self.row_index[("coupling", c)]] = float(a)
            self.master_cols[v] = self.lp.add_columns([float(var.cost)], lo, hi, vec.reshape(m, 1))[0]
        # box-penalty columns: +e_r and -e_r for every stabilized row
        pen = np.hstack([np.eye(m), -np.eye(m)]) if m else np.zeros((0, 0))
        rng = self.lp.add_columns(np.zeros(2 * m), 0.0, 0.0, pen)
        self.pen_cols = np.arange(rng.start, rng.stop)
        self.center = np.zeros(m)
        self.rho = 0.0
        self.columns: list[Column] = []
        self.lam_cols: list[int] = []
        self._keys: set = set()
        self.cuts: dict[Pattern, int] = {}
        self._last: LpSolution | None = None
        self._block_coeffs = {i: self._block_linear_form(i) for i in range(1, dec.k + 1)}

    # -- structure -------------------------------------------------------
    def _block_linear_form(self, i: int) -> list[tuple[int, int, float]]:
        """(row, var, coef) triples of a block's columns in fixed rows."""
        dec, out = self.dec, []
        for c in dec.block_rows[0]:
            r = self.row_index[("coupling", c)]
            for v, a in self.problem.constraints[c].coeffs.items():
                if dec.var_blocks[v] and dec.owner_block(v) == i:
                    out.append((r, v, float(a)))
        for key, r in self.row_index.items():
            if key[0] == "link":
                v, a, b = key[1]
                if i == a:
                    out.append((r, v, 1.0))
                elif i == b:
                    out.append((r, v, -1.0))
        return out

    def column_vector(self, col: Column) -> np.ndarray:
        vec = np.zeros(self.lp.m)
        for r, v, a in self._block_coeffs[col.block]:
            vec[r] += a * col.values[v]
        vec[self.row_index[("conv", col.block)]] = 1.0
        for q, r in self.cuts.items():
            s = q.sign(col.block)
            if s and self._matches(col, q):
                vec[r] = s
        return vec

    def _matches(self, col: Column, q: Pattern) -> bool:
        shared = self.dec.linking_set(q.i, q.j)
        return column_pattern(col, shared, q.partner(col.block)) == q

    @property
    def k(self) -> int:
        return self.dec.k

    def block_columns(self, i: int) -> list[Column]:
        return [c for c in self.columns if c.block == i]

    # -- mutation ----------------------------------------------------------
    def add_column(self, col: Column) -> int | None:
        """Install ``col``; returns its id or None when it duplicates an existing one."""
        if not 1 <= col.block <= self.k:
            raise MasterError(f"block index {col.block} out of range 1..{self.k}")
        key = col.key()
        if key in self._keys:
            return None
        self._keys.add(key)
        col.id = len(self.columns)
        self.columns.append(col)
        vec = self.column_vector(col)
        self.lam_cols.append(self.lp.add_columns([col.cost], 0.0, np.inf, vec.reshape(-1, 1))[0])
        return col.id

    def has_cut(self, q: Pattern) -> bool:
        return q in self.cuts

    def add_cut(self, q: Pattern) -> int:
        if q in self.cuts:
            raise MasterError(f"cut {q} already installed")
        row = np.zeros(self.lp.n)
        for col, j in zip(self.columns, self.lam_cols):
            s = q.sign(col.block)
            if s and self._matches(col, q):
                row[j] = s
        r = self.lp.add_rows(row.reshape(1, -1), "=", [0.0])[0]
        self.cuts[q] = r
        self.row_keys.append(("cut", q))
        self.row_index[("cut", q)] = r
        return r

    def set_master_bounds(self, v: int, lo: float, hi: float):
        j = self.master_cols[v]
        self.lp.lower[j], self.lp.upper[j] = lo, hi
        self.bounds[v] = (lo, hi)

    # -- duals ---------------------------------------------------------------
    def duals_from_vector(self, y: np.ndarray) -> DualValues:
        coupling, linking, convexity, consistency = {}, {}, {}, {}
        for (kind, key), val in zip(self.row_keys, y):
            val = float(val)
            if kind == "coupling":
                coupling[key] = val
            elif kind == "link":
                linking[key] = val
            elif kind == "conv":
                convexity[key] = val
            else:
                consistency[key] = val
        return DualValues(coupling, linking, convexity, consistency, np.asarray(y, dtype=float))

    def dual_value(self, y: np.ndarray) -> float:
        """``y b`` plus the best bound term of every master-only column."""
        val = float(y @ self.lp.rhs)
        for v, j in self.master_cols.items():
            d = self.lp.cost[j] - float(y @ self.lp.A[:, j])
            if abs(d) <= 1e-12:
                continue
            bound = self.lp.lower[j] if d > 0 else self.lp.upper[j]
            if not np.isfinite(bound):
                return -np.inf
            val += d * bound
        return val

    # -- solve -------------------------------------------------------------
    def solve(self, stabilized: bool = False, iteration_limit: int = 1_000_000) -> RmpSolution:
        m = self.n_stabilized
        if stabilized and self.rho > 0:
            self.lp.upper[self.pen_cols] = self.rho
            self.lp.cost[self.pen_cols[:m]] = self.center
            self.lp.cost[self.pen_cols[m:]] = -self.center
        else:
            self.lp.upper[self.pen_cols] = 0.0
            self.lp.cost[self.pen_cols] = 0.0
        sol = resolve(self.lp, self._last, iteration_limit)
        if sol.status in (OPTIMAL, INFEASIBLE):
            self._last = sol
        lam = sol.x[self.lam_cols] if self.lam_cols else np.zeros(0)
        master_x = {v: float(sol.x[j]) for v, j in self.master_cols.items()}
        usage = float(sol.x[self.pen_cols].sum()) if len(self.pen_cols) else 0.0
        if sol.status == OPTIMAL:
            duals = self.duals_from_vector(sol.duals)
            true_obj = float(self.lp.cost[self.lam_cols] @ lam) if self.lam_cols else 0.0
            true_obj += sum(float(self.problem.variables[v].cost) * x for v, x in master_x.items())
            return RmpSolution(OPTIMAL, lam, master_x, duals, true_obj, self.dual_value(sol.duals), usage, None, sol)
        farkas = self.duals_from_vector(sol.farkas) if sol.status == INFEASIBLE else None
        return RmpSolution(sol.status, lam, master_x, None, np.inf, -np.inf, usage, farkas, sol)

    # -- translation ---------------------------------------------------------
    def extract_original_solution(self, lam, master_x=None, check=True):
        """Original variable values and an integrality flag.

        Linking variables are read from their first block copy; other copies
        must agree within ``LINK_TOL``.
        """
        n = self.problem.n
        copies: dict[tuple[int, int], float] = {}
        for col, w in zip(self.columns, lam):
            if w <= 0:
                continue
            for v, x in col.values.items():
                copies[(v, col.block)] = copies.get((v, col.block), 0.0) + w * x
        x = [0.0] * n
        for v in range(n):
            bs = self.dec.var_blocks[v]
            if not bs:
                x[v] = (master_x or {}).get(v, 0.0)
                continue
            x[v] = copies.get((v, bs[0]), 0.0)
            if check:
                for b in bs[1:]:
                    if abs(copies.get((v, b), 0.0) - x[v]) > LINK_TOL:
                        raise MasterError(f"linking copies of variable {v} disagree between blocks {bs[0]} and {b}")
        integral = all(abs(x[v.id] - round(x[v.id])) <= INT_TOL for v in self.problem.variables if v.is_integer)
        return x, integral

    def substituted_objective(self, lam) -> float:
        """Objective with every linking variable priced only on its first copy."""
        total = 0.0
        for col, w in zip(self.columns, lam):
            for v, x in col.values.items():
                if self.dec.owner_block(v) == col.block:
                    total += w * float(self.problem.variables[v].cost) * x
        return total

    def inherit(self, problem=None, dec=None, bounds=None, keep=None) -> "RmpState":
        """Fresh master with the columns passing ``keep`` and all cuts."""
        child = RmpState(problem or self.problem, dec or self.dec, bounds if bounds is not None else self.bounds)
        for q in self.cuts:
            child.add_cut(q)
        for col in self.columns:
            if keep is None or keep(col):
                child.add_column(Column(col.block, dict(col.values), col.cost))
        child.center = self.center.copy()
        return child


def lagrangian_bound(rmp_objective: float, reduced_costs) -> float:
    """``rmp_objective + sum_i min(0, rc_i)``; every block must supply a bound."""
    total = rmp_objective
    for i, rc in (reduced_costs.items() if isinstance(reduced_costs, dict) else enumerate(reduced_costs)):
        if rc is None:
            raise MasterError(f"missing reduced-cost bound for block {i}")
        total += min(0.0, rc)
    return total


def consistent_support_solution(master: RmpState, lam, max_steps: int = 20000):
    """Integral master point built only from columns in the support of ``lam``.

    Picks one positive-weight column per block so that all shared variables
    agree (depth-first with backtracking). Returns (x, objective) when the
    assembled point is feasible for the original problem, else None.
    """
    dec, problem = master.dec, master.problem
    support = {i: [] for i in range(1, dec.k + 1)}
    for col, w in zip(master.columns, lam):
        if w > 1e-9:
            support[col.block].append((w, col))
    for i in support:
        support[i].sort(key=lambda t: (-t[0], t[1].id))
        if not support[i]:
            return None
    chosen: dict[int, Column] = {}
    steps = 0

    def compatible(col):
        for j, other in chosen.items():
            for v, x in col.values.items():
                if v in other.values and abs(other.values[v] - x) > 1e-9:
                    return False
        return True

    def dfs(i):
        nonlocal steps
        if i > dec.k:
            return True
        for _, col in support[i]:
            steps += 1
            if steps > max_steps:
                return False
            if compatible(col):
                chosen[i] = col
                if dfs(i + 1):
                    return True
                del chosen[i]
        return False

    if not dfs(1):
        return None
    x = [0.0] * problem.n
    for i, col in chosen.items():
        for v, val in col.values.items():
            x[v] = val
    for v in master.master_vars:
        val = master.lp.lower[master.master_cols[v]]
        x[v] = val
    if master.master_vars:
        return None
    if not problem.is_feasible(x):
        return None
    return x, float(sum(col.cost for col in chosen.values()))


def to_fraction_solution(problem: MipProblem, x) -> list[Fraction]:
    out = []
    for var in problem.variables:
        out.append(Fraction(round(x[var.id])) if var.is_integer else Fraction(x[var.id]).limit_denominator(10**9))
    return out
