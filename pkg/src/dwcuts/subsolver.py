"""Pricing subproblems and the small branch-and-bound MIP engine behind them."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .cuts import Pattern, indicator_rows
from .lp import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, LinearProgram, resolve
from .master import Column, DualValues, make_column
from .model import Decomposition, MipProblem

INT_TOL = 1e-6
LIMIT_HIT = "limitHit"


class SubproblemError(RuntimeError):
    pass


@dataclass(frozen=True)
class Budget:
    work_limit: int = 10_000
    escalation: float = 10.0

    def __post_init__(self):
        if self.work_limit < 0:
            raise ValueError("work limit must be nonnegative")
        if self.escalation <= 1:
            raise ValueError("escalation factor must exceed 1")

    def escalate(self) -> "Budget":
        return Budget(int(math.ceil(self.work_limit * self.escalation)) or 1, self.escalation)


@dataclass
class MipResult:
    status: str
    x: np.ndarray | None
    value: float
    bound: float
    work: int
    nodes: int


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    basis: object = field(compare=False, default=None)


def _box_bound(lp: LinearProgram, lower, upper) -> float:
    lo = np.where(lp.cost > 0, lower, upper)
    if not np.all(np.isfinite(lo[lp.cost != 0])):
        return -np.inf
    return float(lp.cost[lp.cost != 0] @ lo[lp.cost != 0])


def branch_and_bound(lp: LinearProgram, integer: np.ndarray, work_limit: int,
                     cutoff: float = np.inf) -> MipResult:
    """Minimize ``lp`` with integrality on ``integer`` columns.

    Best-bound node order, most-fractional branching (lowest index on ties).
    ``work_limit`` counts simplex iterations plus one unit per node; when it
    runs out the result is ``limitHit`` with the best point so far and the
    smallest open-node bound.
    """
    lp = lp.copy()
    integer = np.asarray(integer, dtype=bool)
    base_lo, base_hi = lp.lower.copy(), lp.upper.copy()
    lo0 = base_lo.copy()
    hi0 = base_hi.copy()
    lo0[integer] = np.ceil(lo0[integer] - INT_TOL)
    hi0[integer] = np.floor(hi0[integer] + INT_TOL)
    if np.any(lo0 > hi0):
        return MipResult(INFEASIBLE, None, np.inf, np.inf, 0, 0)
    heap = [_Node(_box_bound(lp, lo0, hi0), 0, lo0, hi0)]
    seq = 1
    best_x, best = None, cutoff
    work = nodes = 0
    while heap:
        if heap[0].bound >= best - 1e-9:
            heap.clear()
            break
        if work >= work_limit:
            break
        node = heapq.heappop(heap)
        nodes += 1
        work += 1
        lp.lower[:], lp.upper[:] = node.lower, node.upper
        sol = resolve(lp, node.basis, max(0, work_limit - work))
        work += sol.iterations
        if sol.status == ITERATION_LIMIT:
            heapq.heappush(heap, node)
            break
        if sol.status == INFEASIBLE:
            continue
        if sol.status == UNBOUNDED:
            raise SubproblemError("subproblem LP is unbounded; block variables need finite bounds")
        if sol.status != OPTIMAL:
            raise SubproblemError(f"subproblem LP failed with status {sol.status}")
        bound = max(node.bound, sol.objective)
        if bound >= best - 1e-9:
            continue
        x = sol.x
        frac = np.abs(x - np.round(x))
        frac[~integer] = 0.0
        j = int(np.argmax(frac))
        if frac[j] <= INT_TOL:
            xr = np.where(integer, np.round(x), x)
            val = float(lp.cost @ xr)
            if val < best:
                best, best_x = val, xr
            continue
        down_hi = node.upper.copy()
        down_hi[j] = math.floor(x[j])
        up_lo = node.lower.copy()
        up_lo[j] = math.ceil(x[j])
        heapq.heappush(heap, _Node(bound, seq, node.lower, down_hi, sol.basis))
        heapq.heappush(heap, _Node(bound, seq + 1, up_lo, node.upper, sol.basis))
        seq += 2
    if heap:
        bound = min(heap[0].bound, best)
        return MipResult(LIMIT_HIT, best_x, best, bound, work, nodes)
    if best_x is None:
        return MipResult(INFEASIBLE, None, np.inf, np.inf if cutoff == np.inf else cutoff, work, nodes)
    return MipResult(OPTIMAL, best_x, best, best, work, nodes)


@dataclass
class PricingObjective:
    var_costs: dict[int, float]
    cut_costs: dict[Pattern, float]
    constant: float


def build_pricing_objective(block: int, duals: DualValues, problem: MipProblem, dec: Decomposition,
                            cuts=(), farkas: bool = False) -> PricingObjective:
    """Reduced-cost objective of ``block`` under ``duals``.

    With ``farkas`` the native costs are dropped and ``duals`` is read as an
    infeasibility ray, so a negative value marks a column that helps restore
    master feasibility.
    """
    costs = {}
    for v in dec.block_vars[block]:
        costs[v] = 0.0 if farkas else float(dec.cost_share(v, block))
    for c in dec.block_rows[0]:
        kappa = duals.coupling.get(c)
        if kappa is None:
            raise SubproblemError(f"missing dual for coupling row {c}")
        if kappa == 0:
            continue
        for v, a in problem.constraints[c].coeffs.items():
            if v in costs and dec.owner_block(v) == block:
                costs[v] -= kappa * float(a)
    for v in dec.block_vars[block]:
        bs = dec.var_blocks[v]
        for a, b in zip(bs, bs[1:]):
            if block not in (a, b):
                continue
            omega = duals.linking.get((v, a, b))
            if omega is None:
                raise SubproblemError(f"missing dual for linking row of variable {v} between blocks {a} and {b}")
            costs[v] -= omega if block == a else -omega
    cut_costs = {}
    for q in cuts:
        s = q.sign(block)
        if not s:
            continue
        sigma = duals.consistency.get(q)
        if sigma is None:
            raise SubproblemError(f"missing dual for cut {q}")
        cut_costs[q] = -s * sigma
    pi = duals.convexity.get(block)
    if pi is None:
        raise SubproblemError(f"missing convexity dual for block {block}")
    return PricingObjective(costs, cut_costs, -pi)


def build_farkas_objective(block: int, ray: DualValues, problem: MipProblem, dec: Decomposition,
                           cuts=()) -> PricingObjective:
    if ray is None:
        raise SubproblemError("Farkas pricing needs an infeasibility ray")
    return build_pricing_objective(block, ray, problem, dec, cuts, farkas=True)


@dataclass
class PricingOutcome:
    status: str
    column: Column | None
    reduced_cost: float
    dual_bound: float
    work: int = 0

    @property
    def proven(self) -> bool:
        return self.status in (OPTIMAL, INFEASIBLE)


class Subproblem:
    """Block-local MIP: block variables, native rows, and one indicator per touching cut."""

    def __init__(self, problem: MipProblem, dec: Decomposition, block: int,
                 bounds: dict[int, tuple[float, float]] | None = None):
        self.problem, self.dec, self.block = problem, dec, block
        self.vars = list(dec.block_vars[block])
        self.pos = {v: p for p, v in enumerate(self.vars)}
        n = len(self.vars)
        rows, sense, rhs = [], [], []
        for c in dec.block_rows[block]:
            con = problem.constraints[c]
            row = np.zeros(n)
            for v, a in con.coeffs.items():
                row[self.pos[v]] = float(a)
            rows.append(row)
            sense.append(con.sense)
            rhs.append(float(con.rhs))
        lower = np.array([float(problem.variables[v].lower) for v in self.vars])
        upper = np.array([float(problem.variables[v].upper) for v in self.vars])
        for v, (lo, hi) in (bounds or {}).items():
            if v in self.pos:
                lower[self.pos[v]] = max(lower[self.pos[v]], lo)
                upper[self.pos[v]] = min(upper[self.pos[v]], hi)
        A = np.array(rows).reshape(len(rows), n)
        self.lp = LinearProgram.from_arrays(np.zeros(n), A, sense, rhs, lower, upper)
        self.integer = [problem.variables[v].is_integer for v in self.vars]
        self.cut_cols: dict[Pattern, int] = {}
        self.objective = PricingObjective({v: 0.0 for v in self.vars}, {}, 0.0)

    def add_cut(self, q: Pattern) -> int:
        if q in self.cut_cols:
            raise SubproblemError(f"cut {q} already present in block {self.block}")
        if self.block not in (q.i, q.j):
            raise SubproblemError(f"cut {q} does not touch block {self.block}")
        col = self.lp.add_columns([0.0], 0.0, 1.0, np.zeros((self.lp.m, 1)))[0]
        self.integer.append(True)
        rows, sense, rhs = indicator_rows(q, self.pos, col, self.lp.n)
        self.lp.add_rows(rows, sense, rhs)
        self.cut_cols[q] = col
        return col

    @property
    def cuts(self) -> list[Pattern]:
        return list(self.cut_cols)

    def set_objective(self, obj: PricingObjective):
        cost = np.zeros(self.lp.n)
        for v, c in obj.var_costs.items():
            cost[self.pos[v]] = c
        for q, c in obj.cut_costs.items():
            cost[self.cut_cols[q]] = c
        self.lp.cost = cost
        self.objective = obj

    def column_from(self, x) -> Column:
        return make_column(self.problem, self.dec, self.block, {v: x[p] for v, p in self.pos.items()})

    def y_values(self, x) -> dict[Pattern, int]:
        return {q: int(round(x[j])) for q, j in self.cut_cols.items()}


def solve_subproblem(sp: Subproblem, budget: Budget) -> PricingOutcome:
    res = branch_and_bound(sp.lp, np.array(sp.integer), budget.work_limit)
    const = sp.objective.constant
    if res.status == INFEASIBLE:
        return PricingOutcome(INFEASIBLE, None, np.inf, np.inf, res.work)
    col = sp.column_from(res.x) if res.x is not None else None
    value = res.value + const if res.x is not None else np.inf
    return PricingOutcome(res.status, col, value, res.bound + const, res.work)
