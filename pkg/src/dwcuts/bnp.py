"""Best-first branch-and-cut-and-price over original variables."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .colgen import (INFEASIBLE, LIMIT, OPTIMAL, ColGenParams, RootResult, initial_columns, make_pricers,
                     run_cut_loop)
from .cuts import Pattern
from .master import Column, RmpState
from .model import Decomposition, MipProblem

log = logging.getLogger(__name__)

CUTS = "cuts"
NO_CUTS = "noCuts"
GAP_TOL = 1e-6
INT_TOL = 1e-6


class BranchingError(ValueError):
    pass


@dataclass
class BnpNode:
    id: int
    depth: int
    bounds: dict[int, tuple[float, float]]
    columns: list[Column] = field(default_factory=list, repr=False)
    cuts: list[Pattern] = field(default_factory=list, repr=False)
    center: np.ndarray | None = field(default=None, repr=False)
    bound: float = -math.inf  # includes the objective offset


@dataclass
class SearchState:
    open: list = field(default_factory=list)
    incumbent: float = math.inf
    x: list | None = None
    bound: float = -math.inf
    nodes: int = 0
    status: str = "running"
    root: RootResult | None = None
    max_depth: int = 0

    @property
    def gap(self) -> float:
        if not math.isfinite(self.incumbent):
            return math.inf
        if not math.isfinite(self.bound):
            return math.inf
        return abs(self.incumbent - self.bound) / max(1.0, abs(self.incumbent))


def choose_branch_variable(x, costs, integer) -> int:
    """Fractional integer variable maximizing ``|c| * min(ceil - x, x - floor)``.

    Ties go to the most fractional value, then to the lowest id.
    """
    best, best_key = None, None
    for v, (xv, c, is_int) in enumerate(zip(x, costs, integer)):
        if not is_int:
            continue
        frac = min(math.ceil(xv) - xv, xv - math.floor(xv))
        if frac <= INT_TOL:
            continue
        key = (abs(float(c)) * frac, frac, -v)
        if best_key is None or key > best_key:
            best, best_key = v, key
    if best is None:
        raise BranchingError("no fractional integer variable to branch on")
    return best


def column_respects(col: Column, bounds) -> bool:
    for v, (lo, hi) in bounds.items():
        if v in col.values and not lo - INT_TOL <= col.values[v] <= hi + INT_TOL:
            return False
    return True


def branch(node: BnpNode, variable: int, value: float, problem: MipProblem, next_id: int) -> tuple[BnpNode, BnpNode]:
    var = problem.variables[variable]
    if not var.is_integer:
        raise BranchingError(f"variable {var.name} is not integer")
    lo, hi = node.bounds.get(variable, (float(var.lower), float(var.upper)))
    children = []
    for k, (clo, chi) in enumerate(((lo, float(math.floor(value))), (float(math.ceil(value)), hi))):
        bounds = dict(node.bounds)
        bounds[variable] = (clo, chi)
        cols = [c for c in node.columns if column_respects(c, bounds)]
        children.append(BnpNode(next_id + k, node.depth + 1, bounds, cols, list(node.cuts),
                                None if node.center is None else node.center.copy(), node.bound))
    return children[0], children[1]


def _contradictory(problem: MipProblem, bounds) -> bool:
    for v, (lo, hi) in bounds.items():
        var = problem.variables[v]
        if max(lo, float(var.lower)) > min(hi, float(var.upper)) + 1e-9:
            return True
    return False


def _build_master(problem, dec, node: BnpNode):
    master = RmpState(problem, dec, node.bounds)
    for q in node.cuts:
        master.add_cut(q)
    for col in node.columns:
        master.add_column(Column(col.block, dict(col.values), col.cost))
    if node.center is not None and node.center.size == master.n_stabilized:
        master.center = node.center.copy()
    return master


def solve(problem: MipProblem, dec: Decomposition, params: ColGenParams | None = None, mode: str = CUTS,
          max_nodes: int = 10_000, stabilize: bool = True, initial_bounds=None) -> SearchState:
    """Solve ``problem`` to proven optimality (or until ``max_nodes``)."""
    if mode not in (CUTS, NO_CUTS):
        raise ValueError(f"unknown mode {mode!r}")
    params = params or ColGenParams()
    offset = float(problem.objective_offset)
    state = SearchState()
    root = BnpNode(0, 0, dict(initial_bounds or {}))
    if not _contradictory(problem, root.bounds):
        cols, x = initial_columns(problem, dec, params.warm_start_budget, root.bounds)
        root.columns = cols
        if x is not None:
            state.incumbent, state.x = float(problem.objective(x)), x
    heapq.heappush(state.open, (root.bound, root.id, root))
    next_id = 1
    while state.open:
        node_bound, _, node = state.open[0]
        state.bound = min(node_bound, state.incumbent)
        if node_bound >= state.incumbent - GAP_TOL * max(1.0, abs(state.incumbent)):
            state.open.clear()
            break
        if state.nodes >= max_nodes:
            break
        heapq.heappop(state.open)
        state.nodes += 1
        state.max_depth = max(state.max_depth, node.depth)
        if _contradictory(problem, node.bounds):
            continue
        master = _build_master(problem, dec, node)
        pricers = make_pricers(problem, dec, node.bounds, node.cuts)
        res = run_cut_loop(master, pricers, params, use_cuts=mode == CUTS, stabilize=stabilize)
        if node.id == 0:
            state.root = res
        log.info("event=node id=%d depth=%d status=%s obj=%.9g integral=%s", node.id, node.depth,
                 res.status, res.objective + offset, res.integral)
        if res.status == INFEASIBLE:
            continue
        if res.status != OPTIMAL:
            # unresolved node: keep its bound and stop
            heapq.heappush(state.open, (node.bound, node.id, node))
            state.status = LIMIT
            break
        lp_bound = res.objective + offset
        if res.integral and res.x is not None:
            x = _clean(problem, res.x)
            if problem.is_feasible(x):
                val = float(problem.objective(x))
                if val < state.incumbent:
                    state.incumbent, state.x = val, x
                continue
        if lp_bound >= state.incumbent - GAP_TOL * max(1.0, abs(state.incumbent)):
            continue
        x = res.x
        v = choose_branch_variable(x, [var.cost for var in problem.variables],
                                   [var.is_integer for var in problem.variables])
        node.bound = max(node.bound, lp_bound)
        node.columns = list(master.columns)
        node.cuts = list(master.cuts)
        node.center = master.center.copy()
        for child in branch(node, v, x[v], problem, next_id):
            heapq.heappush(state.open, (child.bound, child.id, child))
        next_id += 2
    if state.status != LIMIT and not state.open:
        state.status = OPTIMAL if state.x is not None else INFEASIBLE
        state.bound = state.incumbent
    elif state.open:
        state.status = LIMIT
        state.bound = min(state.open[0][0], state.incumbent)
    return state


def _clean(problem: MipProblem, x) -> list:
    return [float(round(v)) if var.is_integer else float(v) for v, var in zip(x, problem.variables)]
