"""Column generation with box-penalty stabilization, subproblem skipping and cut rounds."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cuts import apply_cut, compute_phi, separate
from .lp import INFEASIBLE, OPTIMAL, LinearProgram
from .master import RmpSolution, RmpState, consistent_support_solution, lagrangian_bound, make_column
from .model import Decomposition, MipProblem
from .subsolver import (LIMIT_HIT, Budget, PricingOutcome, Subproblem, branch_and_bound,
                        build_farkas_objective, build_pricing_objective, solve_subproblem)

log = logging.getLogger(__name__)

RC_TOL = 1e-6
FARKAS_TOL = 1e-9
FALLBACK_DELTA = 1e-6
GAP_TOL = 1e-9  # relative, Lagrangian bound vs exact RMP value
LIMIT = "limit"


@dataclass(frozen=True)
class ColGenParams:
    delta: float = 0.05
    tau: int = 10_000
    eta: float = 10.0
    rho: float = 1.0
    xi: float = 0.15
    eps: float = 9e-8
    threads: int = 1
    max_iterations: int = 20_000
    warm_start_budget: int = 5_000
    max_escalations: int = 6

    def __post_init__(self):
        if self.delta < 0 or self.rho < 0 or not 0 <= self.xi < 1 or self.eps < 0:
            raise ValueError("invalid column generation parameters")
        Budget(self.tau, self.eta)  # validates tau and eta

    @property
    def budget(self) -> Budget:
        return Budget(self.tau, self.eta)


@dataclass
class SubproblemSchedule:
    fails: dict[int, int] = field(default_factory=dict)
    skip_until: dict[int, int] = field(default_factory=dict)

    def skipped(self, block: int, iteration: int) -> bool:
        return iteration < self.skip_until.get(block, 0)


def skip_policy(schedule: SubproblemSchedule, block: int, success: bool, iteration: int) -> SubproblemSchedule:
    """After a fail the block sits out ``min(2**fails, 8)`` iterations; success resets it."""
    if success:
        schedule.fails[block] = 0
        schedule.skip_until[block] = 0
    else:
        fails = schedule.fails.get(block, 0) + 1
        schedule.fails[block] = fails
        schedule.skip_until[block] = iteration + min(2 ** fails, 8)
    return schedule


@dataclass
class ColGenResult:
    status: str
    solution: RmpSolution | None
    bound: float
    iterations: int = 0
    columns_added: int = 0
    pricing_work: int = 0


@dataclass
class RoundStats:
    round: int
    cuts_added: int
    rmp_objective: float
    columns: int

    def to_dict(self, sign: int) -> dict:
        return {"round": self.round, "cuts_added": self.cuts_added,
                "rmp_objective": sign * self.rmp_objective, "columns": self.columns}


@dataclass
class RootResult:
    status: str
    objective: float  # internal (minimization) sense
    bound: float
    integral: bool
    x: list | None
    cut_rounds: int = 0
    cuts_added: int = 0
    colgen_iterations: int = 0
    columns_added: int = 0
    rounds: list[RoundStats] = field(default_factory=list)
    from_support: bool = False
    fallback_rounds: int = 0


def make_pricers(problem: MipProblem, dec: Decomposition, bounds=None, cuts=()) -> dict[int, Subproblem]:
    pricers = {i: Subproblem(problem, dec, i, bounds) for i in range(1, dec.k + 1)}
    for q in cuts:
        for b in (q.i, q.j):
            pricers[b].add_cut(q)
    return pricers


def _price(pricers, blocks, objectives, budgets, threads) -> dict[int, PricingOutcome]:
    def work(i):
        sp = pricers[i]
        sp.set_objective(objectives[i])
        return solve_subproblem(sp, budgets[i])

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(i) for i in blocks]
    return dict(zip(blocks, results))


def _objectives(master: RmpState, pricers, blocks, duals, farkas=False):
    problem, dec = master.problem, master.dec
    build = build_farkas_objective if farkas else build_pricing_objective
    return {i: build(i, duals, problem, dec, pricers[i].cuts) for i in blocks}


def _add(master: RmpState, outcome: PricingOutcome, threshold: float) -> bool:
    if outcome.column is None or not outcome.reduced_cost < threshold:
        return False
    return master.add_column(outcome.column) is not None


def _prove(master, pricers, blocks, objectives, params, threshold, start_budgets):
    """Re-price ``blocks`` with growing budgets until each solve is proven."""
    out = {}
    for i in blocks:
        budget = start_budgets.get(i, params.budget)
        for _ in range(params.max_escalations + 1):
            res = _price(pricers, [i], objectives, {i: budget}, 1)[i]
            out[i] = res
            if res.proven or (res.column is not None and res.reduced_cost < threshold):
                break
            budget = budget.escalate()
    return out


def farkas_phase(master: RmpState, pricers, params: ColGenParams) -> tuple[str, RmpSolution, int, int]:
    """Price against infeasibility rays until the master becomes feasible."""
    blocks = list(range(1, master.k + 1))
    added_total = work = 0
    while True:
        sol = master.solve(stabilized=False)
        if sol.status != INFEASIBLE:
            return sol.status, sol, added_total, work
        objectives = _objectives(master, pricers, blocks, sol.farkas, farkas=True)
        outcomes = _price(pricers, blocks, objectives, {i: params.budget for i in blocks}, params.threads)
        pending = [i for i in blocks if not outcomes[i].proven and not
                   (outcomes[i].column is not None and outcomes[i].reduced_cost < -FARKAS_TOL)]
        if pending:
            outcomes.update(_prove(master, pricers, pending, objectives, params, -FARKAS_TOL,
                                   {i: params.budget.escalate() for i in pending}))
        added = 0
        for i in blocks:
            res = outcomes[i]
            work += res.work
            if res.status == INFEASIBLE:
                log.info("event=block_infeasible block=%d", i)
                return INFEASIBLE, sol, added_total, work
            added += _add(master, res, -FARKAS_TOL)
        added_total += added
        if not added:
            if all(outcomes[i].proven for i in blocks):
                return INFEASIBLE, sol, added_total, work
            return LIMIT, sol, added_total, work


def run_colgen(master: RmpState, pricers: dict[int, Subproblem], params: ColGenParams,
               stabilize: bool = True) -> ColGenResult:
    """Converge the RMP of one node.

    The duals handed to pricing are those of the (possibly stabilized) RMP
    solve; the penalty weight shrinks by ``xi`` whenever pricing is proven to
    find nothing and drops to zero below ``eps``, after which one exact pass
    confirms convergence. The loop stops early once the Lagrangian bound of a
    fully priced round meets the unstabilized RMP value.
    """
    status, sol, added_total, work = farkas_phase(master, pricers, params)
    if status != OPTIMAL:
        return ColGenResult(status, sol, np.inf if status == INFEASIBLE else -np.inf, 0, added_total, work)
    blocks = list(range(1, master.k + 1))
    master.rho = params.rho if stabilize else 0.0
    schedule = SubproblemSchedule()
    best_bound = -np.inf
    for it in range(1, params.max_iterations + 1):
        sol = master.solve(stabilized=master.rho > 0)
        if sol.status == INFEASIBLE:
            status, sol, added, w = farkas_phase(master, pricers, params)
            added_total += added
            work += w
            if status != OPTIMAL:
                return ColGenResult(status, sol, best_bound, it, added_total, work)
            continue
        if sol.status != OPTIMAL:
            return ColGenResult(LIMIT, sol, best_bound, it, added_total, work)
        duals = sol.duals
        active = [i for i in blocks if not schedule.skipped(i, it)]
        objectives = _objectives(master, pricers, blocks, duals)
        outcomes = _price(pricers, active, objectives, {i: params.budget for i in active}, params.threads)
        added = 0
        for i in active:
            res = outcomes[i]
            work += res.work
            if res.status == INFEASIBLE:
                return ColGenResult(INFEASIBLE, sol, np.inf, it, added_total, work)
            ok = _add(master, res, -RC_TOL)
            added += ok
            skip_policy(schedule, i, ok, it)
        pending = [i for i in blocks if i not in outcomes or not outcomes[i].proven]
        if not added and pending:
            start = {i: params.budget.escalate() if i in outcomes else params.budget for i in pending}
            proof = _prove(master, pricers, pending, objectives, params, -RC_TOL, start)
            for i in pending:
                res = proof[i]
                work += res.work
                if res.status == INFEASIBLE:
                    return ColGenResult(INFEASIBLE, sol, np.inf, it, added_total, work)
                ok = _add(master, res, -RC_TOL)
                added += ok
                skip_policy(schedule, i, ok, it)
            outcomes.update(proof)
        if all(i in outcomes for i in blocks):
            bound = lagrangian_bound(sol.dual_value, {i: outcomes[i].dual_bound for i in blocks})
            best_bound = max(best_bound, bound)
        added_total += added
        master.center = duals.vector[:master.n_stabilized].copy()
        log.debug("iter=%d rmp=%.9g bound=%.9g added=%d cuts=%d rho=%.3g",
                  it, sol.objective, best_bound, added, len(master.cuts), master.rho)
        if added:
            continue
        if not all(outcomes[i].proven for i in blocks):
            return ColGenResult(LIMIT, sol, best_bound, it, added_total, work)
        if master.rho > 0:
            # the stabilized duals priced out: if they already certify the exact
            # RMP value, the remaining shrink steps cannot change anything
            exact = master.solve(stabilized=False)
            if exact.status == OPTIMAL and best_bound >= exact.objective - GAP_TOL * max(1.0, abs(exact.objective)):
                master.rho = 0.0
                log.info("event=colgen_done iter=%d rmp=%.9g columns=%d cuts=%d certified=1", it,
                         exact.objective, len(master.columns), len(master.cuts))
                return ColGenResult(OPTIMAL, exact, best_bound, it, added_total, work)
            master.rho *= params.xi
            if master.rho < params.eps:
                master.rho = 0.0
            continue
        # exact duals, every block proven: the RMP value is the node's LP value
        best_bound = max(best_bound, sol.objective)
        log.info("event=colgen_done iter=%d rmp=%.9g columns=%d cuts=%d", it, sol.objective,
                 len(master.columns), len(master.cuts))
        return ColGenResult(OPTIMAL, sol, best_bound, it, added_total, work)
    return ColGenResult(LIMIT, sol, best_bound, params.max_iterations, added_total, work)


def _node_point(master: RmpState, sol: RmpSolution):
    x, integral = master.extract_original_solution(sol.lam, sol.master_x)
    return x, integral


def run_cut_loop(master: RmpState, pricers: dict[int, Subproblem], params: ColGenParams,
                 use_cuts: bool = True, stabilize: bool = True) -> RootResult:
    """Converge, separate, install cuts, repeat until nothing is violated.

    When no cut exceeds ``delta`` but the point is fractional, an integral
    solution is assembled from the support if one of equal value exists;
    otherwise separation is retried at a tiny threshold.
    """
    res = run_colgen(master, pricers, params, stabilize)
    iterations, columns = res.iterations, res.columns_added
    out = RootResult(res.status, np.inf, res.bound, False, None, colgen_iterations=iterations,
                     columns_added=columns)
    dec = master.dec
    while True:
        if res.status != OPTIMAL:
            out.status, out.bound = res.status, res.bound
            return out
        sol = res.solution
        x, integral = _node_point(master, sol)
        out.objective, out.bound, out.x, out.integral = sol.objective, res.bound, x, integral
        if not use_cuts or integral:
            return out
        phi = compute_phi(sol.lam, master.columns, dec.linking_sets, dec.k)
        found = separate(phi, params.delta, master.cuts)
        if not found:
            support = consistent_support_solution(master, sol.lam)
            if support is not None and abs(support[1] - sol.objective) <= 1e-6 * max(1.0, abs(sol.objective)):
                out.x, out.integral, out.from_support = support[0], True, True
                log.info("event=support_solution objective=%.9g", sol.objective)
                return out
            found = separate(phi, FALLBACK_DELTA, master.cuts)
            if not found:
                return out
            out.fallback_rounds += 1
        for q, _gap in found:
            apply_cut(q, master, pricers)
        out.cut_rounds += 1
        out.cuts_added += len(found)
        res = run_colgen(master, pricers, params, stabilize)
        out.colgen_iterations += res.iterations
        out.columns_added += res.columns_added
        if res.solution is not None and res.status == OPTIMAL:
            out.rounds.append(RoundStats(out.cut_rounds, len(found), res.solution.objective, len(master.columns)))
        log.info("event=cut_round round=%d cuts=%d rmp=%.9g", out.cut_rounds, len(found),
                 res.solution.objective if res.status == OPTIMAL else float("nan"))


def compact_lp(problem: MipProblem, bounds=None) -> tuple[LinearProgram, np.ndarray]:
    n = problem.n
    A = np.zeros((len(problem.constraints), n))
    for r, con in enumerate(problem.constraints):
        for v, a in con.coeffs.items():
            A[r, v] = float(a)
    lower = np.array([float(v.lower) for v in problem.variables])
    upper = np.array([float(v.upper) for v in problem.variables])
    for v, (lo, hi) in (bounds or {}).items():
        lower[v], upper[v] = max(lower[v], lo), min(upper[v], hi)
    lp = LinearProgram.from_arrays([float(v.cost) for v in problem.variables], A,
                                   [c.sense for c in problem.constraints],
                                   [float(c.rhs) for c in problem.constraints], lower, upper)
    return lp, np.array([v.is_integer for v in problem.variables])


def initial_columns(problem: MipProblem, dec: Decomposition, warm_start_budget: int, bounds=None):
    """Columns of a compact-model feasible point found within the work budget.

    Returns (columns, x) or ([], None) when nothing was found; the caller
    then relies on Farkas pricing.
    """
    if warm_start_budget <= 0:
        return [], None
    lp, integer = compact_lp(problem, bounds)
    res = branch_and_bound(lp, integer, warm_start_budget)
    if res.x is None:
        return [], None
    x = [float(v) for v in res.x]
    if not problem.is_feasible(x):
        return [], None
    return [make_column(problem, dec, i, x) for i in range(1, dec.k + 1)], x
