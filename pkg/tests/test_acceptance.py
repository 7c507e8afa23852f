"""End-to-end acceptance checks, one test per criterion.

Every test records a single ``criterion N: PASS|FAIL|SOFT-FAIL ...`` line
that is echoed in the terminal summary.
"""

import json
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

import conftest
from conftest import DATA, e1_master, random_decomposed, suite_instance, suite_params
from dwcuts.bnp import CUTS, NO_CUTS, solve
from dwcuts.cli import main
from dwcuts.colgen import ColGenParams, make_pricers, run_colgen, run_cut_loop
from dwcuts.cuts import Pattern, build_consistency_matrix, compute_phi, pool_patterns, separate
from dwcuts.lp import OPTIMAL, LinearProgram, solve_lp
from dwcuts.master import RmpState
from dwcuts.model import BINARY, INTEGER, Constraint, Decomposition, MipProblem, Variable, binarize_linking_integers
from dwcuts.oracle import brute_solve, naive_separate, tu_sample_check
from dwcuts.tkp import build_model, decompose, generate

SUITE_SEEDS = range(100)


@contextmanager
def criterion(n: int, title: str):
    info = {"detail": "", "verdict": "PASS"}
    try:
        yield info
    except BaseException:
        conftest.ACCEPTANCE.append(f"criterion {n}: FAIL {title} {info['detail']}".rstrip())
        raise
    conftest.ACCEPTANCE.append(f"criterion {n}: {info['verdict']} {title} {info['detail']}".rstrip())
    print(conftest.ACCEPTANCE[-1])


@pytest.fixture(scope="module")
def suite_runs():
    runs = {}
    start = time.perf_counter()
    for seed in SUITE_SEEDS:
        _, p, d = suite_instance(seed)
        runs[seed] = (p, d, solve(p, d, ColGenParams(), CUTS), brute_solve(p))
    return runs, time.perf_counter() - start


def _root_pool(seed):
    _, p, d = suite_instance(seed)
    m = RmpState(p, d)
    pricers = make_pricers(p, d)
    root = run_cut_loop(m, pricers, ColGenParams())
    return p, d, m, root


def test_criterion_01_worked_example():
    with criterion(1, "worked example: relaxation 6.5, cut gives integral 6 at one node") as info:
        start = time.perf_counter()
        p, d, m = e1_master()
        sol = m.solve()
        assert sol.status == OPTIMAL and -sol.objective == pytest.approx(6.5, abs=1e-6)
        q00 = Pattern(1, 2, ((1, 0), (2, 0)))
        m.add_cut(q00)
        ybar = m.lp.A[m.cuts[q00], m.lam_cols]
        assert list(np.abs(ybar).astype(int)) == [1, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0]
        assert -m.solve().objective == pytest.approx(6.0, abs=1e-6)
        state = solve(p, d, ColGenParams(), CUTS)
        assert state.status == "optimal" and state.nodes == 1
        assert state.root.integral and p.to_original(state.root.objective) == pytest.approx(6.0, abs=1e-6)
        assert p.to_original(state.incumbent) == pytest.approx(6.0, abs=1e-6)
        elapsed = time.perf_counter() - start
        info["detail"] = f"({elapsed:.3f}s, root cuts {state.root.cuts_added})"
        assert elapsed < 1.0


def test_criterion_02_integral_root_property(suite_runs):
    runs, elapsed = suite_runs
    with criterion(2, "100 random TKP instances: integral root, no branching, oracle optimum") as info:
        bad, support = [], 0
        for seed, (p, d, state, ref) in runs.items():
            x = [round(v) for v in state.x] if state.x is not None else None
            ok = (state.status == "optimal" and state.nodes == 1 and state.root.integral
                  and x is not None and p.is_feasible(x)
                  and p.objective(x) == ref.value
                  and abs(Fraction(state.incumbent) - ref.value) <= Fraction(1, 10**6))
            support += state.root.from_support
            if not ok:
                bad.append(seed)
        info["detail"] = f"({len(runs) - len(bad)}/{len(runs)} ok, {support} closed by support, {elapsed:.1f}s)"
        assert not bad, f"failing seeds {bad}"
        assert elapsed < 300


def test_criterion_03_cut_rounds(suite_runs):
    runs, _ = suite_runs
    with criterion(3, "max cut rounds over the suite <= 10") as info:
        rounds = {seed: state.root.cut_rounds for seed, (_, _, state, _) in runs.items()}
        worst = max(rounds, key=rounds.get)
        hist = np.bincount(list(rounds.values()))
        info["detail"] = f"(max {rounds[worst]} at seed {worst}, histogram {hist.tolist()})"
        assert rounds[worst] <= 10


def test_criterion_04_separation_equivalence():
    with criterion(4, "fast separation equals naive separation on 200 perturbed RMP points") as info:
        rng = np.random.default_rng(4)
        checked = found = 0
        for seed in range(20):
            _, p, d = suite_instance(seed)
            m = RmpState(p, d)
            res = run_colgen(m, make_pricers(p, d), ColGenParams())
            base = res.solution.lam
            for _ in range(10):
                lam = base.copy()
                lam[rng.random(lam.size) < 0.3] = 0.0
                extra = rng.random(lam.size) < 0.2
                lam[extra] += rng.random(int(extra.sum()))
                lam *= rng.uniform(0.5, 1.5, lam.size)
                delta = float(rng.choice([0.0, 0.05, 0.2]))
                fast = separate(compute_phi(lam, m.columns, d.linking_sets, d.k), delta)
                slow = naive_separate(lam, m.columns, d.linking_sets, delta)
                assert [q for q, _ in fast] == [q for q, _ in slow]
                assert np.allclose([g for _, g in fast], [g for _, g in slow], rtol=0, atol=1e-9)
                checked += 1
                found += len(fast)
        info["detail"] = f"({checked} points, {found} violated patterns)"
        assert checked == 200


def test_criterion_05_tu_sampling():
    with criterion(5, "consistency matrix of the final pool passes TU sampling") as info:
        rng = np.random.default_rng(5)
        shapes = []
        for seed in range(20):
            _, d, m, _ = _root_pool(seed)
            pats = pool_patterns(m.columns, d.linking_sets)
            A = build_consistency_matrix(m.columns, pats, d.k)
            check = tu_sample_check(A, 200, rng)
            assert check.passed, f"seed {seed}: {check.witness}"
            shapes.append(A.shape)
        info["detail"] = f"(20 x 200 submatrices, largest {max(shapes, key=lambda s: s[0] * s[1])})"


def _small_chain(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(6, 11))
    inst = generate(1000 + seed, n, int(rng.integers(2, 6)), horizon=max(2, n // 2), duration_range=(1, 4))
    p = build_model(inst)
    return p, decompose(p, 1)


def _fixed_pool_lp(m: RmpState, keep_rows, cost):
    cols = list(m.lam_cols) + list(m.master_cols.values())
    A = m.lp.A[np.ix_(keep_rows, cols)]
    sense = [m.lp.sense[r] for r in keep_rows]
    return LinearProgram.from_arrays(cost, A, sense, m.lp.rhs[keep_rows], m.lp.lower[cols], m.lp.upper[cols])


def test_criterion_06_redundancy():
    with criterion(6, "with all cuts, convexity (except block 1) and linking rows are redundant") as info:
        rng = np.random.default_rng(6)
        lps = skip_pairs = 0
        worst = 0.0
        for seed in range(20):
            p, d = _small_chain(seed)
            m = RmpState(p, d)
            run_cut_loop(m, make_pricers(p, d), ColGenParams())
            for (i, j), pats in sorted(pool_patterns(m.columns, d.linking_sets).items()):
                if j == i + 1:
                    for q in pats:
                        if not m.has_cut(q):
                            m.add_cut(q)
            starts = {1} | {i for i in range(2, d.k + 1) if not d.linking_set(i - 1, i)}
            full = [r for r, key in enumerate(m.row_keys)]
            reduced = [r for r, (kind, key) in enumerate(m.row_keys)
                       if kind in ("coupling", "cut") or (kind == "conv" and key in starts)]
            base = np.concatenate([m.lp.cost[m.lam_cols], m.lp.cost[list(m.master_cols.values())]])
            for trial in range(4):
                cost = base if trial == 0 else rng.normal(size=base.size)
                a = solve_lp(_fixed_pool_lp(m, full, cost))
                b = solve_lp(_fixed_pool_lp(m, reduced, cost))
                assert a.status == b.status == OPTIMAL
                worst = max(worst, abs(a.objective - b.objective))
                lps += 1
                # consecutive-pair cuts alone must make every skipped pair consistent
                lam = b.x[:len(m.lam_cols)]
                phi = compute_phi(lam, m.columns, d.linking_sets, d.k)
                for (i, j), table in phi.items():
                    if j > i + 1:
                        skip_pairs += 1
                        for v1, v2 in table.values():
                            assert abs(v1 - v2) <= 1e-6, f"seed {seed} pair {(i, j)}"
        info["detail"] = f"({lps} LPs, max change {worst:.2e}, {skip_pairs} skipped pairs checked)"
        assert worst < 1e-6
        assert skip_pairs > 0


def test_criterion_07_no_cuts_oracle():
    with criterion(7, "no-cuts branch-and-price matches brute force on 50 instances") as info:
        cases = [suite_instance(seed)[1:] for seed in range(30)]
        non_chain = 0
        seed = 0
        while non_chain < 20:
            p, d = random_decomposed(500 + seed, coupling=True)
            seed += 1
            if d.block_rows[0]:
                cases.append((p, d))
                non_chain += 1
        nodes = []
        for p, d in cases:
            ref = brute_solve(p)
            state = solve(p, d, ColGenParams(), NO_CUTS)
            if ref.status == "infeasible":
                assert state.status == "infeasible"
                continue
            assert state.status == "optimal"
            x = [round(v) for v in state.x]
            assert p.is_feasible(x) and p.objective(x) == ref.value
            nodes.append(state.nodes)
        info["detail"] = f"({len(cases)} instances, {non_chain} with coupling rows, max nodes {max(nodes)})"
        assert len(cases) == 50


def _integer_linked(seed):
    rng = np.random.default_rng(800 + seed)
    k = int(rng.integers(2, 4))
    vs, cons, block_of = [], [], []
    n_int = int(rng.integers(1, 3))
    for i in range(n_int):
        lo = int(rng.integers(-1, 2))
        vs.append(Variable(i, f"n{i}", lo, lo + int(rng.integers(1, 5)), INTEGER, int(rng.integers(-4, 5))))
    for b in range(1, k + 1):
        own = []
        for _ in range(int(rng.integers(1, 3))):
            v = len(vs)
            vs.append(Variable(v, f"b{v}", 0, 1, BINARY, int(rng.integers(-5, 6))))
            own.append(v)
        coeffs = {v: int(rng.integers(1, 4)) for v in own}
        for i in range(n_int):
            coeffs[i] = int(rng.integers(1, 3))
        rhs = int(rng.integers(2, 8))
        cons.append(Constraint(coeffs, "<=", rhs))
        block_of.append(b)
    sense = "max" if rng.random() < 0.5 else "min"
    p = MipProblem.build(sense, vs, cons)
    return p, Decomposition(p, k, block_of)


def test_criterion_08_binarization():
    with criterion(8, "binary expansion of integer linking variables preserves the optimum") as info:
        feasible = 0
        for seed in range(20):
            p, d = _integer_linked(seed)
            newp, newd, mapping = binarize_linking_integers(p, d)
            assert all(newp.variables[v].is_binary for v in newd.linking_vars())
            a, b = brute_solve(p), brute_solve(newp)
            assert a.status == b.status
            if a.status == "infeasible":
                continue
            feasible += 1
            assert a.value == b.value
            state = solve(newp, newd, ColGenParams(), CUTS)
            x = mapping.restore([round(v) for v in state.x])
            assert p.is_feasible(x) and p.objective(x) == a.value
        info["detail"] = f"(20 instances, {feasible} feasible)"
        assert feasible >= 10


def test_criterion_09_stabilization():
    with criterion(9, "stabilized and plain column generation reach the same master value") as info:
        no_worse = 0
        for seed in SUITE_SEEDS:
            _, p, d = suite_instance(seed)
            a = run_colgen(RmpState(p, d), make_pricers(p, d), ColGenParams())
            b = run_colgen(RmpState(p, d), make_pricers(p, d), ColGenParams(), stabilize=False)
            assert a.solution.objective == pytest.approx(b.solution.objective, abs=1e-6), f"seed {seed}"
            no_worse += a.iterations <= b.iterations
        share = no_worse / len(SUITE_SEEDS)
        # iteration count is a soft target: report, do not fail
        info["verdict"] = "PASS" if share >= 0.6 else "SOFT-FAIL"
        info["detail"] = f"(stabilized needs <= iterations on {share:.0%}, target 60%)"


def _strip_wall_time(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if '"wall_time"' not in line)


def test_criterion_10_determinism(tmp_path, capsys):
    with criterion(10, "identical invocations give byte-identical reports") as info:
        runs = [["solve-tkp", str(DATA / "seed1_n20.tkp"), "--block-size", "2"],
                ["solve-tkp", str(DATA / "e1.tkp"), "--no-cuts"],
                ["solve-mip", str(DATA / "e1.json")]]
        for argv in runs:
            outs = []
            for r in range(2):
                path = tmp_path / f"r{r}.json"
                assert main(argv + ["--threads", "1", "--seed", "11", "--json-out", str(path)]) == 0
                outs.append(_strip_wall_time(path.read_text()))
            assert outs[0] == outs[1], argv
            assert json.loads(path.read_text())["seed"] == 11
        capsys.readouterr()
        info["detail"] = f"({len(runs)} invocations run twice)"
