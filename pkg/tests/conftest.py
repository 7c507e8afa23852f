from pathlib import Path

import numpy as np
import pytest

from dwcuts.master import RmpState, make_column
from dwcuts.model import BINARY, Constraint, Decomposition, MipProblem, Variable
from dwcuts.tkp import build_model, decompose, generate

DATA = Path(__file__).parent / "data"

# Columns of the two-block example, block 1 over (x1, x2, x3), block 2 over (x2, x3, x4),
# in the order they are listed in the worked example.
E1_BLOCK1 = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)]
E1_BLOCK2 = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)]


def e1_problem():
    vs = [Variable(i, f"x{i + 1}", 0, 1, BINARY, c) for i, c in enumerate([3, 2, 2, 3])]
    cs = [Constraint({0: 2, 1: 1, 2: 1}, "<=", 2), Constraint({1: 1, 2: 1, 3: 1}, "<=", 2)]
    p = MipProblem.build("max", vs, cs)
    return p, Decomposition(p, 2, [1, 2])


def e1_master():
    p, d = e1_problem()
    m = RmpState(p, d)
    for t in E1_BLOCK1:
        m.add_column(make_column(p, d, 1, dict(zip([0, 1, 2], t))))
    for t in E1_BLOCK2:
        m.add_column(make_column(p, d, 2, dict(zip([1, 2, 3], t))))
    return p, d, m


def suite_params(seed: int):
    """(n, C, B) of the seeded random temporal-knapsack suite."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 21))
    C = int(rng.integers(3, 11))
    return n, C, (1, 2, 4)[seed % 3]


def suite_instance(seed: int):
    n, C, B = suite_params(seed)
    inst = generate(seed, n, C, horizon=max(2, n // 2), weight_range=(1, C), duration_range=(1, max(2, n // 3)))
    problem = build_model(inst)
    return inst, problem, decompose(problem, B)


def random_decomposed(seed: int, coupling: bool = True):
    """Small random binary program with a random (generally non-chain) decomposition.

    Blocks get 1-2 rows over random variable subsets; up to two coupling rows
    span everything. All rows are satisfied by x = 0 so the program is feasible.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 11))
    k = int(rng.integers(2, 4))
    sense = "max" if rng.random() < 0.5 else "min"
    costs = rng.integers(-6, 7, size=n)
    vs = [Variable(i, f"v{i}", 0, 1, BINARY, int(costs[i])) for i in range(n)]
    cons, block_of = [], []
    for b in range(1, k + 1):
        for _ in range(int(rng.integers(1, 3))):
            size = int(rng.integers(2, min(n, 5) + 1))
            support = rng.choice(n, size=size, replace=False)
            coeffs = {int(v): int(rng.integers(1, 4)) for v in support}
            rhs = int(rng.integers(1, sum(coeffs.values())))
            cons.append(Constraint(coeffs, "<=", rhs))
            block_of.append(b)
    if coupling:
        for _ in range(int(rng.integers(1, 3))):
            size = int(rng.integers(2, n + 1))
            support = rng.choice(n, size=size, replace=False)
            coeffs = {int(v): int(rng.integers(-2, 4)) or 1 for v in support}
            rhs = int(rng.integers(0, 4))
            cons.append(Constraint(coeffs, "<=", rhs))
            block_of.append(0)
    p = MipProblem.build(sense, vs, cons)
    return p, Decomposition(p, k, block_of)


@pytest.fixture
def e1():
    return e1_problem()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
