import itertools

import numpy as np
import pytest

from dwcuts.model import BINARY, CONTINUOUS, INTEGER, Constraint, MipProblem, Variable
from dwcuts.oracle import OracleError, brute_solve, exact_det, tu_sample_check


def test_example_optimum(e1):
    p, _ = e1
    res = brute_solve(p)
    assert p.to_original(res.value) == 6
    assert res.x == [1, 0, 0, 1]


def test_single_binary():
    p = MipProblem.build("min", [Variable(0, "x", 0, 1, BINARY, -1)], [])
    res = brute_solve(p)
    assert res.value == -1 and res.x == [1] and res.feasible_count == 2


def test_infeasible():
    p = MipProblem.build("min", [Variable(0, "x", 0, 1, BINARY, 1)],
                         [Constraint({0: 1}, ">=", 1), Constraint({0: 1}, "<=", 0)])
    assert brute_solve(p).status == "infeasible"


def test_rejects_continuous_and_large():
    with pytest.raises(OracleError):
        brute_solve(MipProblem.build("min", [Variable(0, "x", 0, 1, CONTINUOUS)], []))
    vs = [Variable(i, f"x{i}", 0, 1, BINARY) for i in range(25)]
    with pytest.raises(OracleError):
        brute_solve(MipProblem.build("min", vs, []))


def test_fractional_data_exact():
    vs = [Variable(0, "a", 0, 3, INTEGER, "1/3"), Variable(1, "b", -2, 2, INTEGER, "-1/2")]
    p = MipProblem.build("max", vs, [Constraint({0: "1/2", 1: "1/3"}, "<=", "5/6")])
    best = None
    for a, b in itertools.product(range(4), range(-2, 3)):
        if p.constraints[0].satisfied({0: a, 1: b}):
            val = p.objective([a, b])
            best = val if best is None else min(best, val)
    assert brute_solve(p).value == best


def test_exact_det_matches_numpy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        M = rng.integers(-3, 4, size=(n, n))
        assert exact_det(M) == round(np.linalg.det(M))


def test_tu_examples():
    rng = np.random.default_rng(1)
    assert tu_sample_check(np.eye(5, dtype=int), 100, rng).passed
    bad = tu_sample_check(np.array([[1, 1], [-1, 1]]), 200, rng)
    assert not bad.passed and bad.witness[2] == 2
    # interval (consecutive-ones) matrices are TU
    interval = np.array([[1, 1, 0, 0], [0, 1, 1, 1], [0, 0, 1, 1], [1, 1, 1, 0]])
    assert tu_sample_check(interval, 300, rng).passed
