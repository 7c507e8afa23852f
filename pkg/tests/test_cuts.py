import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwcuts.cuts import (Pattern, PhiStats, build_consistency_matrix, compute_phi, extract_pattern,
                         indicator_rows, pool_patterns, separate)
from dwcuts.oracle import naive_separate

from conftest import e1_master


def test_pattern_basics():
    q = Pattern(1, 2, ((1, 0), (2, 1)))
    assert q.ones == (2,) and q.zeros == (1,)
    assert q.matches({1: 0, 2: 1}) and not q.matches({1: 1, 2: 1})
    assert q.sign(1) == 1 and q.sign(2) == -1 and q.sign(3) == 0
    assert q.partner(2) == 1
    with pytest.raises(ValueError):
        Pattern(2, 2, ())


def test_extract_pattern_orders_pair():
    q = extract_pattern({1: 1.0, 2: 0.0, 5: 1.0}, (2, 1), 3, 1)
    assert q == Pattern(1, 3, ((1, 1), (2, 0)))
    with pytest.raises(ValueError):
        extract_pattern({}, (), 1, 2)


def test_phi_table_on_example():
    _, d, m = e1_master()
    sol = m.solve()
    stats = PhiStats()
    phi = compute_phi(sol.lam, m.columns, d.linking_sets, d.k, stats)
    table = phi[(1, 2)]
    expect = {((1, 0), (2, 0)): [0.5, 0.0], ((1, 1), (2, 1)): [0.5, 0.0],
              ((1, 1), (2, 0)): [0.0, 0.5], ((1, 0), (2, 1)): [0.0, 0.5]}
    assert {q.assignment: pytest.approx(v) for q, v in table.items()} == expect
    assert stats.nonzero == 4 and stats.scanned == 12


def test_separation_thresholds():
    _, d, m = e1_master()
    sol = m.solve()
    phi = compute_phi(sol.lam, m.columns, d.linking_sets, d.k)
    assert len(separate(phi, 0.05)) == 4
    assert separate(phi, 0.6) == []
    first = separate(phi, 0.05)[0][0]
    assert len(separate(phi, 0.05, installed=[first])) == 3


def test_indicator_rows_define_match():
    q = Pattern(1, 2, ((0, 1), (1, 0), (2, 1)))
    pos = {0: 0, 1: 1, 2: 2}
    rows, sense, rhs = indicator_rows(q, pos, 3, 4)
    for bits in itertools.product((0, 1), repeat=3):
        feasible_y = []
        for y in (0, 1):
            x = np.array([*bits, y])
            act = rows @ x
            ok = all((a >= b) if s == ">=" else (a <= b) for a, s, b in zip(act, sense, rhs))
            if ok:
                feasible_y.append(y)
        assert feasible_y == [int(q.matches(dict(enumerate(bits))))]


def test_consistency_matrix_from_example():
    _, d, m = e1_master()
    pats = pool_patterns(m.columns, d.linking_sets)
    assert len(pats[(1, 2)]) == 4
    M = build_consistency_matrix(m.columns, pats, d.k)
    assert M.shape == (5, 12)
    assert set(np.unique(M)) <= {-1, 0, 1}
    assert list(M[-1]) == [1] * 5 + [0] * 7


@st.composite
def _perturbed(draw):
    _, d, m = e1_master()
    weights = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=12, max_size=12))
    zero_mask = draw(st.lists(st.booleans(), min_size=12, max_size=12))
    lam = np.array([0.0 if z else w for w, z in zip(weights, zero_mask)])
    delta = draw(st.sampled_from([0.0, 0.05, 0.2, 0.6]))
    return d, m, lam, delta


@settings(max_examples=60, deadline=None)
@given(_perturbed())
def test_phi_separation_equals_naive(case):
    d, m, lam, delta = case
    fast = separate(compute_phi(lam, m.columns, d.linking_sets, d.k), delta)
    slow = naive_separate(lam, m.columns, d.linking_sets, delta)
    assert [q for q, _ in fast] == [q for q, _ in slow]
    assert np.allclose([g for _, g in fast], [g for _, g in slow], atol=1e-9)
