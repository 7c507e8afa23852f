"""Brute-force ground truth: exhaustive solve, direct cut separation, TU sampling.

Nothing here shares code with the solver paths it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cuts import Pattern
from .model import MipProblem

ENUM_LIMIT = 2 ** 24
CHUNK = 1 << 16


class OracleError(ValueError):
    pass


@dataclass
class OracleResult:
    status: str  # "optimal" or "infeasible"
    value: Fraction | None  # internal (minimization) sense, offset included
    x: list[int] | None
    feasible_count: int

    def original_value(self, problem: MipProblem):
        return problem.to_original(self.value)


def _lcm_denominators(values) -> int:
    out = 1
    for v in values:
        out = out * v.denominator // math.gcd(out, v.denominator)
    return out


def brute_solve(problem: MipProblem, limit: int = ENUM_LIMIT) -> OracleResult:
    """Enumerate every integer point in the bound box.

    Rows and the objective are scaled to integers so comparisons are exact.
    The first optimal point in lexicographic order (last variable fastest)
    is reported.
    """
    los, sizes = [], []
    for var in problem.variables:
        if not var.is_integer:
            raise OracleError(f"variable {var.name} is continuous; enumeration needs integer variables")
        if not var.bounded:
            raise OracleError(f"variable {var.name} is unbounded")
        lo, hi = math.ceil(var.lower), math.floor(var.upper)
        if lo > hi:
            return OracleResult("infeasible", None, None, 0)
        los.append(lo)
        sizes.append(hi - lo + 1)
    total = math.prod(sizes)
    if total > limit:
        raise OracleError(f"search space of {total} points exceeds the limit {limit}")
    n = problem.n
    rows, rhs, senses = [], [], []
    for con in problem.constraints:
        scale = _lcm_denominators(list(con.coeffs.values()) + [con.rhs])
        row = [0] * n
        for v, a in con.coeffs.items():
            row[v] = int(a * scale)
        rows.append(row)
        rhs.append(int(con.rhs * scale))
        senses.append(con.sense)
    cscale = _lcm_denominators([v.cost for v in problem.variables])
    cost = np.array([int(v.cost * cscale) for v in problem.variables], dtype=np.int64)
    A = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    b = np.array(rhs, dtype=np.int64)
    span = max((abs(lo) + s for lo, s in zip(los, sizes)), default=1)
    if (np.abs(A).sum(axis=1, initial=0).max(initial=0) * span > 2 ** 62
            or int(np.abs(cost).sum()) * span > 2 ** 62):
        raise OracleError("coefficients too large for exact 64-bit enumeration")
    lo_arr = np.array(los, dtype=np.int64)
    radix = np.array(sizes, dtype=np.int64)
    # place values: last variable varies fastest
    place = np.ones(n, dtype=np.int64)
    for v in range(n - 2, -1, -1):
        place[v] = place[v + 1] * radix[v + 1]
    le = np.array([s == "<=" for s in senses])
    ge = np.array([s == ">=" for s in senses])
    eq = np.array([s == "=" for s in senses])
    best_val, best_idx, count = None, None, 0
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        X = (idx[:, None] // place[None, :]) % radix[None, :] + lo_arr[None, :] if n else np.zeros((idx.size, 0), np.int64)
        ok = np.ones(idx.size, dtype=bool)
        if A.shape[0]:
            act = X @ A.T
            ok &= np.all(~le | (act <= b), axis=1)
            ok &= np.all(~ge | (act >= b), axis=1)
            ok &= np.all(~eq | (act == b), axis=1)
        count += int(ok.sum())
        if not ok.any():
            continue
        vals = X[ok] @ cost
        k = int(np.argmin(vals))
        if best_val is None or vals[k] < best_val:
            best_val, best_idx = int(vals[k]), int(idx[ok][k])
    if best_val is None:
        return OracleResult("infeasible", None, None, 0)
    x = [int(v) for v in (best_idx // place) % radix + lo_arr] if n else []
    return OracleResult("optimal", Fraction(best_val, cscale) + problem.objective_offset, x, count)


def naive_separate(lam, columns, linking_sets, delta: float) -> list[tuple[Pattern, float]]:
    """Evaluate both sides of every consistency equation for patterns seen in nonzero columns."""
    out = []
    for (i, j), shared in sorted(linking_sets.items()):
        if not shared:
            continue
        keys = sorted(shared)
        seen = set()
        for col, w in zip(columns, lam):
            if w > 0 and col.block in (i, j):
                seen.add(tuple(int(round(float(col.values[v]))) for v in keys))
        for assignment in sorted(seen):
            left = right = 0.0
            for col, w in zip(columns, lam):
                if col.block not in (i, j):
                    continue
                if tuple(int(round(float(col.values[v]))) for v in keys) != assignment:
                    continue
                if col.block == i:
                    left += w
                else:
                    right += w
            gap = abs(left - right)
            if gap > delta and gap > 1e-9:
                out.append((Pattern(i, j, tuple(zip(keys, assignment))), gap))
    return out


def exact_det(matrix) -> int:
    """Integer determinant by fraction-free (Bareiss) elimination."""
    M = [[int(v) for v in row] for row in matrix]
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if M[r][k] != 0), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


@dataclass
class TuCheck:
    passed: bool
    trials: int
    witness: tuple | None = None  # (rows, cols, det)


def tu_sample_check(matrix, trials: int, rng) -> TuCheck:
    """Determinants of ``trials`` random square submatrices must lie in {-1, 0, 1}."""
    M = np.asarray(matrix, dtype=np.int64)
    if M.size and not np.all(np.isin(M, (-1, 0, 1))):
        return TuCheck(False, 0, ((), (), None))
    m, n = M.shape
    if min(m, n) == 0:
        return TuCheck(True, 0)
    for t in range(trials):
        size = int(rng.integers(1, min(m, n) + 1))
        rows = np.sort(rng.choice(m, size, replace=False))
        cols = np.sort(rng.choice(n, size, replace=False))
        det = exact_det(M[np.ix_(rows, cols)])
        if det not in (-1, 0, 1):
            return TuCheck(False, t + 1, (tuple(int(r) for r in rows), tuple(int(c) for c in cols), det))
    return TuCheck(True, trials)
