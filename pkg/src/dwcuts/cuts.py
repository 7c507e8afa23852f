"""Consistency-cut patterns, the Phi table and separation.

A pattern fixes every binary variable shared by a block pair (i, j), i < j.
The cut for pattern q reads

    sum of lambda over block-i columns matching q
      - sum of lambda over block-j columns matching q = 0

and is installed as an equality row in the master plus an indicator
variable ``y_q`` in both pricing problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VIOLATION_TOL = 1e-9


@dataclass(frozen=True, order=True)
class Pattern:
    i: int
    j: int
    assignment: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.i < self.j:
            raise ValueError("pattern block pair must satisfy i < j")

    @property
    def ones(self) -> tuple[int, ...]:
        return tuple(v for v, bit in self.assignment if bit == 1)

    @property
    def zeros(self) -> tuple[int, ...]:
        return tuple(v for v, bit in self.assignment if bit == 0)

    def matches(self, values) -> bool:
        """``values`` maps variable id -> value (rounded comparison)."""
        return all(round(float(values[v])) == bit for v, bit in self.assignment)

    def partner(self, block: int) -> int:
        return self.j if block == self.i else self.i

    def sign(self, block: int) -> int:
        """Coefficient sign of a matching block column in the master row."""
        if block == self.i:
            return 1
        if block == self.j:
            return -1
        return 0

    def describe(self, names=None) -> str:
        label = (lambda v: names[v]) if names is not None else str
        return "{" + ",".join(f"({label(v)},{bit})" for v, bit in self.assignment) + "}"


@dataclass
class ConsistencyCut:
    pattern: Pattern
    master_row: int
    y_index: dict[int, int]  # block -> column index of y_q in that pricing problem


def extract_pattern(values, shared, i: int, j: int) -> Pattern:
    """Pattern of a column's values on the shared set of blocks i and j."""
    if not shared:
        raise ValueError(f"blocks {i} and {j} share no binary variables")
    a, b = (i, j) if i < j else (j, i)
    return Pattern(a, b, tuple((v, int(round(float(values[v])))) for v in sorted(shared)))


def column_pattern(column, shared, partner: int) -> Pattern:
    """Cached pattern of ``column`` towards ``partner``."""
    cache = column.patterns
    pat = cache.get(partner)
    if pat is None:
        pat = extract_pattern(column.values, shared, column.block, partner)
        cache[partner] = pat
    return pat


@dataclass
class PhiStats:
    scanned: int = 0
    nonzero: int = 0
    extractions: int = 0


def compute_phi(lam, columns, linking_sets, k: int, stats: PhiStats | None = None,
                zero_tol: float = 0.0) -> dict[tuple[int, int], dict[Pattern, list[float]]]:
    """Build, per block pair i < j, the map pattern -> [weight in i, weight in j].

    Only columns with positive weight are visited; every such column adds
    its weight to the pattern it induces towards each block it shares
    binaries with.
    """
    phi: dict[tuple[int, int], dict[Pattern, list[float]]] = {
        (i, j): {} for i in range(1, k + 1) for j in range(i + 1, k + 1)
    }
    partners = {i: [] for i in range(1, k + 1)}
    for (a, b), shared in linking_sets.items():
        if shared:
            partners[a].append((b, shared))
            partners[b].append((a, shared))
    for i in partners:
        partners[i].sort()
    for col, weight in zip(columns, lam):
        if stats is not None:
            stats.scanned += 1
        if not weight > zero_tol:
            continue
        if stats is not None:
            stats.nonzero += 1
        i = col.block
        for j, shared in partners[i]:
            q = column_pattern(col, shared, j)
            if stats is not None:
                stats.extractions += 1
            if i < j:
                pair = phi[(i, j)].setdefault(q, [0.0, 0.0])
                pair[0] += weight
            else:
                pair = phi[(j, i)].setdefault(q, [0.0, 0.0])
                pair[1] += weight
    return {key: table for key, table in phi.items() if table}


def separate(phi, delta: float, installed=()) -> list[tuple[Pattern, float]]:
    """Patterns whose pair differs by more than ``delta`` and that are not installed yet.

    Output is ordered by block pair, then by pattern.
    """
    installed = set(installed)
    out = []
    for key in sorted(phi):
        for q in sorted(phi[key]):
            v1, v2 = phi[key][q]
            gap = abs(v1 - v2)
            if gap > delta and gap > VIOLATION_TOL and q not in installed:
                out.append((q, gap))
    return out


def indicator_rows(pattern: Pattern, positions: dict[int, int], y_col: int, n_cols: int):
    """Two rows tying ``y_q`` to the pattern within one pricing problem.

    ones + (1 - zeros) >= |q| y   and   ones + (1 - zeros) <= |q| - 1 + y
    """
    size = len(pattern.assignment)
    n_zero = len(pattern.zeros)
    expr = np.zeros(n_cols)
    for v, bit in pattern.assignment:
        expr[positions[v]] = 1.0 if bit == 1 else -1.0
    lower = expr.copy()
    lower[y_col] = -size
    upper = expr.copy()
    upper[y_col] = -1.0
    return np.vstack([lower, upper]), [">=", "<="], [-n_zero, size - 1 - n_zero]


def apply_cut(pattern: Pattern, master, pricers) -> ConsistencyCut:
    """Install the master row and the y_q machinery in both pricing problems."""
    if not pattern.assignment:
        raise ValueError("cannot install a cut on an empty shared set")
    if master.has_cut(pattern):
        raise ValueError(f"cut on {pattern} already installed")
    row = master.add_cut(pattern)
    y_index = {}
    for block in (pattern.i, pattern.j):
        if block in pricers:
            y_index[block] = pricers[block].add_cut(pattern)
    return ConsistencyCut(pattern, row, y_index)


def build_consistency_matrix(columns, patterns_by_pair, k: int) -> np.ndarray:
    """Chain-ordered 0/1/-1 matrix: y-hat blocks for consecutive pairs plus a row of ones on block 1.

    ``patterns_by_pair[(i, i + 1)]`` lists the maximal patterns of that pair.
    Columns are ordered as given.
    """
    rows = []
    for i in range(1, k):
        for q in patterns_by_pair.get((i, i + 1), ()):
            row = np.zeros(len(columns), dtype=np.int64)
            for c, col in enumerate(columns):
                if col.block in (i, i + 1) and q.matches(col.values):
                    row[c] = 1 if col.block == i else -1
            rows.append(row)
    rows.append(np.array([1 if col.block == 1 else 0 for col in columns], dtype=np.int64))
    return np.vstack(rows)


def pool_patterns(columns, linking_sets) -> dict[tuple[int, int], list[Pattern]]:
    """All maximal patterns occurring in a column pool, per block pair."""
    out: dict[tuple[int, int], set[Pattern]] = {}
    for (a, b), shared in linking_sets.items():
        if not shared:
            continue
        for col in columns:
            if col.block in (a, b):
                out.setdefault((a, b), set()).add(column_pattern(col, shared, b if col.block == a else a))
    return {key: sorted(vals) for key, vals in out.items()}
