"""Temporal knapsack: instances, compact model, chronological decomposition, generator.

Text format::

    # comment lines are ignored
    n C
    s t w p        (one line per item, interval [s, t))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import BINARY, Constraint, Decomposition, MipProblem, ModelError, Variable


class TkpFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TkpItem:
    s: int
    t: int
    w: int
    p: int

    def __post_init__(self):
        if not self.s < self.t:
            raise TkpFormatError(f"item interval [{self.s}, {self.t}) is empty")
        if self.w < 0 or self.p < 0:
            raise TkpFormatError("weights and profits must be nonnegative")

    def active_at(self, time: int) -> bool:
        return self.s <= time < self.t


@dataclass(frozen=True)
class TkpInstance:
    capacity: int
    items: tuple[TkpItem, ...]

    def __post_init__(self):
        if not self.items:
            raise TkpFormatError("an instance needs at least one item")
        if self.capacity < 0:
            raise TkpFormatError("capacity must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.items)


def active_sets(inst: TkpInstance) -> list[frozenset[int]]:
    """Items active at each item's start time."""
    return [frozenset(i for i, it in enumerate(inst.items) if it.active_at(item.s)) for item in inst.items]


def undominated_rows(sets: list[frozenset[int]]) -> list[int]:
    """Indices j whose set is not contained in another; equal sets keep the lowest index."""
    keep = []
    for j, sj in enumerate(sets):
        dominated = False
        for m, sm in enumerate(sets):
            if m == j:
                continue
            if sj < sm or (sj == sm and m < j):
                dominated = True
                break
        if not dominated:
            keep.append(j)
    return keep


def build_model(inst: TkpInstance, reduce: bool = True) -> MipProblem:
    """One binary per item, one capacity row per undominated start time, maximize profit."""
    variables = [Variable(i, f"x{i + 1}", 0, 1, BINARY, it.p) for i, it in enumerate(inst.items)]
    sets = active_sets(inst)
    rows = undominated_rows(sets) if reduce else list(range(inst.n))
    cons = []
    for j in rows:
        coeffs = {i: inst.items[i].w for i in sorted(sets[j])}
        cons.append(Constraint(coeffs, "<=", inst.capacity, f"cap{j + 1}", inst.items[j].s))
    return MipProblem.build("max", variables, cons)


def decompose(problem: MipProblem, block_size: int) -> Decomposition:
    """Blocks of ``block_size`` consecutive rows in start-time order (ties by row order)."""
    if block_size < 1:
        raise ModelError("block size must be at least 1")
    order = sorted(range(len(problem.constraints)),
                   key=lambda c: (problem.constraints[c].tag if problem.constraints[c].tag is not None else 0, c))
    block_of = [0] * len(order)
    for rank, c in enumerate(order):
        block_of[c] = rank // block_size + 1
    k = max(1, math.ceil(len(order) / block_size))
    return Decomposition(problem, k, block_of)


def parse_instance(text: str) -> TkpInstance:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines:
        raise TkpFormatError("empty instance")
    try:
        lineno, head = lines[0]
        n, capacity = (int(tok) for tok in head.split())
    except ValueError as exc:
        raise TkpFormatError(f"line {lineno}: expected 'n C'") from exc
    if len(lines) - 1 != n:
        raise TkpFormatError(f"header announces {n} items, found {len(lines) - 1}")
    items = []
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 4:
            raise TkpFormatError(f"line {lineno}: expected 's t w p'")
        try:
            s, t, w, p = (int(tok) for tok in parts)
        except ValueError as exc:
            raise TkpFormatError(f"line {lineno}: non-integer field") from exc
        try:
            items.append(TkpItem(s, t, w, p))
        except TkpFormatError as exc:
            raise TkpFormatError(f"line {lineno}: {exc}") from exc
    return TkpInstance(capacity, tuple(items))


def format_instance(inst: TkpInstance, comments=()) -> str:
    out = [f"# {c}" for c in comments]
    out.append(f"{inst.n} {inst.capacity}")
    out.extend(f"{it.s} {it.t} {it.w} {it.p}" for it in inst.items)
    return "\n".join(out) + "\n"


def read_instance(path) -> TkpInstance:
    return parse_instance(Path(path).read_text())


def write_instance(inst: TkpInstance, path, comments=()):
    Path(path).write_text(format_instance(inst, comments))


def generate(seed: int, n: int, capacity: int, horizon: int | None = None, weight_range=(1, 5),
             profit_range=(1, 20), duration_range=(1, 5)) -> TkpInstance:
    """Uniform random instance (not the I/U benchmark families).

    Start times are uniform on ``[0, horizon)``; durations, weights and
    profits are uniform integers on their closed ranges.
    """
    horizon = n if horizon is None else horizon
    for lo, hi in (weight_range, profit_range, duration_range):
        if lo > hi:
            raise ValueError("empty range")
    if duration_range[0] < 1 or horizon < 1 or n < 1:
        raise ValueError("durations, horizon and n must be positive")
    rng = np.random.default_rng(seed)
    items = []
    for _ in range(n):
        s = int(rng.integers(0, horizon))
        d = int(rng.integers(duration_range[0], duration_range[1] + 1))
        w = int(rng.integers(weight_range[0], weight_range[1] + 1))
        p = int(rng.integers(profit_range[0], profit_range[1] + 1))
        items.append(TkpItem(s, s + d, w, p))
    return TkpInstance(capacity, tuple(items))
