"""Original problem, block decomposition and structure checks.

Coefficients and bounds are kept as exact ``Fraction`` values so that the
brute-force oracle can compare optima exactly. Infinite bounds are stored as
``float('inf')`` / ``float('-inf')``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

INF = float("inf")

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"
KINDS = (BINARY, INTEGER, CONTINUOUS)
SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    pass


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(str(value)) if isinstance(value, str) else Fraction(value)


def _bound(value, default):
    if value is None:
        return default
    if isinstance(value, float) and math.isinf(value):
        return value
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return INF
    if isinstance(value, str) and value.strip().lower() in ("-inf", "-infinity"):
        return -INF
    return to_fraction(value)


@dataclass
class Variable:
    id: int
    name: str
    lower: Fraction | float = Fraction(0)
    upper: Fraction | float = INF
    kind: str = CONTINUOUS
    cost: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown variable kind {self.kind!r}")
        self.lower = _bound(self.lower, -INF)
        self.upper = _bound(self.upper, INF)
        self.cost = to_fraction(self.cost)
        if self.kind == BINARY:
            self.lower = max(self.lower, Fraction(0))
            self.upper = min(self.upper, Fraction(1))
        if self.lower > self.upper:
            raise ModelError(f"variable {self.name}: lower bound exceeds upper bound")

    @property
    def is_integer(self) -> bool:
        return self.kind in (BINARY, INTEGER)

    @property
    def is_binary(self) -> bool:
        return self.is_integer and self.lower >= 0 and self.upper <= 1

    @property
    def bounded(self) -> bool:
        return not (math.isinf(self.lower) or math.isinf(self.upper))


@dataclass
class Constraint:
    coeffs: dict[int, Fraction]
    sense: str
    rhs: Fraction
    name: str = ""
    # ordering key used by chronological decompositions (TKP start time)
    tag: float | None = None

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ModelError(f"unknown constraint sense {self.sense!r}")
        self.coeffs = {int(v): to_fraction(a) for v, a in self.coeffs.items() if to_fraction(a) != 0}
        self.rhs = to_fraction(self.rhs)

    def activity(self, x) -> Fraction:
        return sum((a * x[v] for v, a in self.coeffs.items()), Fraction(0))

    def satisfied(self, x, tol=0) -> bool:
        lhs = self.activity(x) if tol == 0 else sum(float(a) * float(x[v]) for v, a in self.coeffs.items())
        rhs = self.rhs if tol == 0 else float(self.rhs)
        if self.sense == "<=":
            return lhs <= rhs + tol
        if self.sense == ">=":
            return lhs >= rhs - tol
        return abs(lhs - rhs) <= tol


@dataclass
class MipProblem:
    """Internally a minimization; ``original_sense`` records how to report."""

    variables: list[Variable]
    constraints: list[Constraint]
    original_sense: str = "min"
    objective_offset: Fraction = Fraction(0)

    def __post_init__(self):
        if self.original_sense not in ("min", "max"):
            raise ModelError(f"unknown objective sense {self.original_sense!r}")
        for i, var in enumerate(self.variables):
            if var.id != i:
                raise ModelError("variable ids must be dense and ordered")
        n = len(self.variables)
        for con in self.constraints:
            for v in con.coeffs:
                if not 0 <= v < n:
                    raise ModelError(f"constraint {con.name!r} references unknown variable {v}")
        self.objective_offset = to_fraction(self.objective_offset)

    @classmethod
    def build(cls, sense, variables, constraints, offset=0) -> "MipProblem":
        """Build from user-sense data; maximization costs are negated."""
        sign = -1 if sense == "max" else 1
        for var in variables:
            var.cost = sign * to_fraction(var.cost)
        return cls(variables, constraints, sense, sign * to_fraction(offset))

    @property
    def n(self) -> int:
        return len(self.variables)

    def var_index(self) -> dict[str, int]:
        return {v.name: v.id for v in self.variables}

    def objective(self, x) -> Fraction:
        """Internal (minimization) objective of ``x``."""
        return self.objective_offset + sum((v.cost * to_fraction(x[v.id]) for v in self.variables), Fraction(0))

    def to_original(self, value):
        """Map an internal objective value back to the user's sense."""
        if value is None:
            return None
        return -value if self.original_sense == "max" else value

    def is_feasible(self, x, tol=1e-6) -> bool:
        for var in self.variables:
            xv = float(x[var.id])
            if xv < float(var.lower) - tol or xv > float(var.upper) + tol:
                return False
            if var.is_integer and abs(xv - round(xv)) > tol:
                return False
        return all(con.satisfied(x, tol) for con in self.constraints)


class Decomposition:
    """Assignment of constraints to the coupling set 0 and blocks 1..k.

    Variable membership is derived from nonzero coefficients. ``extra_links``
    holds (variable, block) pairs registered to repair gaps in a chain.
    """

    def __init__(self, problem: MipProblem, k: int, block_of: list[int], extra_links: Iterable[tuple[int, int]] = ()):
        if k < 1:
            raise ModelError("a decomposition needs at least one block")
        if len(block_of) != len(problem.constraints):
            raise ModelError("block assignment must cover every constraint")
        for c, b in enumerate(block_of):
            if not 0 <= b <= k:
                raise ModelError(f"constraint {c} assigned to block {b} outside 0..{k}")
        self.problem = problem
        self.k = k
        self.block_of = list(block_of)
        self.extra_links = frozenset(extra_links)
        native: dict[int, set[int]] = {v: set() for v in range(problem.n)}
        in_coupling: set[int] = set()
        for c, con in enumerate(problem.constraints):
            b = self.block_of[c]
            for v in con.coeffs:
                if b == 0:
                    in_coupling.add(v)
                else:
                    native[v].add(b)
        self.native_blocks = {v: tuple(sorted(bs)) for v, bs in native.items()}
        eff = {v: set(bs) for v, bs in native.items()}
        for v, b in self.extra_links:
            eff[v].add(b)
        self.var_blocks = {v: tuple(sorted(bs)) for v, bs in eff.items()}
        self.in_coupling = frozenset(in_coupling)
        self.block_vars = {i: [] for i in range(1, k + 1)}
        for v in range(problem.n):
            for b in self.var_blocks[v]:
                self.block_vars[b].append(v)
        self.block_rows = {i: [] for i in range(0, k + 1)}
        for c, b in enumerate(self.block_of):
            self.block_rows[b].append(c)
        self.master_only = [v for v in range(problem.n) if not self.var_blocks[v]]
        self._linking: dict[tuple[int, int], tuple[int, ...]] = {}
        for v, bs in self.var_blocks.items():
            if len(bs) < 2 or not problem.variables[v].is_binary:
                continue
            for a in range(len(bs)):
                for b in range(a + 1, len(bs)):
                    self._linking.setdefault((bs[a], bs[b]), [])
                    self._linking[(bs[a], bs[b])].append(v)
        self._linking = {key: tuple(sorted(vs)) for key, vs in self._linking.items()}

    def is_linking(self, v: int) -> bool:
        return len(self.var_blocks[v]) >= 2

    def linking_vars(self) -> list[int]:
        return [v for v in range(self.problem.n) if self.is_linking(v)]

    def linking_set(self, i: int, j: int) -> tuple[int, ...]:
        """Binary variables shared by blocks i and j (symmetric)."""
        if i > j:
            i, j = j, i
        return self._linking.get((i, j), ())

    @property
    def linking_sets(self) -> dict[tuple[int, int], tuple[int, ...]]:
        return dict(self._linking)

    def cost_share(self, v: int, block: int) -> Fraction:
        """Objective share of ``v`` carried by a block copy (averaged over native blocks)."""
        native = self.native_blocks[v]
        if block not in native:
            return Fraction(0)
        return self.problem.variables[v].cost / len(native)

    def owner_block(self, v: int) -> int:
        """Block whose copy of ``v`` carries its coupling-row coefficients."""
        bs = self.var_blocks[v]
        return bs[0] if bs else 0

    def with_extra_links(self, links) -> "Decomposition":
        return Decomposition(self.problem, self.k, self.block_of, set(self.extra_links) | set(links))

    def to_dict(self) -> dict:
        return {"k": self.k, "block_of": self.block_of, "extra_links": sorted(self.extra_links)}


def derive_block_membership(problem: MipProblem, block_of, k: int | None = None) -> Decomposition:
    """``block_of`` is a list or a mapping constraint index -> block."""
    if isinstance(block_of, dict):
        unknown = [c for c in block_of if not 0 <= c < len(problem.constraints)]
        if unknown:
            raise ModelError(f"unknown constraint ids {unknown}")
        missing = [c for c in range(len(problem.constraints)) if c not in block_of]
        if missing:
            raise ModelError(f"constraints {missing} have no block")
        block_of = [block_of[c] for c in range(len(problem.constraints))]
    if k is None:
        k = max(block_of, default=0)
    return Decomposition(problem, k, block_of)


@dataclass
class ChainReport:
    no_coupling: bool
    all_linking_binary: bool
    chain_ok: bool
    bounded_blocks: bool
    violations: list[tuple[int, tuple[int, int]]] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.no_coupling and self.all_linking_binary and self.chain_ok and self.bounded_blocks

    def to_dict(self, problem: MipProblem | None = None) -> dict:
        def name(v):
            return problem.variables[v].name if problem is not None else v

        return {
            "no_coupling": self.no_coupling,
            "all_linking_binary": self.all_linking_binary,
            "chain_ok": self.chain_ok,
            "bounded_blocks": self.bounded_blocks,
            "satisfied": self.satisfied,
            "violations": [{"variable": name(v), "blocks": list(pair)} for v, pair in self.violations],
        }


def check_extended_chain(dec: Decomposition, problem: MipProblem | None = None) -> ChainReport:
    problem = problem or dec.problem
    no_coupling = not dec.block_rows[0]
    linking = dec.linking_vars()
    all_binary = all(problem.variables[v].is_binary for v in linking)
    violations = []
    for v in linking:
        bs = dec.var_blocks[v]
        for a, b in zip(bs, bs[1:]):
            if b - a >= 2:
                violations.append((v, (a, b)))
    bounded = all(problem.variables[v].bounded for i in dec.block_vars for v in dec.block_vars[i])
    return ChainReport(no_coupling, all_binary, not violations, bounded, violations)


def add_missing_intermediate_links(dec: Decomposition, variable: int, blocks=None) -> Decomposition:
    """Register ``variable`` in every block strictly between its first and last block."""
    if not dec.is_linking(variable):
        raise ModelError(f"variable {variable} is not linking")
    bs = dec.var_blocks[variable]
    missing = [(variable, t) for t in range(bs[0] + 1, bs[-1]) if t not in bs]
    if blocks is not None:
        missing = [(variable, t) for _, t in missing if t in set(blocks)]
    if not missing:
        return dec
    return dec.with_extra_links(missing)


def repair_chain(dec: Decomposition) -> Decomposition:
    for v, _ in check_extended_chain(dec).violations:
        dec = add_missing_intermediate_links(dec, v)
    return dec


@dataclass
class BinarizationMap:
    """Per original variable: (offset, [(new_var, weight), ...])."""

    n_original: int
    expressions: dict[int, tuple[Fraction, list[tuple[int, int]]]]

    def restore(self, x_new) -> list:
        out = []
        for v in range(self.n_original):
            offset, terms = self.expressions[v]
            out.append(offset + sum(w * x_new[j] for j, w in terms))
        return out


def binarize_linking_integers(problem: MipProblem, dec: Decomposition):
    """Replace bounded integer linking variables by base-2 expansions.

    ``x = LB + sum(2**i z_i)`` with ``m = floor(log2(UB - LB)) + 1`` binaries;
    the row ``sum(2**i z_i) <= UB - LB`` is placed in the first block using x.
    Fixed variables (LB == UB) are substituted by their value.
    """
    targets = []
    for v in dec.linking_vars():
        var = problem.variables[v]
        if var.kind == CONTINUOUS or var.is_binary:
            continue
        if not var.bounded:
            raise ModelError(f"integer linking variable {var.name} is unbounded")
        targets.append(v)
    target_set = set(targets)
    new_vars: list[Variable] = []
    expressions: dict[int, tuple[Fraction, list[tuple[int, int]]]] = {}
    for var in problem.variables:
        if var.id in target_set:
            continue
        nid = len(new_vars)
        new_vars.append(Variable(nid, var.name, var.lower, var.upper, var.kind, var.cost))
        expressions[var.id] = (Fraction(0), [(nid, 1)])
    offset = problem.objective_offset
    extra_rows: list[tuple[Constraint, int]] = []
    for v in targets:
        var = problem.variables[v]
        lb = Fraction(math.ceil(var.lower))
        ub = Fraction(math.floor(var.upper))
        if ub < lb:
            raise ModelError(f"integer variable {var.name} has empty domain")
        terms = []
        if ub > lb:
            m = math.floor(math.log2(ub - lb)) + 1
            for i in range(m):
                nid = len(new_vars)
                new_vars.append(Variable(nid, f"{var.name}#b{i}", 0, 1, BINARY, var.cost * 2**i))
                terms.append((nid, 2**i))
            bound_row = Constraint({nid: w for nid, w in terms}, "<=", ub - lb, name=f"{var.name}#ub")
            extra_rows.append((bound_row, dec.var_blocks[v][0]))
        offset += var.cost * lb
        expressions[v] = (lb, terms)
    new_cons = []
    block_of = []
    for c, con in enumerate(problem.constraints):
        coeffs: dict[int, Fraction] = {}
        rhs = con.rhs
        for v, a in con.coeffs.items():
            const, terms = expressions[v]
            rhs -= a * const
            for nid, w in terms:
                coeffs[nid] = coeffs.get(nid, Fraction(0)) + a * w
        new_cons.append(Constraint(coeffs, con.sense, rhs, con.name, con.tag))
        block_of.append(dec.block_of[c])
    for row, b in extra_rows:
        new_cons.append(row)
        block_of.append(b)
    new_problem = MipProblem(new_vars, new_cons, problem.original_sense, offset)
    links = [(nid, b) for v, b in dec.extra_links for nid, _ in expressions[v][1]]
    new_dec = Decomposition(new_problem, dec.k, block_of, links)
    return new_problem, new_dec, BinarizationMap(problem.n, expressions)


# --- decomposed-MIP JSON -------------------------------------------------


def _num(value):
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else str(value)
    if isinstance(value, float) and math.isinf(value):
        return None
    return value


def load_decomposed(data: dict) -> tuple[MipProblem, Decomposition]:
    """Parse ``{sense, vars, cons, k}``; block 0 means coupling row."""
    try:
        sense = data.get("sense", "min")
        variables = []
        for i, spec in enumerate(data["vars"]):
            variables.append(
                Variable(i, spec["name"], _bound(spec.get("lb", 0), -INF), _bound(spec.get("ub"), INF),
                         spec.get("kind", CONTINUOUS), spec.get("cost", 0))
            )
        index = {v.name: v.id for v in variables}
        if len(index) != len(variables):
            raise ModelError("duplicate variable names")
        cons, block_of = [], []
        for c, spec in enumerate(data["cons"]):
            coeffs = {}
            for name, val in spec["coeffs"].items():
                if name not in index:
                    raise ModelError(f"constraint {c} references unknown variable {name!r}")
                coeffs[index[name]] = val
            cons.append(Constraint(coeffs, spec["sense"], spec["rhs"], spec.get("name", f"c{c}"), spec.get("tag")))
            block_of.append(int(spec.get("block", 0)))
        k = int(data["k"])
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed decomposed-MIP document: {exc}") from exc
    problem = MipProblem.build(sense, variables, cons, data.get("offset", 0))
    return problem, Decomposition(problem, k, block_of)


def dump_decomposed(problem: MipProblem, dec: Decomposition) -> dict:
    sign = -1 if problem.original_sense == "max" else 1
    return {
        "sense": problem.original_sense,
        "k": dec.k,
        "vars": [
            {"name": v.name, "lb": _num(v.lower), "ub": _num(v.upper), "kind": v.kind, "cost": _num(sign * v.cost)}
            for v in problem.variables
        ],
        "cons": [
            {
                "name": con.name,
                "coeffs": {problem.variables[v].name: _num(a) for v, a in sorted(con.coeffs.items())},
                "sense": con.sense,
                "rhs": _num(con.rhs),
                "block": dec.block_of[c],
            }
            for c, con in enumerate(problem.constraints)
        ],
    }


def read_decomposed(path) -> tuple[MipProblem, Decomposition]:
    with open(path) as fh:
        return load_decomposed(json.load(fh))
