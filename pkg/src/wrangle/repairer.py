"""CFD tuning, rewriting onto the target, violation detection and cost-minimal repair.

Constant CFDs only constrain single tuples, so tuples are repaired one at a time.
For each tuple a small candidate domain is built per attribute (the original value,
the nearest other pattern constant for lhs attributes, and every rhs constant that
a reachable pattern can demand) and the cheapest violation-free assignment over
those domains is found by branch and bound. Costs are Damerau-Levenshtein
distances, null <-> value costing the length of the value.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .model import ContextRelationship, ContextType, PipelineConfig, Relation, Value
from .profiler import ConditionalFD, FunctionalDependency, discover_cfds
from .strings import damerau_levenshtein

SINGLE, PAIR = "single-tuple", "tuple-pair"
# Largest domain product searched exactly per tuple; beyond it the greedy loop runs.
EXACT_LIMIT = 200_000

Constraint = Union[ConditionalFD, FunctionalDependency]


def repair_cost(old: Value, new: Value) -> int:
    return damerau_levenshtein(old, new)


@dataclass(frozen=True)
class Violation:
    kind: str
    cfd: Constraint
    rows: tuple[int, ...]
    attributes: tuple[str, ...]


@dataclass(frozen=True, order=True)
class RepairOp:
    row: int
    attribute: str
    old: Value
    new: Value
    cost: float

    def __post_init__(self):
        if self.old == self.new:
            raise ValueError("a repair must change the value")
        if self.cost < 0:
            raise ValueError("repair cost must be non-negative")

    def as_dict(self) -> dict:
        return {"row": self.row, "attribute": self.attribute, "old": self.old, "new": self.new, "cost": self.cost}


@dataclass
class RepairResult:
    relation: Relation
    ops: list[RepairOp]
    unresolved: list[int] = field(default_factory=list)
    inexact: list[int] = field(default_factory=list)

    @property
    def bound_triggered(self) -> bool:
        return bool(self.unresolved)

    @property
    def total_cost(self) -> float:
        return sum(op.cost for op in self.ops)


# -- tuning -------------------------------------------------------------------------

def _violates(cfd: ConditionalFD, row: dict[str, Value]) -> bool:
    return cfd.matches(row) and row.get(cfd.rhs) != cfd.rhs_value


def filter_cfds(cfds: Iterable[ConditionalFD], context: Relation) -> set[ConditionalFD]:
    """Keep the CFDs no tuple of ``context`` violates."""
    records = context.records()
    return {c for c in cfds if not any(_violates(c, r) for r in records)}


def score_cfds(cfds: Iterable[ConditionalFD]) -> float:
    cfds = list(cfds)
    if not cfds:
        return 0.0
    return sum(c.confidence == 1.0 for c in cfds) / len(cfds)


def tune_cfds(context: Relation, cfg: PipelineConfig = PipelineConfig()) -> set[ConditionalFD]:
    """Lower the support while the share of exact CFDs keeps strictly improving."""
    support = cfg.initial_support(len(context))
    best_score, best = cfg.repair_lb, set()
    while support >= 1:
        found = discover_cfds(context, support, cfg.max_lhs)
        score = score_cfds(found)
        if score <= best_score:
            break
        best_score, best = score, filter_cfds(found, context)
        support -= cfg.repair_step
    return best


def rewrite_to_target(
    cfds: Iterable[ConditionalFD], rel: ContextRelationship
) -> tuple[set[ConditionalFD], int]:
    """Re-express context CFDs over target attributes; returns (rewritten, dropped)."""
    amap = rel.as_dict()
    out, dropped = set(), 0
    for c in cfds:
        names = list(c.lhs) + [c.rhs]
        if any(n not in amap for n in names):
            dropped += 1
            continue
        out.add(
            ConditionalFD(
                rel.target_table, tuple(amap[a] for a in c.lhs), c.lhs_values,
                amap[c.rhs], c.rhs_value, c.support, c.confidence,
            )
        )
    return out, dropped


def merge_cfds(
    sets: Sequence[tuple[ContextType, Iterable[ConditionalFD]]]
) -> tuple[list[ConditionalFD], int]:
    """Union CFD sets; same-pattern conflicts go to the more trusted context.

    Returns (merged CFDs sorted, number of conflicting CFDs discarded).
    """
    best: dict[tuple, tuple[tuple, ConditionalFD]] = {}
    conflicts = 0
    for ctype, cfds in sets:
        for c in sorted(cfds):
            key = (c.relation, c.lhs, c.lhs_values, c.rhs)
            rank = (ctype.priority, -c.support, c.rhs_value)
            cur = best.get(key)
            if cur is not None and cur[1].rhs_value != c.rhs_value:
                conflicts += 1
            if cur is None or rank < cur[0]:
                best[key] = (rank, c)
    return sorted(c for _, c in best.values()), conflicts


# -- detection ----------------------------------------------------------------------

def _ordered(cfds: Iterable[Constraint]) -> list[Constraint]:
    cs = [c for c in cfds if isinstance(c, ConditionalFD)]
    fs = [c for c in cfds if isinstance(c, FunctionalDependency)]
    return sorted(cs) + sorted(fs)


def detect_violations(rel: Relation, cfds: Iterable[Constraint]) -> list[Violation]:
    constraints = _ordered(cfds)
    for c in constraints:
        for a in (*c.lhs, c.rhs):
            rel.index(a)
    found: list[tuple[tuple, Violation]] = []
    records = rel.records()
    for k, c in enumerate(constraints):
        if isinstance(c, ConditionalFD):
            for i, r in enumerate(records):
                if _violates(c, r):
                    found.append(((i, k), Violation(SINGLE, c, (i,), (c.rhs,))))
        else:
            groups: dict[tuple, list[int]] = defaultdict(list)
            for i, r in enumerate(records):
                key = tuple(r[a] for a in c.lhs)
                if None not in key:
                    groups[key].append(i)
            for rows in groups.values():
                for x in range(len(rows)):
                    for y in range(x + 1, len(rows)):
                        i, j = rows[x], rows[y]
                        if records[i][c.rhs] != records[j][c.rhs]:
                            found.append(((i, k, j), Violation(PAIR, c, (i, j), (c.rhs,))))
    return [v for _, v in sorted(found, key=lambda kv: kv[0])]


# -- repair -------------------------------------------------------------------------

def _value_key(v: Value) -> tuple:
    return (0, "") if v is None else (1, v)


def candidate_domains(
    row: dict[str, Value], cfds: Sequence[ConditionalFD]
) -> dict[str, list[Value]]:
    """Values each attribute may take when repairing ``row``; original value first."""
    lhs_consts: dict[str, set[str]] = defaultdict(set)
    for c in cfds:
        for a, v in zip(c.lhs, c.lhs_values):
            lhs_consts[a].add(v)
    dom: dict[str, set[Value]] = {}
    for a in {a for c in cfds for a in (*c.lhs, c.rhs)}:
        dom[a] = {row[a]}
    for a, consts in lhs_consts.items():
        others = sorted(v for v in consts if v != row[a])
        if others:
            dom[a].add(min(others, key=lambda v: (repair_cost(row[a], v), v)))
        else:
            dom[a].add(None)
    changed = True
    while changed:
        changed = False
        for c in cfds:
            if c.rhs_value in dom[c.rhs]:
                continue
            if all(v in dom[a] for a, v in zip(c.lhs, c.lhs_values)):
                dom[c.rhs].add(c.rhs_value)
                changed = True
    return {
        a: [row[a]] + sorted((v for v in vals if v != row[a]), key=_value_key)
        for a, vals in sorted(dom.items())
    }


def _solve_exact(
    row: dict[str, Value], cfds: Sequence[ConditionalFD], dom: dict[str, list[Value]]
) -> dict[str, Value] | None:
    """Cheapest violation-free assignment over ``dom``; ties by fewer changes then values."""
    attrs = [a for a in dom if len(dom[a]) > 1] + [a for a in dom if len(dom[a]) == 1]
    pos = {a: i for i, a in enumerate(attrs)}
    # check each CFD as soon as its last attribute is assigned
    due: dict[int, list[ConditionalFD]] = defaultdict(list)
    for c in cfds:
        due[max(pos[a] for a in (*c.lhs, c.rhs))].append(c)
    costs = {a: [repair_cost(row[a], v) for v in dom[a]] for a in attrs}
    best: list = [None, None]
    assign: dict[str, Value] = {}

    def rank(cost, changes):
        return (cost, changes, tuple(_value_key(assign[a]) for a in sorted(attrs)))

    def dfs(i: int, cost: int, changes: int):
        if best[0] is not None and (cost, changes) > best[0][:2]:
            return
        if i == len(attrs):
            r = rank(cost, changes)
            if best[0] is None or r < best[0]:
                best[0], best[1] = r, dict(assign)
            return
        a = attrs[i]
        for v, dc in zip(dom[a], costs[a]):
            assign[a] = v
            if all(not _violates(c, assign) for c in due[i]):
                dfs(i + 1, cost + dc, changes + (dc > 0))
        del assign[a]

    dfs(0, 0, 0)
    return best[1]


def _solve_greedy(
    row: dict[str, Value], cfds: Sequence[ConditionalFD], dom: dict[str, list[Value]], bound: int
) -> dict[str, Value] | None:
    """Apply the cheapest single-cell fix of some violation until none remain."""
    cur = dict(row)
    touched: set[str] = set()
    for _ in range(bound):
        violated = [c for c in cfds if _violates(c, cur)]
        if not violated:
            return cur
        options = []
        for c in violated:
            if c.rhs not in touched:
                options.append((repair_cost(row[c.rhs], c.rhs_value), c.rhs, c.rhs_value))
            for a in c.lhs:
                if a in touched:
                    continue
                for v in dom[a][1:]:
                    options.append((repair_cost(row[a], v), a, v))
        if not options:
            return None
        _, a, v = min(options, key=lambda o: (o[0], o[1], _value_key(o[2])))
        cur[a] = v
        touched.add(a)
    return cur if not any(_violates(c, cur) for c in cfds) else None


def repair_relation(
    rel: Relation, cfds: Iterable[Constraint], exact_limit: int = EXACT_LIMIT
) -> RepairResult:
    constraints = _ordered(cfds)
    constant = [c for c in constraints if isinstance(c, ConditionalFD)]
    plain = [c for c in constraints if isinstance(c, FunctionalDependency)]
    for c in constraints:
        for a in (*c.lhs, c.rhs):
            rel.index(a)
    records = rel.records()
    ops: list[RepairOp] = []
    unresolved, inexact = [], []
    bound = len(rel.attributes)
    for i, row in enumerate(records):
        if not any(_violates(c, row) for c in constant):
            continue
        dom = candidate_domains(row, constant)
        size = math.prod(len(v) for v in dom.values())
        if size <= exact_limit:
            fixed = _solve_exact(row, constant, dom)
        else:
            inexact.append(i)
            fixed = _solve_greedy(row, constant, dom, bound)
        if fixed is None:
            unresolved.append(i)
            continue
        for a in rel.attributes:
            if a in fixed and fixed[a] != row[a]:
                ops.append(RepairOp(i, a, row[a], fixed[a], repair_cost(row[a], fixed[a])))
                row[a] = fixed[a]
    for fd in plain:
        ops.extend(_repair_fd(records, fd))
    out = rel.with_tuples(tuple(r[a] for a in rel.attributes) for r in records)
    if plain and detect_violations(out, constraints):
        remaining = {v.rows[0] for v in detect_violations(out, constraints)}
        unresolved = sorted(set(unresolved) | remaining)
    order = {a: k for k, a in enumerate(rel.attributes)}
    ops.sort(key=lambda op: (op.row, order[op.attribute]))
    return RepairResult(out, ops, unresolved, inexact)


def _repair_fd(records: list[dict[str, Value]], fd: FunctionalDependency) -> list[RepairOp]:
    groups: dict[tuple, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        key = tuple(r[a] for a in fd.lhs)
        if None not in key:
            groups[key].append(i)
    ops = []
    for rows in groups.values():
        values = [records[i][fd.rhs] for i in rows]
        if len(set(values)) < 2:
            continue
        choices = sorted({v for v in values if v is not None})
        target = min(choices, key=lambda v: (sum(repair_cost(x, v) for x in values), v))
        for i in rows:
            old = records[i][fd.rhs]
            if old != target:
                ops.append(RepairOp(i, fd.rhs, old, target, repair_cost(old, target)))
                records[i][fd.rhs] = target
    return ops


def repair(rel: Relation, cfds: Iterable[Constraint]) -> tuple[Relation, list[RepairOp]]:
    result = repair_relation(rel, cfds)
    return result.relation, result.ops
