"""Dependency profiling: candidate keys, INDs, foreign keys, FDs and constant CFDs."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .model import AttributeRef, Relation, TargetAttr, Value


@dataclass(frozen=True, order=True)
class FunctionalDependency:
    relation: str
    lhs: tuple[str, ...]
    rhs: str

    def __post_init__(self):
        object.__setattr__(self, "lhs", tuple(sorted(self.lhs)))
        if self.rhs in self.lhs:
            raise ValueError(f"trivial FD: {self.rhs} in {self.lhs}")

    def __str__(self) -> str:
        return f"{self.relation}: [{', '.join(self.lhs)}] -> [{self.rhs}]"


@dataclass(frozen=True, order=True)
class InclusionDependency:
    source: AttributeRef
    target: AttributeRef

    def __str__(self) -> str:
        return f"{self.source} <= {self.target}"


@dataclass(frozen=True, order=True)
class ForeignKeyCandidate:
    ind: InclusionDependency
    shared: TargetAttr

    @property
    def source(self) -> AttributeRef:
        return self.ind.source

    @property
    def target(self) -> AttributeRef:
        return self.ind.target


@dataclass(frozen=True, order=True)
class ConditionalFD:
    """Constant CFD ``relation: lhs -> rhs`` with pattern ``(lhs_values || rhs_value)``."""

    relation: str
    lhs: tuple[str, ...]
    lhs_values: tuple[str, ...]
    rhs: str
    rhs_value: str
    support: int = 0
    confidence: float = 1.0

    def __post_init__(self):
        pairs = sorted(zip(self.lhs, self.lhs_values))
        object.__setattr__(self, "lhs", tuple(a for a, _ in pairs))
        object.__setattr__(self, "lhs_values", tuple(v for _, v in pairs))
        if not self.lhs:
            raise ValueError("CFD needs a non-empty lhs")
        if self.rhs in self.lhs:
            raise ValueError(f"trivial CFD: {self.rhs} in {self.lhs}")
        if any(v is None for v in self.lhs_values) or self.rhs_value is None:
            raise ValueError("CFD pattern constants must be non-null")

    @property
    def embedded(self) -> FunctionalDependency:
        return FunctionalDependency(self.relation, self.lhs, self.rhs)

    @property
    def pattern(self) -> dict[str, str]:
        return dict(zip(self.lhs, self.lhs_values))

    @property
    def key(self) -> tuple:
        """Identity ignoring the measured support and confidence."""
        return (self.lhs, self.lhs_values, self.rhs, self.rhs_value)

    def matches(self, row: dict[str, Value]) -> bool:
        return all(row.get(a) == v for a, v in zip(self.lhs, self.lhs_values))

    def __str__(self) -> str:
        pat = ", ".join(self.lhs_values)
        return f"{self.relation}: [{', '.join(self.lhs)}] -> [{self.rhs}], ({pat} || {self.rhs_value})"


def discover_candidate_keys(rel: Relation) -> set[str]:
    keys = set()
    for attr in rel.attributes:
        col = rel.column(attr)
        if all(v is not None for v in col) and len(set(col)) == len(col):
            keys.add(attr)
    return keys


def discover_inclusion_dependencies(rels: Iterable[Relation]) -> set[InclusionDependency]:
    cols: list[tuple[AttributeRef, frozenset[str]]] = []
    for rel in rels:
        for attr in rel.attributes:
            cols.append((AttributeRef(rel.name, attr), frozenset(rel.distinct(attr))))
    out = set()
    for a, va in cols:
        if not va:
            continue
        for b, vb in cols:
            if a != b and len(va) <= len(vb) and va <= vb:
                out.add(InclusionDependency(a, b))
    return out


def discover_foreign_keys(
    rels: Iterable[Relation], matches, lb: float = 0.5
) -> set[ForeignKeyCandidate]:
    """INDs into a candidate key whose endpoints match one common target attribute."""
    rels = list(rels)
    keys = {r.name: discover_candidate_keys(r) for r in rels}
    matched: dict[AttributeRef, set[TargetAttr]] = defaultdict(set)
    for c in matches:
        if c.score > lb:
            matched[c.source].add(c.target)
    out = set()
    for ind in discover_inclusion_dependencies(rels):
        if ind.source.relation == ind.target.relation:
            continue
        if ind.target.attribute not in keys[ind.target.relation]:
            continue
        for shared in matched[ind.source] & matched[ind.target]:
            out.add(ForeignKeyCandidate(ind, shared))
    return out


# -- functional dependencies -------------------------------------------------

def _stripped_partition(column: Sequence[Value]) -> list[list[int]]:
    groups: dict[Value, list[int]] = defaultdict(list)
    for i, v in enumerate(column):
        groups[v].append(i)
    return [g for g in groups.values() if len(g) > 1]


def _product(p: list[list[int]], q: list[list[int]], n: int) -> list[list[int]]:
    """Stripped partition product (TANE)."""
    owner = [-1] * n
    for k, cls in enumerate(p):
        for i in cls:
            owner[i] = k
    buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
    for k, cls in enumerate(q):
        for i in cls:
            if owner[i] >= 0:
                buckets[(owner[i], k)].append(i)
    return [b for b in buckets.values() if len(b) > 1]


def _error(p: list[list[int]]) -> int:
    return sum(len(c) for c in p) - len(p)


def discover_fds(rel: Relation, max_lhs: int = 2) -> set[FunctionalDependency]:
    """Minimal exact FDs with 1..max_lhs lhs attributes, via partition refinement.

    Nulls compare equal to each other, i.e. they behave as one distinct token.
    """
    n = len(rel)
    attrs = rel.attributes
    parts: dict[frozenset[str], list[list[int]]] = {
        frozenset([a]): _stripped_partition(rel.column(a)) for a in attrs
    }

    def partition(xs: frozenset[str]) -> list[list[int]]:
        if xs not in parts:
            items = sorted(xs)
            head = partition(frozenset(items[:-1]))
            parts[xs] = _product(head, parts[frozenset(items[-1:])], n)
        return parts[xs]

    found: dict[str, list[frozenset[str]]] = defaultdict(list)
    out = set()
    for size in range(1, max_lhs + 1):
        for lhs in combinations(attrs, size):
            xs = frozenset(lhs)
            e_x = _error(partition(xs))
            for a in attrs:
                if a in xs:
                    continue
                if any(prev <= xs for prev in found[a]):
                    continue
                if _error(partition(xs | {a})) == e_x:
                    found[a].append(xs)
                    out.add(FunctionalDependency(rel.name, tuple(lhs), a))
    return out


def fd_holds(rel: Relation, lhs: Sequence[str], rhs: str) -> bool:
    seen: dict[tuple, Value] = {}
    li = [rel.index(a) for a in lhs]
    ri = rel.index(rhs)
    for row in rel.tuples:
        k = tuple(row[i] for i in li)
        if k in seen and seen[k] != row[ri]:
            return False
        seen.setdefault(k, row[ri])
    return True


# -- constant CFDs -----------------------------------------------------------

def discover_cfds(rel: Relation, support: int, max_lhs: int = 2) -> set[ConditionalFD]:
    """All s-frequent constant CFDs up to ``max_lhs`` lhs attributes.

    The rhs constant of a pattern is its most frequent non-null rhs value (ties go
    to the smallest string); confidence is measured but not filtered on. A CFD is
    dropped when a confidence-1 CFD with the same rhs constant and a strictly
    smaller lhs pattern exists.
    """
    if support < 1:
        raise ValueError("support must be >= 1")
    attrs = rel.attributes
    rows = rel.tuples
    candidates: list[ConditionalFD] = []
    for size in range(1, max_lhs + 1):
        for lhs in combinations(attrs, size):
            li = [rel.index(a) for a in lhs]
            groups: dict[tuple[str, ...], list[int]] = defaultdict(list)
            for r, row in enumerate(rows):
                key = tuple(row[i] for i in li)
                if None not in key:
                    groups[key].append(r)
            for key, members in groups.items():
                if len(members) < support:
                    continue
                for rhs in attrs:
                    if rhs in lhs:
                        continue
                    ri = rel.index(rhs)
                    counts = Counter(rows[r][ri] for r in members if rows[r][ri] is not None)
                    if not counts:
                        continue
                    best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
                    candidates.append(
                        ConditionalFD(
                            rel.name, lhs, key, rhs, best[0],
                            support=len(members), confidence=best[1] / len(members),
                        )
                    )
    exact = defaultdict(list)
    for c in candidates:
        if c.confidence == 1.0:
            exact[(c.rhs, c.rhs_value)].append(set(zip(c.lhs, c.lhs_values)))
    out = set()
    for c in candidates:
        pat = set(zip(c.lhs, c.lhs_values))
        if any(other < pat for other in exact[(c.rhs, c.rhs_value)]):
            continue
        out.add(c)
    return out
