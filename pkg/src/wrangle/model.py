"""Domain types shared by every wrangling stage."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

Value = Optional[str]

DEFAULT_NULL_TOKENS = frozenset({"", "-", "NULL", "N/A", "null"})

_WS = re.compile(r"\s+")


class ModelError(ValueError):
    """Raised when a domain object violates its invariants."""


def normalize_cell(raw: Value, null_tokens: Iterable[str] = DEFAULT_NULL_TOKENS) -> Value:
    """Trim, collapse internal whitespace, and map null tokens to ``None``."""
    if raw is None:
        return None
    trimmed = raw.strip()
    if trimmed in null_tokens:
        return None
    return _WS.sub(" ", trimmed)


def normalize_name(name: str) -> str:
    return _WS.sub(" ", name.strip()).lower()


class AttributeRef(NamedTuple):
    relation: str
    attribute: str

    def __str__(self) -> str:
        return f"{self.relation}.{self.attribute}"


class TargetAttr(NamedTuple):
    table: str
    attribute: str

    def __str__(self) -> str:
        return f"{self.table}.{self.attribute}"


@dataclass(frozen=True)
class Relation:
    name: str
    attributes: tuple[str, ...]
    tuples: tuple[tuple[Value, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "tuples", tuple(tuple(row) for row in self.tuples))
        seen = set()
        for attr in self.attributes:
            key = normalize_name(attr)
            if key in seen:
                raise ModelError(f"duplicate attribute {attr!r} in relation {self.name!r}")
            seen.add(key)
        width = len(self.attributes)
        for i, row in enumerate(self.tuples):
            if len(row) != width:
                raise ModelError(
                    f"relation {self.name!r}: row {i} has {len(row)} cells, expected {width}"
                )

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self) -> Iterator[tuple[Value, ...]]:
        return iter(self.tuples)

    def index(self, attribute: str) -> int:
        try:
            return self.attributes.index(attribute)
        except ValueError:
            raise KeyError(f"{self.name}.{attribute}") from None

    def has(self, attribute: str) -> bool:
        return attribute in self.attributes

    def column(self, attribute: str) -> list[Value]:
        i = self.index(attribute)
        return [row[i] for row in self.tuples]

    def distinct(self, attribute: str, limit: int | None = None) -> list[str]:
        """Distinct non-null values in first-seen row order."""
        out: dict[str, None] = {}
        for v in self.column(attribute):
            if v is not None and v not in out:
                out[v] = None
                if limit is not None and len(out) >= limit:
                    break
        return list(out)

    def ref(self, attribute: str) -> AttributeRef:
        self.index(attribute)
        return AttributeRef(self.name, attribute)

    def records(self) -> list[dict[str, Value]]:
        return [dict(zip(self.attributes, row)) for row in self.tuples]

    def with_tuples(self, tuples: Iterable[Sequence[Value]]) -> "Relation":
        return Relation(self.name, self.attributes, tuple(tuple(r) for r in tuples))


@dataclass(frozen=True)
class TargetTable:
    name: str
    attributes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))

    def refs(self) -> list[TargetAttr]:
        return [TargetAttr(self.name, a) for a in self.attributes]


@dataclass(frozen=True)
class TargetSchema:
    tables: tuple[TargetTable, ...]

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        if not self.tables or not any(t.attributes for t in self.tables):
            raise ModelError("target schema needs at least one table with one attribute")
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate target table names in {names}")
        for t in self.tables:
            if len(set(t.attributes)) != len(t.attributes):
                raise ModelError(f"duplicate attributes in target table {t.name!r}")

    def table(self, name: str) -> TargetTable:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def attrs(self) -> list[TargetAttr]:
        return [ta for t in self.tables for ta in t.refs()]

    def empty(self, name: str) -> Relation:
        return Relation(name, self.table(name).attributes, ())


class ContextType(str, enum.Enum):
    REFERENCE = "reference"
    MASTER = "master"
    EXAMPLE = "example"

    @property
    def priority(self) -> int:
        """Lower is more trusted; used for tie-breaks between contexts."""
        return _PRIORITY[self]


_PRIORITY = {ContextType.REFERENCE: 0, ContextType.MASTER: 1, ContextType.EXAMPLE: 2}


@dataclass(frozen=True)
class ContextRelationship:
    """Single-atom tgd aligning a context relation with one target table."""

    context_source: str
    target_table: str
    attribute_map: tuple[tuple[str, str], ...]
    ctype: ContextType

    def __post_init__(self):
        object.__setattr__(self, "attribute_map", tuple(tuple(p) for p in self.attribute_map))
        object.__setattr__(self, "ctype", ContextType(self.ctype))

    def target_of(self, context_attr: str) -> TargetAttr | None:
        for c, t in self.attribute_map:
            if c == context_attr:
                return TargetAttr(self.target_table, t)
        return None

    def context_of(self, target_attr: str) -> str | None:
        for c, t in self.attribute_map:
            if t == target_attr:
                return c
        return None

    def as_dict(self) -> dict[str, str]:
        return dict(self.attribute_map)


def validate_relationship(
    rel: ContextRelationship, registry: Iterable[Relation], target: TargetSchema
) -> list[str]:
    """Return every problem with ``rel``; an empty list means it is usable."""
    problems: list[str] = []
    by_name = {r.name: r for r in registry}
    context = by_name.get(rel.context_source)
    if context is None:
        problems.append(f"unknown context relation {rel.context_source!r}")
    table = None
    try:
        table = target.table(rel.target_table)
    except KeyError:
        problems.append(f"unknown target table {rel.target_table!r}")
    if not rel.attribute_map:
        problems.append("attribute map is empty")
    seen: dict[str, str] = {}
    for c_attr, t_attr in rel.attribute_map:
        if context is not None and not context.has(c_attr):
            problems.append(f"context attribute {rel.context_source}.{c_attr} does not exist")
        if table is not None and t_attr not in table.attributes:
            problems.append(f"target attribute {rel.target_table}.{t_attr} does not exist")
        if t_attr in seen:
            problems.append(
                f"target attribute {t_attr!r} mapped from both {seen[t_attr]!r} and {c_attr!r}"
            )
        else:
            seen[t_attr] = c_attr
    return problems


@dataclass(frozen=True)
class PipelineConfig:
    match_lb: float = 0.5
    match_ub: float = 0.8
    map_lb: float = 0.1
    map_ub: float = 0.9
    map_step: float = 0.1
    kfolds: int = 3
    repair_support: Optional[int] = None
    repair_step: int = 1
    repair_lb: float = 0.0
    max_lhs: int = 2
    null_tokens: frozenset[str] = field(default=DEFAULT_NULL_TOKENS)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "null_tokens", frozenset(self.null_tokens))
        for lo, hi, what in ((self.match_lb, self.match_ub, "match"), (self.map_lb, self.map_ub, "map")):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ModelError(f"{what} bounds must satisfy 0 <= lb <= ub <= 1, got {lo}, {hi}")
        if self.map_step <= 0:
            raise ModelError("map_step must be positive")
        if self.kfolds < 2:
            raise ModelError("kfolds must be at least 2")
        if self.repair_support is not None and self.repair_support < 1:
            raise ModelError("repair_support must be at least 1")
        if self.repair_step < 1:
            raise ModelError("repair_step must be at least 1")
        if not 0.0 <= self.repair_lb < 1.0:
            raise ModelError("repair_lb must lie in [0, 1)")
        if self.max_lhs < 1:
            raise ModelError("max_lhs must be at least 1")

    def thresholds(self) -> list[float]:
        """Descending mapping thresholds from ub to lb inclusive."""
        out = []
        i = 0
        while True:
            t = round(self.map_ub - i * self.map_step, 10)
            if t < self.map_lb - 1e-9:
                break
            out.append(t)
            i += 1
        return out

    def initial_support(self, n_tuples: int) -> int:
        if self.repair_support is not None:
            return self.repair_support
        return max(5, -(-n_tuples * 5 // 100))
