"""Schema, instance and recogniser based matching of source attributes to the target."""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from . import strings
from .model import (
    AttributeRef,
    ContextRelationship,
    PipelineConfig,
    Relation,
    TargetAttr,
    TargetSchema,
)

SCHEMA, INSTANCE, RECOGNISER = "schema", "instance", "recogniser"

MIN_SCORE = 0.1
SAMPLE_CAP = 1000
SHAPE_WEIGHT, TYPE_WEIGHT, LENGTH_WEIGHT = 0.4, 0.3, 0.3
TYPES = ("integer", "decimal", "text")


@dataclass(frozen=True)
class Correspondence:
    source: AttributeRef
    target: TargetAttr
    score: float
    provenance: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "provenance", frozenset(self.provenance))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if not self.provenance:
            raise ValueError("provenance must be non-empty")

    @property
    def key(self) -> tuple[AttributeRef, TargetAttr]:
        return (self.source, self.target)


class CorrespondenceSet(Mapping):
    """At most one correspondence per (source attribute, target attribute) pair."""

    def __init__(self, items: Iterable[Correspondence] = ()):
        self._items: dict[tuple[AttributeRef, TargetAttr], Correspondence] = {}
        for c in items:
            if c.key in self._items:
                raise ValueError(f"duplicate correspondence for {c.key}")
            self._items[c.key] = c

    def __getitem__(self, key):
        return self._items[key]

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __eq__(self, other):
        if isinstance(other, CorrespondenceSet):
            return self._items == other._items
        return NotImplemented

    def __repr__(self):
        return f"CorrespondenceSet({len(self)} correspondences)"

    def correspondences(self) -> Iterator[Correspondence]:
        """Iterate in a stable order."""
        for key in sorted(self._items):
            yield self._items[key]

    def score(self, source: AttributeRef, target: TargetAttr) -> float:
        c = self._items.get((source, target))
        return c.score if c else 0.0

    def for_source(self, source: AttributeRef) -> list[Correspondence]:
        return [c for c in self.correspondences() if c.source == source]

    def filter(self, threshold: float) -> "CorrespondenceSet":
        return CorrespondenceSet(c for c in self._items.values() if c.score > threshold)

    @staticmethod
    def union(*sets: "CorrespondenceSet") -> "CorrespondenceSet":
        acc = CorrespondenceSet()
        for s in sets:
            acc = combine(acc, s)
        return acc


@dataclass(frozen=True)
class DomainProfile:
    target: TargetAttr
    type_dist: tuple[float, float, float]
    length_mean: float
    length_std: float
    token_mean: float
    shapes: tuple[tuple[str, float], ...]

    @property
    def shape_hist(self) -> dict[str, float]:
        return dict(self.shapes)


# -- schema based --------------------------------------------------------------

def name_similarity(a: str, b: str) -> float:
    edit = strings.edit_similarity(a.lower(), b.lower())
    tok = strings.jaccard(strings.name_tokens(a), strings.name_tokens(b))
    return max(edit, tok)


def schema_match(source: Relation, target: TargetSchema) -> CorrespondenceSet:
    out = []
    for attr in source.attributes:
        for ta in target.attrs():
            score = name_similarity(attr, ta.attribute)
            if score >= MIN_SCORE:
                out.append(Correspondence(AttributeRef(source.name, attr), ta, score, {SCHEMA}))
    return CorrespondenceSet(out)


# -- instance based --------------------------------------------------------------

def value_similarity(xs: Sequence[str], ys: Sequence[str]) -> float:
    """max(Jaccard of the value sets, cosine of trigram profiles of the joined samples)."""
    if not xs or not ys:
        return 0.0
    jac = strings.jaccard(xs, ys)
    cos = strings.cosine(strings.trigrams(" ".join(xs)), strings.trigrams(" ".join(ys)))
    return min(1.0, max(jac, cos))


def instance_match(
    source: Relation, context: Relation, rel: ContextRelationship
) -> CorrespondenceSet:
    out = []
    samples = {a: source.distinct(a, SAMPLE_CAP) for a in source.attributes}
    for c_attr, t_attr in rel.attribute_map:
        ctx_vals = context.distinct(c_attr, SAMPLE_CAP)
        if not ctx_vals:
            continue
        ta = TargetAttr(rel.target_table, t_attr)
        for attr in source.attributes:
            score = value_similarity(samples[attr], ctx_vals)
            if score >= MIN_SCORE:
                out.append(Correspondence(AttributeRef(source.name, attr), ta, score, {INSTANCE}))
    return CorrespondenceSet(out)


def _merge(acc: CorrespondenceSet, new: CorrespondenceSet) -> CorrespondenceSet:
    merged = dict(acc.items())
    for key, c in new.items():
        old = merged.get(key)
        if old is None:
            merged[key] = c
        else:
            merged[key] = Correspondence(
                c.source, c.target, max(old.score, c.score), old.provenance | c.provenance
            )
    return CorrespondenceSet(merged.values())


def combine(acc: CorrespondenceSet, new: CorrespondenceSet) -> CorrespondenceSet:
    """Per-pair maximum score with unioned provenance."""
    return _merge(acc, new)


def update(schema_m: CorrespondenceSet, instance_m: CorrespondenceSet) -> CorrespondenceSet:
    return _merge(schema_m, instance_m)


# -- recognisers -----------------------------------------------------------------

@dataclass(frozen=True)
class _ColumnStats:
    type_dist: tuple[float, float, float]
    length_mean: float
    length_std: float
    token_mean: float
    shapes: dict[str, float]


def _stats(values: Sequence[str]) -> _ColumnStats:
    n = len(values)
    types = Counter(strings.basic_type(v) for v in values)
    lengths = [len(v) for v in values]
    shapes = Counter(strings.shape(v) for v in values)
    return _ColumnStats(
        type_dist=tuple(types[t] / n for t in TYPES),
        length_mean=statistics.fmean(lengths),
        length_std=statistics.pstdev(lengths),
        token_mean=statistics.fmean(len(v.split()) for v in values),
        shapes={s: k / n for s, k in shapes.items()},
    )


def build_domain_profile(
    context: Relation, rel: ContextRelationship, target_attr: str
) -> DomainProfile:
    c_attr = rel.context_of(target_attr)
    if c_attr is None:
        raise KeyError(f"{rel.target_table}.{target_attr} is not mapped by {rel.context_source}")
    values = [v for v in context.column(c_attr) if v is not None]
    if not values:
        raise ValueError(f"{context.name}.{c_attr} has no non-null values")
    st = _stats(values)
    return DomainProfile(
        target=TargetAttr(rel.target_table, target_attr),
        type_dist=st.type_dist,
        length_mean=st.length_mean,
        length_std=st.length_std,
        token_mean=st.token_mean,
        shapes=tuple(sorted(st.shapes.items())),
    )


def recogniser_score(values: Sequence[str], profile: DomainProfile) -> float:
    if not values:
        return 0.0
    st = _stats(values)
    hist = profile.shape_hist
    shape_overlap = sum(min(p, hist.get(s, 0.0)) for s, p in st.shapes.items())
    type_overlap = sum(min(a, b) for a, b in zip(st.type_dist, profile.type_dist))
    z = (st.length_mean - profile.length_mean) / max(profile.length_std, 1.0)
    closeness = math.exp(-0.5 * z * z)
    score = SHAPE_WEIGHT * shape_overlap + TYPE_WEIGHT * type_overlap + LENGTH_WEIGHT * closeness
    return min(1.0, max(0.0, score))


def recognise(source: Relation, profiles: Iterable[DomainProfile]) -> CorrespondenceSet:
    profiles = list(profiles)
    out = []
    for attr in source.attributes:
        values = [v for v in source.column(attr) if v is not None]
        if not values:
            continue
        for p in profiles:
            out.append(
                Correspondence(
                    AttributeRef(source.name, attr), p.target, recogniser_score(values, p), {RECOGNISER}
                )
            )
    return CorrespondenceSet(out)


def test_matches(
    m: CorrespondenceSet, recog: CorrespondenceSet, lb: float, ub: float
) -> CorrespondenceSet:
    """Raise, lower or add correspondences on context-aligned attributes."""
    if not 0.0 <= lb <= ub <= 1.0:
        raise ValueError("need 0 <= lb <= ub <= 1")
    result = dict(m.items())
    for key, r in recog.items():
        old = result.get(key)
        if old is None:
            if r.score >= ub:
                result[key] = Correspondence(r.source, r.target, r.score, {RECOGNISER})
            continue
        if r.score >= ub:
            result[key] = Correspondence(
                old.source, old.target, max(old.score, r.score), old.provenance | {RECOGNISER}
            )
        elif r.score < lb and INSTANCE not in old.provenance and lb > 0:
            result[key] = Correspondence(
                old.source, old.target, old.score * r.score / lb, old.provenance | {RECOGNISER}
            )
    return CorrespondenceSet(result.values())


test_matches.__test__ = False  # keep pytest from collecting it


def match(
    source: Relation,
    target: TargetSchema,
    contexts: Sequence[tuple[Relation, ContextRelationship]] = (),
    cfg: PipelineConfig = PipelineConfig(),
) -> CorrespondenceSet:
    m = schema_match(source, target)
    m_d = CorrespondenceSet()
    for ctx, rel in contexts:
        m_d = combine(m_d, instance_match(source, ctx, rel))
    m = update(m, m_d)
    for ctx, rel in contexts:
        profiles = []
        for c_attr, t_attr in rel.attribute_map:
            if any(v is not None for v in ctx.column(c_attr)):
                profiles.append(build_domain_profile(ctx, rel, t_attr))
        m = test_matches(m, recognise(source, profiles), cfg.match_lb, cfg.match_ub)
    return m
