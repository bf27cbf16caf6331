"""Mapping generation, verification against data context, selection and execution.

Candidates are st-tgds whose body is an out-tree of foreign-key joins rooted at an
*anchor* source (the relation whose rows drive the output) and whose head is one
target table. Target attributes without a projected source attribute are the
existential variables of the tgd and come out as nulls.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .matcher import CorrespondenceSet
from .model import (
    AttributeRef,
    ContextRelationship,
    PipelineConfig,
    Relation,
    TargetSchema,
    Value,
)
from .profiler import ForeignKeyCandidate
from .strings import jaccard


class MappingError(Exception):
    pass


Join = tuple[AttributeRef, AttributeRef]


@dataclass(frozen=True)
class SourceCluster:
    members: frozenset[str]
    joins: frozenset[ForeignKeyCandidate] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        object.__setattr__(self, "joins", frozenset(self.joins))

    def edges(self) -> list[Join]:
        """Distinct directed join edges (referencing side first)."""
        return sorted({(fk.source, fk.target) for fk in self.joins})

    def anchors(self) -> list[str]:
        """Members whose rows populate the target.

        Pure lookups, i.e. relations only ever referenced by foreign keys, are
        reached through joins and never anchor a mapping of their own.
        """
        referencing = {fk.source.relation for fk in self.joins}
        if not referencing:
            return sorted(self.members)
        return sorted(referencing)

    @property
    def label(self) -> str:
        return "+".join(sorted(self.members))


@dataclass(frozen=True)
class MappingCandidate:
    cluster: SourceCluster
    table: str
    anchor: str
    join_plan: tuple[Join, ...]
    projection: tuple[tuple[str, AttributeRef], ...]
    threshold_used: float
    verification_score: float | None = None
    satisfied: int = field(default=0, compare=False)

    @property
    def members(self) -> list[str]:
        out = [self.anchor]
        for _, right in self.join_plan:
            if right.relation not in out:
                out.append(right.relation)
        return out

    @property
    def projection_map(self) -> dict[str, AttributeRef]:
        return dict(self.projection)

    def coherent_joins(self) -> int:
        """Joins whose referencing attribute populates the FK's shared target attribute."""
        proj = self.projection_map
        return sum(
            any(
                fk.source == left and fk.target == right and proj.get(fk.shared.attribute) in (left, right)
                for fk in self.cluster.joins
            )
            for left, right in self.join_plan
        )

    def sort_key(self) -> tuple:
        return (
            self.table, self.anchor, len(self.join_plan), -self.coherent_joins(),
            self.join_plan, self.projection,
        )

    def to_tgd(self, target: TargetSchema, sources: Mapping[str, Relation] | None = None) -> str:
        """Readable st-tgd text, e.g. ``Z(x1, x2) ∧ D(x2, x3) → ∃ y1: P(x1, y1, x3)``."""
        parent: dict[AttributeRef, AttributeRef] = {}

        def find(r):
            while parent.get(r, r) != r:
                r = parent[r]
            return r

        for left, right in self.join_plan:
            a, b = find(left), find(right)
            if a != b:
                parent[max(a, b)] = min(a, b)
        names: dict[AttributeRef, str] = {}
        body = []
        for rel_name in self.members:
            attrs = sources[rel_name].attributes if sources else sorted(
                {r.attribute for r in self._refs() if r.relation == rel_name}
            )
            args = []
            for a in attrs:
                root = find(AttributeRef(rel_name, a))
                if root not in names:
                    names[root] = f"x{len(names) + 1}"
                args.append(names[root])
            body.append(f"{rel_name}({', '.join(args)})")
        proj = self.projection_map
        head, exist = [], []
        for attr in target.table(self.table).attributes:
            if attr in proj:
                head.append(names.get(find(proj[attr]), "?"))
            else:
                exist.append(f"y{len(exist) + 1}")
                head.append(exist[-1])
        quant = f"∃ {', '.join(exist)}: " if exist else ""
        return f"{' ∧ '.join(body)} → {quant}{self.table}({', '.join(head)})"

    def _refs(self) -> list[AttributeRef]:
        refs = [r for _, r in self.projection]
        for left, right in self.join_plan:
            refs += [left, right]
        return refs


def cluster_sources(
    sources: Iterable[Relation | str], fks: Iterable[ForeignKeyCandidate]
) -> list[SourceCluster]:
    names = sorted(s if isinstance(s, str) else s.name for s in sources)
    parent = {n: n for n in names}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    fks = [fk for fk in fks if fk.source.relation in parent and fk.target.relation in parent]
    for fk in fks:
        a, b = find(fk.source.relation), find(fk.target.relation)
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict[str, set[str]] = defaultdict(set)
    for n in names:
        groups[find(n)].add(n)
    clusters = []
    for members in groups.values():
        joins = frozenset(fk for fk in fks if fk.source.relation in members)
        clusters.append(SourceCluster(frozenset(members), joins))
    return sorted(clusters, key=lambda c: sorted(c.members))


def _join_trees(root: str, edges: Sequence[Join]) -> list[tuple[Join, ...]]:
    """Every out-tree of join edges rooted at ``root`` (including the empty one)."""
    seen: set[frozenset[Join]] = set()
    out: list[tuple[Join, ...]] = []

    def grow(plan: tuple[Join, ...], rels: frozenset[str]):
        key = frozenset(plan)
        if key in seen:
            return
        seen.add(key)
        out.append(plan)
        for e in edges:
            left, right = e
            if left.relation in rels and right.relation not in rels:
                grow(plan + (e,), rels | {right.relation})

    grow((), frozenset([root]))
    return out


def _project(
    members: Sequence[str],
    matches: CorrespondenceSet,
    table: str,
    order: Sequence[str],
    exclude: frozenset[tuple[str, AttributeRef]] = frozenset(),
    anchored: frozenset[str] | None = None,
) -> tuple[tuple[str, AttributeRef], ...]:
    """Best-first one-to-one assignment of member attributes to target attributes.

    ``members[0]`` is the anchor and is assigned first. Joined members only fill
    target attributes the anchor has no correspondence for at all (``anchored``,
    computed over every threshold): joins enrich the anchor's entity, they
    never override it.
    """
    pos = {a: i for i, a in enumerate(order)}
    relevant = [
        c for c in matches.values()
        if c.source.relation in members and c.target.table == table and c.target.attribute in pos
    ]
    anchor = members[0]
    if anchored is None:
        anchored = frozenset(c.target.attribute for c in relevant if c.source.relation == anchor)
    taken_t: dict[str, AttributeRef] = {}
    taken_s: set[AttributeRef] = set()
    for phase in (True, False):
        cands = [
            c for c in relevant
            if (c.source.relation == anchor) == phase
            and (c.target.attribute, c.source) not in exclude
            and (phase or c.target.attribute not in anchored)
        ]
        cands.sort(key=lambda c: (-c.score, pos[c.target.attribute], c.source.relation, c.source.attribute))
        for c in cands:
            if c.target.attribute in taken_t or c.source in taken_s:
                continue
            taken_t[c.target.attribute] = c.source
            taken_s.add(c.source)
    return tuple((a, taken_t[a]) for a in order if a in taken_t)


def _anchored(matches: CorrespondenceSet, anchor: str, table: str, floor: float) -> frozenset[str]:
    """Target attributes the anchor itself matches above ``floor``."""
    return frozenset(
        c.target.attribute
        for c in matches.filter(floor).values()
        if c.source.relation == anchor and c.target.table == table
    )


def generate_candidates(
    cluster: SourceCluster,
    matches: CorrespondenceSet,
    threshold: float,
    target: TargetSchema,
    table: str | None = None,
    floor: float | None = None,
) -> list[MappingCandidate]:
    """FK-neglecting and FK-exploiting candidates for every anchor of ``cluster``.

    ``floor`` is the lowest threshold of the sweep; an anchor correspondence
    above it blocks joined members from supplying that target attribute.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    table = table or target.tables[0].name
    order = target.table(table).attributes
    filtered = matches.filter(threshold)
    edges = cluster.edges()
    out = []
    for anchor in cluster.anchors():
        for plan in _join_trees(anchor, edges):
            members = [anchor] + [r.relation for _, r in plan]
            projection = _project(members, filtered, table, order, anchored=_anchored(matches, anchor, table, threshold if floor is None else floor))
            if not projection:
                continue
            out.append(
                MappingCandidate(
                    cluster, table, anchor, plan, projection, threshold, satisfied=len(projection)
                )
            )
    return sorted(out, key=MappingCandidate.sort_key)


def execute_mapping(
    cand: MappingCandidate, sources: Mapping[str, Relation] | Iterable[Relation], target: TargetSchema
) -> Relation:
    if not isinstance(sources, Mapping):
        sources = {s.name: s for s in sources}

    def resolve(ref: AttributeRef) -> int:
        rel = sources.get(ref.relation)
        if rel is None or not rel.has(ref.attribute):
            raise MappingError(f"dangling attribute reference {ref}")
        return rel.index(ref.attribute)

    if cand.anchor not in sources:
        raise MappingError(f"unknown anchor relation {cand.anchor}")
    partial: list[dict[str, tuple[Value, ...]]] = [{cand.anchor: row} for row in sources[cand.anchor]]
    for left, right in cand.join_plan:
        li, ri = resolve(left), resolve(right)
        nxt = []
        if right.relation in partial[0] if partial else False:
            for p in partial:
                lv = p[left.relation][li]
                if lv is not None and lv == p[right.relation][ri]:
                    nxt.append(p)
        else:
            index: dict[str, list[tuple[Value, ...]]] = defaultdict(list)
            for row in sources[right.relation]:
                if row[ri] is not None:
                    index[row[ri]].append(row)
            for p in partial:
                lv = p[left.relation][li]
                if lv is None:
                    continue
                for row in index.get(lv, ()):
                    q = dict(p)
                    q[right.relation] = row
                    nxt.append(q)
        partial = nxt
    table = target.table(cand.table)
    getters = {attr: (ref.relation, resolve(ref)) for attr, ref in cand.projection}
    rows = []
    for p in partial:
        row = []
        for attr in table.attributes:
            g = getters.get(attr)
            row.append(p[g[0]][g[1]] if g else None)
        rows.append(tuple(row))
    return Relation(table.name, table.attributes, tuple(rows))


def verify_mapping(
    cand: MappingCandidate,
    contexts: Sequence[tuple[Relation, ContextRelationship]],
    sources: Mapping[str, Relation] | Iterable[Relation],
    target: TargetSchema,
) -> float:
    """Coverage times mean value-set Jaccard against each context, averaged over contexts.

    The result is scaled by the share of anchor tuples that survive the joins,
    so a join that silently drops source tuples does not look better than it is.
    """
    relevant = [(c, r) for c, r in contexts if r.target_table == cand.table]
    if not relevant:
        return 0.0
    out = execute_mapping(cand, sources, target)
    if not len(out):
        return 0.0
    by_name = sources if isinstance(sources, Mapping) else {r.name: r for r in sources}
    retained = min(1.0, len(out) / max(1, len(by_name[cand.anchor])))
    proj = cand.projection_map
    coverage = len(proj) / len(out.attributes)
    total = 0.0
    for ctx, rel in relevant:
        sims = []
        for c_attr, t_attr in rel.attribute_map:
            if t_attr in proj:
                sims.append(jaccard(out.distinct(t_attr), ctx.distinct(c_attr)))
        if sims:
            total += coverage * sum(sims) / len(sims)
    return retained * total / len(relevant)


def refine_projection(
    cand: MappingCandidate,
    matches: CorrespondenceSet,
    target: TargetSchema,
    score,
    floor: float | None = None,
) -> MappingCandidate:
    """Hill-climb over projections by vetoing one chosen correspondence at a time.

    Variants must still project every target attribute the current candidate
    projects, so refinement swaps sources rather than dropping or moving columns.
    ``score`` maps a candidate to its verification score; a variant replaces the
    current candidate only when it scores strictly higher.
    """
    filtered = matches.filter(cand.threshold_used)
    order = target.table(cand.table).attributes
    members = cand.members
    anchored = _anchored(matches, cand.anchor, cand.table, cand.threshold_used if floor is None else floor)
    exclude: frozenset[tuple[str, AttributeRef]] = frozenset()
    best = cand
    while True:
        step = None
        for pair in best.projection:
            veto = exclude | {pair}
            projection = _project(members, filtered, cand.table, order, veto, anchored)
            if not {a for a, _ in best.projection} <= {a for a, _ in projection}:
                continue
            variant = replace(cand, projection=projection, satisfied=len(projection))
            variant = replace(variant, verification_score=score(variant))
            if variant.verification_score > (step or best).verification_score:
                step, step_veto = variant, veto
        if step is None:
            return best
        best, exclude = step, step_veto


def select_mappings(
    clusters: Sequence[SourceCluster],
    matches: CorrespondenceSet,
    contexts: Sequence[tuple[Relation, ContextRelationship]],
    sources: Mapping[str, Relation] | Iterable[Relation],
    target: TargetSchema,
    cfg: PipelineConfig = PipelineConfig(),
) -> list[MappingCandidate]:
    """Sweep the match threshold downwards and keep the best candidate per anchor."""
    if not isinstance(sources, Mapping):
        sources = {s.name: s for s in sources}
    memo: dict[tuple, float] = {}

    def score(c: MappingCandidate) -> float:
        key = (c.table, c.anchor, c.join_plan, c.projection)
        if key not in memo:
            memo[key] = verify_mapping(c, contexts, sources, target)
        return memo[key]

    chosen = []
    for cluster in clusters:
        for table in target.tables:
            best: dict[str, MappingCandidate] = {}
            for t in cfg.thresholds():
                for cand in generate_candidates(cluster, matches, t, target, table.name):
                    cur = best.get(cand.anchor)
                    if contexts:
                        cand = replace(cand, verification_score=score(cand))
                        cand = refine_projection(cand, matches, target, score)
                        if cur is None or _beats(cand, cur):
                            best[cand.anchor] = cand
                    elif cur is None or _no_context_key(cand) < _no_context_key(cur):
                        best[cand.anchor] = cand
            chosen.extend(best[a] for a in sorted(best))
    return chosen


def _beats(cand: MappingCandidate, cur: MappingCandidate) -> bool:
    """Strictly better score, or an equal score at the same threshold with a better
    structural key (judged on the refined projection)."""
    if cand.verification_score > cur.verification_score:
        return True
    return (
        cand.verification_score == cur.verification_score
        and cand.threshold_used == cur.threshold_used
        and cand.sort_key() < cur.sort_key()
    )


def _no_context_key(c: MappingCandidate) -> tuple:
    return (-c.satisfied, len(c.join_plan), sorted(c.members))


def run_mappings(
    selected: Sequence[MappingCandidate], sources: Mapping[str, Relation], target: TargetSchema
) -> dict[str, Relation]:
    """Execute selected mappings and union their outputs per target table."""
    rows: dict[str, list] = {t.name: [] for t in target.tables}
    for cand in selected:
        rows[cand.table].extend(execute_mapping(cand, sources, target).tuples)
    return {t.name: Relation(t.name, t.attributes, tuple(rows[t.name])) for t in target.tables}
