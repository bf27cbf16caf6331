import random

import pytest

from wrangle import mapper, matcher, profiler
from wrangle.config import load_config
from wrangle.mapper import MappingCandidate, SourceCluster
from wrangle.matcher import Correspondence, CorrespondenceSet
from wrangle.model import (
    AttributeRef,
    ContextRelationship,
    PipelineConfig,
    Relation,
    TargetAttr,
    TargetSchema,
    TargetTable,
)
from wrangle.pipeline import _load_all
from wrangle.profiler import ForeignKeyCandidate, InclusionDependency

A = AttributeRef


@pytest.fixture(scope="module")
def golden():
    from conftest import GOLDEN

    cfg = load_config(GOLDEN / "config.json")
    sources, contexts = _load_all(cfg)
    m = CorrespondenceSet()
    for name in sorted(sources):
        m = matcher.combine(m, matcher.match(sources[name], cfg.target, contexts, cfg.params))
    fks = profiler.discover_foreign_keys(sources.values(), m.values(), cfg.params.match_lb)
    return cfg, sources, contexts, m, fks


def _fk(src, tgt, attr="postcode"):
    return ForeignKeyCandidate(InclusionDependency(A(*src), A(*tgt)), TargetAttr("property", attr))


# clustering

def test_golden_sources_form_one_cluster(golden):
    cfg, sources, _, _, fks = golden
    assert {(str(f.source), str(f.target)) for f in fks} >= {
        ("zoopla.n_th_of_type", "deprivation.postcode"),
        ("belvoir.lst_details_h1", "deprivation.postcode"),
    }
    clusters = mapper.cluster_sources(sources.values(), fks)
    assert [c.members for c in clusters] == [frozenset({"zoopla", "belvoir", "deprivation"})]


def test_no_fks_singletons():
    rels = [Relation(n, ["a"], []) for n in "xyz"]
    assert [sorted(c.members) for c in mapper.cluster_sources(rels, [])] == [["x"], ["y"], ["z"]]


def test_clusters_match_component_oracle():
    rng = random.Random(0)
    for _ in range(30):
        names = [f"r{i}" for i in range(rng.randint(1, 7))]
        rels = [Relation(n, ["a", "b"], []) for n in names]
        fks = {_fk((rng.choice(names), "a"), (rng.choice(names), "b")) for _ in range(rng.randint(0, 6))}
        adj = {n: set() for n in names}
        for f in fks:
            adj[f.source.relation].add(f.target.relation)
            adj[f.target.relation].add(f.source.relation)
        comps, seen = set(), set()
        for n in names:
            if n in seen:
                continue
            stack, comp = [n], set()
            while stack:
                x = stack.pop()
                if x not in comp:
                    comp.add(x)
                    stack.extend(adj[x])
            seen |= comp
            comps.add(frozenset(comp))
        assert {c.members for c in mapper.cluster_sources(rels, fks)} == comps


# candidate generation

def _zd(golden):
    cfg, sources, contexts, m, fks = golden
    zfk = [f for f in fks if f.source.relation == "zoopla"]
    cluster = SourceCluster({"zoopla", "deprivation"}, zfk)
    return cfg, sources, contexts, m, cluster


HAND_MATCHES = {
    "street": "zoopla.heading_h1", "city": "zoopla.h2_nth_of_type_1", "postcode": "zoopla.n_th_of_type",
    "price": "zoopla.h2_nth_of_type_2", "agency": "zoopla.details_box_8", "contact": "zoopla.details_box_6",
    "crimestats": "deprivation.crimerank",
}


def _hand_matches():
    """Hand alignment of the Zoopla listing with the target, plus the deprivation postcode."""
    pairs = list(HAND_MATCHES.items()) + [("postcode", "deprivation.postcode")]
    return CorrespondenceSet(
        Correspondence(A(*src.split(".")), TargetAttr("property", t), 0.9, {"schema"}) for t, src in pairs
    )


def test_listing_lookup_join_candidate(golden):
    cfg, sources, _, _, cluster = _zd(golden)
    m = _hand_matches()
    cands = mapper.generate_candidates(cluster, m, 0.5, cfg.target)
    joined = [c for c in cands if c.join_plan]
    assert len(joined) == 1
    assert {t: str(s) for t, s in joined[0].projection} == HAND_MATCHES
    assert joined[0].to_tgd(cfg.target, sources) == (
        "zoopla(x1, x2, x3, x4, x5, x6) ∧ deprivation(x3, x7, x8, x9) → property(x1, x2, x3, x4, x5, x6, x8)"
    )


def test_fk_neglecting_variant_lacks_crimestats(golden):
    cfg, _, _, _, cluster = _zd(golden)
    m = _hand_matches()
    single = [c for c in mapper.generate_candidates(cluster, m, 0.5, cfg.target) if not c.join_plan]
    assert len(single) == 1 and single[0].members == ["zoopla"]
    assert "crimestats" not in single[0].projection_map


def test_threshold_one_gives_nothing(golden):
    cfg, _, _, m, cluster = _zd(golden)
    assert mapper.generate_candidates(cluster, m, 1.0, cfg.target) == []


def test_threshold_out_of_range(golden):
    cfg, _, _, m, cluster = _zd(golden)
    with pytest.raises(ValueError):
        mapper.generate_candidates(cluster, m, 1.5, cfg.target)


# execution

def test_listing_lookup_join_execution(golden):
    cfg, sources, _, _, cluster = _zd(golden)
    m = _hand_matches()
    cand = [c for c in mapper.generate_candidates(cluster, m, 0.5, cfg.target) if c.join_plan][0]
    out = mapper.execute_mapping(cand, sources, cfg.target)
    dep = dict((r[0], r[2]) for r in sources["deprivation"].tuples)
    zoo = sources["zoopla"]
    expected = [dep[pc] for pc in zoo.column("n_th_of_type") if pc in dep]
    assert out.column("crimestats") == expected and len(out) == 2


def test_singleton_rearranges_columns():
    target = TargetSchema([TargetTable("p", ["x", "y"])])
    src = Relation("s", ["b", "a"], [("1", "2")])
    cand = MappingCandidate(SourceCluster({"s"}), "p", "s", (), (("x", A("s", "a")), ("y", A("s", "b"))), 0.5)
    assert mapper.execute_mapping(cand, [src], target).tuples == (("2", "1"),)


def test_join_without_matching_keys_is_empty():
    target = TargetSchema([TargetTable("p", ["x", "y"])])
    s = Relation("s", ["k", "v"], [("1", "a")])
    t = Relation("t", ["k", "w"], [("2", "b")])
    fk = _fk(("s", "k"), ("t", "k"), "x")
    cand = MappingCandidate(SourceCluster({"s", "t"}, {fk}), "p", "s", ((fk.source, fk.target),),
                            (("x", A("s", "v")), ("y", A("t", "w"))), 0.5)
    assert len(mapper.execute_mapping(cand, [s, t], target)) == 0


def test_null_join_keys_never_match():
    target = TargetSchema([TargetTable("p", ["x"])])
    s = Relation("s", ["k"], [(None,)])
    t = Relation("t", ["k", "w"], [(None, "b")])
    fk = _fk(("s", "k"), ("t", "k"), "x")
    cand = MappingCandidate(SourceCluster({"s", "t"}, {fk}), "p", "s", ((fk.source, fk.target),),
                            (("x", A("t", "w")),), 0.5)
    assert len(mapper.execute_mapping(cand, [s, t], target)) == 0


# verification

def test_listing_lookup_join_beats_deprivation_alone(golden):
    cfg, sources, contexts, _, cluster = _zd(golden)
    m = _hand_matches()
    # the original deprivation sample only holds rows for the two Zoopla postcodes
    sources = dict(sources)
    dep = sources["deprivation"]
    sources["deprivation"] = dep.with_tuples(r for r in dep.tuples if r[0] in sources["zoopla"].column("n_th_of_type"))
    cand = [c for c in mapper.generate_candidates(cluster, m, 0.5, cfg.target) if c.join_plan][0]
    address = [(c, r) for c, r in contexts if c.name == "address"]
    dep_only = MappingCandidate(SourceCluster({"deprivation"}), "property", "deprivation", (),
                                (("postcode", A("deprivation", "postcode")),
                                 ("crimestats", A("deprivation", "crimerank"))), 0.5)
    eq1 = mapper.verify_mapping(cand, address, sources, cfg.target)
    assert eq1 > 0
    assert eq1 > mapper.verify_mapping(dep_only, address, sources, cfg.target)


def test_nothing_in_common_scores_zero():
    target = TargetSchema([TargetTable("p", ["x", "y"])])
    src = Relation("s", ["a"], [("1",)])
    ctx = Relation("c", ["q"], [("9",)])
    rel = ContextRelationship("c", "p", [("q", "y")], "reference")
    cand = MappingCandidate(SourceCluster({"s"}), "p", "s", (), (("x", A("s", "a")),), 0.5)
    assert mapper.verify_mapping(cand, [(ctx, rel)], [src], target) == 0.0


def test_identical_context_scores_one():
    target = TargetSchema([TargetTable("p", ["x", "y"])])
    src = Relation("s", ["a", "b"], [("1", "2"), ("3", "4")])
    ctx = Relation("c", ["q", "r"], [("3", "4"), ("1", "2")])
    rel = ContextRelationship("c", "p", [("q", "x"), ("r", "y")], "master")
    cand = MappingCandidate(SourceCluster({"s"}), "p", "s", (), (("x", A("s", "a")), ("y", A("s", "b"))), 0.5)
    assert mapper.verify_mapping(cand, [(ctx, rel)], [src], target) == 1.0


# selection

def test_selection_picks_listing_lookup_join(golden):
    cfg, sources, contexts, m, fks = golden
    clusters = mapper.cluster_sources(sources.values(), fks)
    chosen = mapper.select_mappings(clusters, m, contexts, sources, cfg.target, cfg.params)
    by_anchor = {c.anchor: c for c in chosen}
    assert set(by_anchor) == {"zoopla", "belvoir"}
    z = by_anchor["zoopla"]
    assert z.join_plan == ((A("zoopla", "n_th_of_type"), A("deprivation", "postcode")),)
    assert {t: str(s) for t, s in z.projection} == HAND_MATCHES
    b = by_anchor["belvoir"]
    assert b.join_plan == ((A("belvoir", "lst_details_h1"), A("deprivation", "postcode")),)


def test_no_context_prefers_more_correspondences():
    target = TargetSchema([TargetTable("p", ["a", "b", "c", "d", "e", "f"])])
    six = Relation("six", list("abcdef"), [])
    four = Relation("four", list("abcd"), [])
    corr = [Correspondence(A(r.name, x), TargetAttr("p", x), 0.95, {"schema"}) for r in (six, four) for x in r.attributes]
    fk = _fk(("six", "a"), ("four", "a"), "a")
    cluster = SourceCluster({"six", "four"}, {fk})
    chosen = mapper.select_mappings([cluster], CorrespondenceSet(corr), [], [six, four], target, PipelineConfig())
    assert len(chosen) == 1 and chosen[0].satisfied == 6 and chosen[0].anchor == "six"


def test_degenerate_sweep_equals_single_pass(golden):
    cfg, sources, contexts, m, cluster = _zd(golden)
    one = PipelineConfig(map_lb=0.5, map_ub=0.5)
    chosen = mapper.select_mappings([cluster], m, contexts, sources, cfg.target, one)
    scored = []
    for c in mapper.generate_candidates(cluster, m, 0.5, cfg.target):
        c = c.__class__(**{**c.__dict__, "verification_score": mapper.verify_mapping(c, contexts, sources, cfg.target)})
        scored.append(mapper.refine_projection(c, m, cfg.target,
                                               lambda x: mapper.verify_mapping(x, contexts, sources, cfg.target)))
    best = max(s.verification_score for s in scored)
    assert [c.threshold_used for c in chosen] == [0.5]
    assert chosen[0].verification_score == best


def test_run_mappings_unions_per_table(golden):
    cfg, sources, contexts, m, fks = golden
    clusters = mapper.cluster_sources(sources.values(), fks)
    chosen = mapper.select_mappings(clusters, m, contexts, sources, cfg.target, cfg.params)
    tables = mapper.run_mappings(chosen, sources, cfg.target)
    assert list(tables) == ["property"] and len(tables["property"]) == 4
