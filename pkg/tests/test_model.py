import pytest

from wrangle.model import (
    ContextRelationship,
    ContextType,
    ModelError,
    PipelineConfig,
    Relation,
    TargetSchema,
    TargetTable,
    normalize_cell,
    normalize_name,
    validate_relationship,
)

TARGET = TargetSchema([TargetTable("property", ["street", "city", "postcode"])])
ADDRESS = Relation(
    "address",
    ["pao", "street.name", "town.name", "postcode.name"],
    [("9", "Canton Street", "London", "E14 6JW")],
)


def test_dash_is_null_by_default():
    assert normalize_cell("-") is None


def test_clean_value_unchanged():
    assert normalize_cell("London") == "London"


def test_whitespace_trimmed_and_collapsed():
    assert normalize_cell("  Canton   St ") == "Canton St"


def test_custom_null_tokens():
    assert normalize_cell("n/a", {"n/a"}) is None
    assert normalize_cell("-", {"n/a"}) == "-"


def test_names_normalized():
    assert normalize_name("  Street.Name ") == "street.name"


def test_ragged_tuple_rejected():
    with pytest.raises(ModelError):
        Relation("r", ["a", "b"], [("1",)])


def test_duplicate_attribute_rejected():
    with pytest.raises(ModelError):
        Relation("r", ["A", "a "], [])


def test_relation_accessors():
    r = Relation("r", ["a", "b"], [("1", None), ("2", "x"), ("1", "x")])
    assert r.column("a") == ["1", "2", "1"]
    assert r.distinct("b") == ["x"]
    assert r.records()[1] == {"a": "2", "b": "x"}
    assert len(r.with_tuples([("3", "y")])) == 1


def _addr_rel(amap):
    return ContextRelationship("address", "property", amap, ContextType.REFERENCE)


def test_address_relationship_valid():
    rel = _addr_rel({"street.name": "street", "town.name": "city", "postcode.name": "postcode"}.items())
    assert validate_relationship(rel, [ADDRESS], TARGET) == []


def test_misspelt_target_attribute_reported():
    rel = _addr_rel([("street.name", "streat")])
    problems = validate_relationship(rel, [ADDRESS], TARGET)
    assert any("streat" in p for p in problems)


def test_injectivity_violation_reported():
    rel = _addr_rel([("street.name", "street"), ("pao", "street")])
    problems = validate_relationship(rel, [ADDRESS], TARGET)
    assert any("mapped from both" in p for p in problems)


def test_empty_map_reported():
    assert validate_relationship(_addr_rel([]), [ADDRESS], TARGET)


def test_context_priority_order():
    assert ContextType.REFERENCE.priority < ContextType.MASTER.priority < ContextType.EXAMPLE.priority


def test_threshold_sweep_descends_inclusively():
    ts = PipelineConfig().thresholds()
    assert ts[0] == 0.9 and ts[-1] == 0.1 and len(ts) == 9
    assert PipelineConfig(map_lb=0.4, map_ub=0.4).thresholds() == [0.4]


def test_initial_support():
    cfg = PipelineConfig()
    assert cfg.initial_support(20) == 5
    assert cfg.initial_support(1000) == 50


@pytest.mark.parametrize("kw", [{"match_lb": 0.9, "match_ub": 0.5}, {"kfolds": 1}, {"map_step": 0}])
def test_bad_parameters_rejected(kw):
    with pytest.raises(ModelError):
        PipelineConfig(**kw)


def test_target_schema_rejects_duplicates():
    with pytest.raises(ModelError):
        TargetSchema([TargetTable("p", ["a", "a"])])
