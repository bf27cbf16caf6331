import random

import pytest

from wrangle.ingest import CsvDialect, IngestError, dumps_relation, load_relation, write_relation
from wrangle.model import Relation


def test_zoopla_fixture(golden_dir):
    r = load_relation(golden_dir / "zoopla.csv")
    assert r.name == "zoopla"
    assert len(r.attributes) == 6 and len(r) == 2


def test_header_only(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("a,b\n")
    r = load_relation(p)
    assert r.attributes == ("a", "b") and len(r) == 0


def test_ragged_row_reports_index(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c,d,e,f\n1,2,3,4,5,6\n1,2,3,4,5\n")
    with pytest.raises(IngestError, match="row 1"):
        load_relation(p)


def test_missing_file(tmp_path):
    with pytest.raises(IngestError):
        load_relation(tmp_path / "nope.csv")


def test_null_tokens_and_trimming(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("Street , City\n  9  Canton St ,-\n")
    r = load_relation(p)
    assert r.attributes == ("street", "city")
    assert r.tuples == (("9 Canton St", None),)


def test_custom_dialect(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("a;b\n'x;y';2\n")
    r = load_relation(p, CsvDialect(delimiter=";", quotechar="'"))
    assert r.tuples == (("x;y", "2"),)


def test_golden_truth_written(tmp_path, golden_dir):
    truth = load_relation(golden_dir / "property_truth.csv")
    write_relation(truth, tmp_path / "out.csv")
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert len(lines) == 5
    assert lines[0] == ",".join(truth.attributes)


def test_empty_relation_header_only():
    assert dumps_relation(Relation("r", ["a", "b"], [])) == "a,b\n"


def test_random_round_trip(tmp_path):
    rng = random.Random(3)
    alphabet = 'ab ,"\'\n;xyz£'
    for trial in range(20):
        ncol = rng.randint(1, 5)
        rows = []
        for _ in range(rng.randint(0, 8)):
            row = []
            for _ in range(ncol):
                v = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 8)))
                v = " ".join(v.split())  # already normalized
                row.append(v if v and v != "-" else "q")
            rows.append(tuple(row))
        r = Relation(f"t{trial}", [f"c{i}" for i in range(ncol)], rows)
        path = tmp_path / f"t{trial}.csv"
        write_relation(r, path)
        assert load_relation(path) == r
