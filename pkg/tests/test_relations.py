import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from semedge.errors import ParseError, ValidationError
from semedge.relations import EdgeDecomposition, Relation, RelationSet, canonical_edge


def test_canonical_edge_orders_endpoints():
    assert canonical_edge(5, 2) == (2, 5)
    assert canonical_edge(2, 5) == (2, 5)


def test_relation_set_rejects_empty_and_duplicates():
    with pytest.raises(ValidationError):
        RelationSet(())
    with pytest.raises(ValidationError):
        RelationSet((Relation("Cites", "a"), Relation("cites", "b")))
    with pytest.raises(ValidationError):
        RelationSet((Relation("Cites", " "),))


def test_enumerated_listing_is_one_based():
    rs = RelationSet((Relation("A", "first"), Relation("B", "second")))
    assert rs.enumerated() == "1. A: first\n2. B: second"


def test_relation_set_json_roundtrip(tmp_path):
    rs = RelationSet((Relation("Same Lab", "co-authored"), Relation("Über", "unicode ok")))
    p = tmp_path / "r.json"
    rs.save(p)
    assert json.loads(p.read_text()) == {"relations": [{"name": "Same Lab", "description": "co-authored"},
                                                       {"name": "Über", "description": "unicode ok"}]}
    assert RelationSet.load(p) == rs


def test_relation_set_bad_json(tmp_path):
    p = tmp_path / "r.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        RelationSet.load(p)
    with pytest.raises(ParseError):
        RelationSet.from_json({"relations": [{"name": "x"}]})


def test_decomposition_assign_validates():
    d = EdgeDecomposition()
    with pytest.raises(ValidationError):
        d.assign((0, 1), [])
    with pytest.raises(ValidationError):
        d.assign((0, 1), [0], "guessed")
    d.assign((3, 1), [1, 0], "queried")
    assert d[(1, 3)] == frozenset({0, 1})
    assert (3, 1) in d and d.provenance_of((1, 3)) == "queried"
    assert d.num_relations() == 2


def test_jsonl_layout_and_order():
    d = EdgeDecomposition()
    d.assign((0, 1), [1], "pseudo")
    d.assign((2, 1), [0], None)
    text = d.to_jsonl([(1, 2), (0, 1)])
    lines = [json.loads(x) for x in text.splitlines()]
    assert lines == [{"edge": [1, 2], "relations": [0]},
                     {"edge": [0, 1], "relations": [1], "provenance": "pseudo"}]


def test_jsonl_parse_errors_carry_line():
    with pytest.raises(ParseError) as exc:
        EdgeDecomposition.from_jsonl('{"edge":[0,1],"relations":[0]}\n{"edge":[0]}\n')
    assert "line 2" in str(exc.value)


edges = st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)).filter(lambda e: e[0] != e[1]),
                 max_size=25, unique_by=lambda e: canonical_edge(*e))


@given(edges, st.data())
def test_decomposition_roundtrip(es, data):
    d = EdgeDecomposition()
    for e in es:
        rels = data.draw(st.sets(st.integers(0, 4), min_size=1))
        prov = data.draw(st.sampled_from([None, "queried", "pseudo", "baseline", "fallback"]))
        d.assign(e, rels, prov)
    back = EdgeDecomposition.from_jsonl(d.to_jsonl())
    assert back.labels == d.labels
    assert back.provenance == d.provenance
