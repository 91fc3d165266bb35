import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import Obj, Scene, concept, obj, random_annotation, random_triples, write_jsonl
from factqa.concepts import ImageAnnotation, VisualConceptKind
from factqa.kb import (
    DataError,
    EntityId,
    FrozenStoreError,
    Predicate,
    PredicateKind,
    Source,
    Triple,
    TripleStore,
    canonical,
    ingest_kb,
    query_vc,
    write_kb,
)


def rec(s, p, o, src="ConceptNet"):
    return {"subject": s, "predicate": p, "object": o, "source": src}


def test_thirteen_kinds():
    assert len(PredicateKind) == 13


@pytest.mark.parametrize("raw", ["Slower", "Bigger", "fasterThan"])
def test_webchild_relations_collapse_to_comparative(raw):
    p = Predicate.parse(raw, Source.WebChild)
    assert p.kind is PredicateKind.Comparative
    assert p.raw == raw


def test_non_comparative_raw_equals_kind():
    for kind in PredicateKind:
        if kind is not PredicateKind.Comparative:
            assert Predicate.parse(kind.value.lower(), Source.ConceptNet).raw == kind.value


def test_unknown_conceptnet_predicate_rejected():
    with pytest.raises(ValueError):
        Predicate.parse("Slower", Source.ConceptNet)


def test_canonical_forms():
    assert canonical("ClimbingTrees") == "climbing trees"
    assert canonical("climbing_trees") == "climbing trees"
    assert canonical("  Climbing   Trees ") == "climbing trees"
    assert canonical("VideoGameConsole") == "video game console"
    assert EntityId.of("ClimbingTrees") == EntityId.of("climbing trees")


@given(st.text(max_size=40))
def test_canonical_idempotent(text):
    assert canonical(canonical(text)) == canonical(text)


def test_ingest_single_record(tmp_path):
    path = write_jsonl(tmp_path / "kb.jsonl", [rec("Wii", "Category", "VideoGameConsole", "DBpedia")])
    store, report = ingest_kb(path)
    assert len(store) == 1
    assert report.ingested == 1 and report.skipped == 0
    (t,) = store
    assert t.key == ("wii", "Category", "video game console")


def test_ingest_empty_file(tmp_path):
    path = write_jsonl(tmp_path / "kb.jsonl", [])
    store, report = ingest_kb(path)
    assert len(store) == 0 and report.ingested == 0


def test_ingest_duplicate_collapses(tmp_path):
    r = rec("Cat", "CapableOf", "ClimbingTrees")
    store, report = ingest_kb(write_jsonl(tmp_path / "kb.jsonl", [r, r]))
    assert len(store) == 1
    assert report.skipped == 1


def test_duplicate_keeps_first_source(tmp_path):
    store, _ = ingest_kb(
        write_jsonl(tmp_path / "kb.jsonl", [rec("a", "IsA", "b", "ConceptNet"), rec("a", "IsA", "b", "DBpedia")])
    )
    assert next(iter(store)).source is Source.ConceptNet


def test_malformed_records_skip_or_abort(tmp_path):
    lines = [rec("a", "IsA", "b"), "{not json", {"subject": "x"}, rec("c", "Wibble", "d"), rec("e", "HasA", "f")]
    path = write_jsonl(tmp_path / "kb.jsonl", lines)
    store, report = ingest_kb(path)
    assert len(store) == 2
    assert [line for line, _ in report.errors] == [2, 3, 4]
    with pytest.raises(DataError) as info:
        ingest_kb(path, strict=True)
    assert info.value.line == 2


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_kb(tmp_path / "absent.jsonl")


def test_write_round_trip(tmp_path):
    triples = random_triples(np.random.default_rng(3), 200)
    store = TripleStore(triples)
    write_kb(store, tmp_path / "kb.jsonl")
    again, _ = ingest_kb(tmp_path / "kb.jsonl")
    assert set(again) == set(store)


@given(st.permutations(list(range(60))))
@settings(max_examples=25)
def test_ingestion_order_insensitive(order):
    triples = random_triples(np.random.default_rng(0), 60, n_entities=10)
    a = TripleStore(triples)
    b = TripleStore([triples[n] for n in order])
    assert set(a) == set(b)


def test_lookup_examples():
    store = TripleStore(
        [
            Triple.make("Cat", "CapableOf", "ClimbingTrees", "ConceptNet"),
            Triple.make("Cat", "IsA", "Pet", "ConceptNet"),
            Triple.make("Horse", "Slower", "Car", "WebChild"),
            Triple.make("Elephant", "Bigger", "Dog", "WebChild"),
        ]
    )
    assert store.lookup(subject="cat", predicate=PredicateKind.CapableOf) == {
        Triple.make("Cat", "CapableOf", "ClimbingTrees", "ConceptNet")
    }
    assert store.lookup(subject="unicorn") == set()
    comparative = store.lookup(predicate=PredicateKind.Comparative)
    assert {t.predicate.raw for t in comparative} == {"Slower", "Bigger"}
    with pytest.raises(ValueError):
        store.lookup()


def test_frozen_store_rejects_inserts():
    store = TripleStore().freeze()
    with pytest.raises(FrozenStoreError):
        store.add(Triple.make("a", "IsA", "b", "ConceptNet"))


def test_index_equals_scan_randomized():
    rng = np.random.default_rng(11)
    store = TripleStore(random_triples(rng, 2000, n_entities=100))
    kinds = list(PredicateKind)
    for _ in range(300):
        s = f"Entity{rng.integers(100)}" if rng.random() < 0.6 else None
        p = kinds[rng.integers(len(kinds))] if rng.random() < 0.6 else None
        o = f"Entity{rng.integers(100)}" if rng.random() < 0.5 or (s is None and p is None) else None
        assert store.lookup(s, p, o) == store.scan(s, p, o)


def test_query_vc_climbing_cat(climbing_cat):
    store, anns = climbing_cat
    res = query_vc(store, anns["Img1"], PredicateKind.CapableOf, VisualConceptKind.Object)
    pairs = {(r.concept.label.canonical, r.answer.canonical) for r in res}
    assert ("cat", "climbing trees") in pairs
    assert ("horse", "climbing hills") not in pairs  # no horse in the image
    assert all(r.fact in store for r in res)


def test_query_vc_no_concepts_of_kind(climbing_cat):
    store, anns = climbing_cat
    assert query_vc(store, anns["Img1"], PredicateKind.CapableOf, VisualConceptKind.Action) == []


def test_query_vc_cross_product():
    ann = ImageAnnotation("i", 100, 100, (obj("a", 0.5), obj("b", 0.5), obj("c", 0.5)))
    store = TripleStore(
        [Triple.make(x, "CapableOf", f"{x}{n}", "ConceptNet") for x in "abc" for n in range(2)]
    )
    assert len(query_vc(store, ann, PredicateKind.CapableOf, VisualConceptKind.Object)) == 6


def test_query_vc_reverse_direction():
    ann = ImageAnnotation("i", 100, 100, (concept("beach", Scene, 0.9),))
    store = TripleStore([Triple.make("Bikini", "AtLocation", "Beach", "ConceptNet")])
    (r,) = query_vc(store, ann, PredicateKind.AtLocation, VisualConceptKind.Scene)
    assert r.answer.canonical == "bikini"
    assert query_vc(store, ann, PredicateKind.AtLocation, VisualConceptKind.Scene, both_directions=False) == []


def _compositional(store, ann, rel, vc):
    out = set()
    for c in ann.concepts:
        if c.kind is vc:
            out |= {(c, t.object, t) for t in store.scan(subject=c.label, predicate=rel)}
            out |= {(c, t.subject, t) for t in store.scan(predicate=rel, object=c.label)}
    return out


def test_query_vc_matches_compositional_definition():
    rng = np.random.default_rng(5)
    store = TripleStore(random_triples(rng, 1500, n_entities=40))
    labels = [f"Entity{e}" for e in range(40)]
    kinds = list(PredicateKind)
    for n in range(50):
        ann = random_annotation(rng, labels, f"img{n}")
        rel = kinds[rng.integers(len(kinds))]
        vc = list(VisualConceptKind)[rng.integers(3)]
        got = {(r.concept, r.answer, r.fact) for r in query_vc(store, ann, rel, vc)}
        assert got == _compositional(store, ann, rel, vc)


def test_triple_dict_round_trip():
    t = Triple.make("Horse", "Slower", "Car", "WebChild")
    again = Triple.from_dict(json.loads(json.dumps(t.to_dict())))
    assert again == t and again.predicate.raw == "Slower"
