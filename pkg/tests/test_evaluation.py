import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factqa.evaluation import (
    BREAKDOWNS,
    KS,
    MissingOutputsError,
    Prediction,
    QAInstance,
    SplitSpec,
    Taxonomy,
    evaluate,
    fact_accuracy,
    load_dataset,
    load_predictions,
    make_splits,
    topk_accuracy,
    train_size,
    wup,
    wups_pair,
    wups_score,
    write_dataset,
)
from factqa.classifier import QueryType
from factqa.kb import DataError, Triple

TAX = Taxonomy({"entity": "", "animal": "entity", "cat": "animal", "dog": "animal", "vehicle": "entity", "car": "vehicle"})


def test_wup_examples():
    assert wup(TAX, "cat", "cat") == 1.0
    assert wup(TAX, "cat", "dog") == 2 * 2 / (3 + 3)
    assert wup(TAX, "entity", "cat") == 0.5
    with pytest.raises(KeyError):
        wup(TAX, "cat", "unicorn")


def test_wups_down_weighting():
    assert wups_pair(TAX, "cat", "dog", 0.9) == pytest.approx(0.1 * 2 / 3, abs=1e-12)
    assert wups_pair(TAX, "cat", "dog", 0.0) == pytest.approx(2 / 3, abs=1e-12)
    assert wups_pair(TAX, "Cats", "cat", 0.9) == 1.0


def test_wups_out_of_taxonomy_falls_back_to_exact():
    assert wups_pair(TAX, "unicorn", "unicorn", 0.9) == 1.0
    assert wups_pair(TAX, "unicorn", "cat", 0.0) == 0.0


def test_wups_multi_token_answers():
    # every token must be covered in both directions
    assert wups_pair(TAX, "cat dog", "cat", 0.0) == pytest.approx(2 / 3)
    assert wups_pair(TAX, "red car", "car", 0.0) == 0.0


def test_wups_whole_answer_node():
    tax = Taxonomy({"entity": "", "place": "entity", "ski slope": "place", "beach": "place"})
    assert wups_pair(tax, "ski slope", "beach", 0.0) == pytest.approx(2 * 2 / (3 + 3))


def test_topk_accuracy_examples():
    assert topk_accuracy([["cat"], ["dog"]], ["cat", "Dogs"], 1) == 1.0
    assert topk_accuracy([["dog", "cat"]], ["cat"], 1) == 0.0
    assert topk_accuracy([["dog", "cat"]], ["cat"], 3) == 1.0
    with pytest.raises(ValueError):
        topk_accuracy([], [], 1)
    with pytest.raises(ValueError):
        topk_accuracy([["a"]], ["a", "b"], 1)


def test_fact_accuracy_examples():
    f = Triple.make("Cat", "CapableOf", "ClimbingTrees", "ConceptNet")
    g = Triple.make("Cat", "IsA", "Pet", "ConceptNet")
    assert fact_accuracy([[f]], [f], 1) == 1.0
    assert fact_accuracy([[g]], [f], 1) == 0.0
    assert fact_accuracy([[g, f]], [f], 3) == 1.0


def test_wups_threshold_range():
    with pytest.raises(ValueError):
        wups_score([["cat"]], ["cat"], TAX, 1.5)


answers = st.sampled_from(["cat", "dog", "car", "vehicle", "animal", "entity", "unicorn", "cats", "red car"])


@given(st.lists(st.tuples(st.lists(answers, max_size=12), answers), min_size=1, max_size=20))
@settings(max_examples=200)
def test_metric_orderings(rows):
    preds = [p for p, _ in rows]
    gts = [g for _, g in rows]
    tops = [topk_accuracy(preds, gts, k) for k in KS]
    assert tops[0] <= tops[1] <= tops[2]
    for k in KS:
        w9 = wups_score(preds, gts, TAX, 0.9, k)
        w0 = wups_score(preds, gts, TAX, 0.0, k)
        assert topk_accuracy(preds, gts, k) <= w9 + 1e-12
        assert w9 <= w0 + 1e-12
        assert 0 <= w0 <= 1


@given(st.lists(st.tuples(answers, answers), min_size=1, max_size=10), st.floats(0, 1), st.floats(0, 1))
def test_wups_monotone_in_threshold(pairs, t1, t2):
    t1, t2 = sorted((t1, t2))
    preds = [[p] for p, _ in pairs]
    gts = [g for _, g in pairs]
    assert wups_score(preds, gts, TAX, t1) >= wups_score(preds, gts, TAX, t2) - 1e-12


def test_taxonomy_validation(tmp_path):
    with pytest.raises(ValueError):
        Taxonomy({"a": "", "b": ""})
    with pytest.raises(ValueError):
        Taxonomy({"a": "b", "b": "a", "r": ""})
    TAX.save(tmp_path / "t.tsv")
    again = Taxonomy.load(tmp_path / "t.tsv")
    assert again.parent == TAX.parent and again.depth("cat") == 3


def test_split_sizes():
    assert train_size(2190) == 1100
    assert train_size(10) == 5
    assert train_size(2) == 1
    spec = make_splits([f"img{n}" for n in range(2190)])
    assert len(spec.splits) == 5
    for tr, te in spec.splits:
        assert (len(tr), len(te)) == (1100, 1090)
    with pytest.raises(ValueError):
        make_splits(["only"])


@given(st.sets(st.integers(0, 10_000), min_size=2, max_size=80), st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=60)
def test_splits_are_exact_and_deterministic(ids, n, seed):
    ids = [f"i{x}" for x in ids]
    a = make_splits(ids, n, seed)
    b = make_splits(list(reversed(ids)), n, seed)
    assert a == b
    for tr, te in a.splits:
        assert not set(tr) & set(te)
        assert set(tr) | set(te) == set(ids)


def test_splits_differ_between_seeds_and_splits():
    ids = [f"i{n}" for n in range(100)]
    a = make_splits(ids, 2, 0)
    assert a.splits[0] != a.splits[1]
    assert make_splits(ids, 2, 1).splits[0] != a.splits[0]


def test_split_file_round_trip(tmp_path):
    spec = make_splits([f"i{n}" for n in range(20)], 3, 4)
    spec.save(tmp_path / "s.json")
    assert SplitSpec.load(tmp_path / "s.json") == spec


def test_qa_instance_invariants():
    fact = Triple.make("Cat", "CapableOf", "ClimbingTrees", "ConceptNet")
    QAInstance("q", "i", "?", "cats", fact, QueryType.parse("CapableOf,Object,Image"))
    with pytest.raises(ValueError):
        QAInstance("q", "i", "?", "dog", fact, QueryType.parse("CapableOf,Object,Image"))
    with pytest.raises(ValueError):
        QAInstance("q", "i", "?", "cat", fact, QueryType.parse("IsA,Object,Image"))


def test_dataset_round_trip_and_default_ids(tmp_path, synthetic):
    write_dataset(synthetic.dataset[:20], tmp_path / "d.jsonl")
    rows, report = load_dataset(tmp_path / "d.jsonl")
    assert rows == synthetic.dataset[:20] and report.skipped == 0
    rec = synthetic.dataset[0].to_dict()
    del rec["question_id"]
    (tmp_path / "e.jsonl").write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n{bad\n")
    rows, report = load_dataset(tmp_path / "e.jsonl")
    assert [qa.question_id for qa in rows] == ["q00000", "q00001"]
    assert report.skipped == 1
    with pytest.raises(DataError):
        load_dataset(tmp_path / "e.jsonl", strict=True)


def _perfect(rows):
    return {qa.question_id: [Prediction(qa.answer, qa.supporting_fact)] for qa in rows}


def test_evaluate_perfect_outputs(synthetic):
    rows = synthetic.dataset
    splits = make_splits({qa.image_id for qa in rows}, 5, 0)
    report = evaluate(_perfect(rows), rows, synthetic.taxonomy, splits)
    for key in ("top1", "top3", "top10", "wups0.9_top1", "wups0.0_top1", "fact_top1", "fact_top10"):
        assert report.summary[key] == {"mean": 1.0, "std": 0.0}
    for split in report.splits:
        for name in BREAKDOWNS:
            assert sum(node["count"] for node in split[name].values()) == split["count"]
    text = report.to_text()
    assert "Accuracy (%)" in text and "100.00" in text


def test_evaluate_missing_outputs_listed(synthetic):
    rows = synthetic.dataset
    splits = make_splits({qa.image_id for qa in rows}, 2, 0)
    outputs = _perfect(rows)
    dropped = sorted(outputs)[:3]
    for q in dropped:
        del outputs[q]
    with pytest.raises(MissingOutputsError) as info:
        evaluate(outputs, rows, synthetic.taxonomy, splits)
    assert set(info.value.missing) <= set(dropped)


def test_evaluate_mean_and_std_over_splits(synthetic):
    rows = synthetic.dataset
    splits = make_splits({qa.image_id for qa in rows}, 3, 0)
    # wrong on every question of one image set, right elsewhere
    bad_images = set(splits.splits[0][1][:30])
    outputs = {
        qa.question_id: [Prediction("wrong" if qa.image_id in bad_images else qa.answer)] for qa in rows
    }
    report = evaluate(outputs, rows, synthetic.taxonomy, splits)
    per = [s["top1"] for s in report.splits]
    assert report.summary["top1"]["mean"] == pytest.approx(np.mean(per))
    assert report.summary["top1"]["std"] == pytest.approx(np.std(per))
    assert report.summary["fact_top1"]["mean"] == 0.0


def test_evaluate_with_human_answers(synthetic):
    rows = synthetic.dataset
    splits = make_splits({qa.image_id for qa in rows}, 2, 0)
    human = {qa.question_id: qa.answer for qa in rows}
    report = evaluate(_perfect(rows), rows, synthetic.taxonomy, splits, human)
    assert report.mean("human", "top1") == 1.0
    assert "human" in report.to_text()


def test_load_predictions_formats(tmp_path):
    fact = Triple.make("Cat", "IsA", "Pet", "ConceptNet").to_dict()
    (tmp_path / "p.jsonl").write_text(json.dumps({"question_id": "q1", "candidates": [{"answer": "cat", "fact": fact}]}) + "\n")
    assert load_predictions(tmp_path / "p.jsonl")["q1"][0].answer == "cat"
    lines = [{"split": s, "question_id": "q1", "candidates": [{"answer": "cat"}]} for s in (0, 1)]
    (tmp_path / "s.jsonl").write_text("".join(json.dumps(x) + "\n" for x in lines))
    per_split = load_predictions(tmp_path / "s.jsonl")
    assert len(per_split) == 2 and per_split[1]["q1"][0].fact is None
    (tmp_path / "bad.jsonl").write_text('{"question_id": "q1"}\n')
    with pytest.raises(DataError):
        load_predictions(tmp_path / "bad.jsonl")
