"""Ingest -> (train) -> answer every test question per split -> evaluate."""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .answer import AnswerFrequencyTable, answer_batch
from .classifier import QueryClassifier, TrainingConfig, train
from .concepts import ingest_annotations
from .evaluation import Prediction, SplitSpec, Taxonomy, evaluate, load_dataset, make_splits
from .kb import ingest_kb

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass
class RunConfig:
    kb: str = None
    annotations: str = None
    dataset: str = None
    taxonomy: str = None
    splits: str = None
    checkpoint: str = None
    human: str = None
    out_dir: str = "out"
    qq: str = "predicted"  # or "gt"
    k: int = 1
    n_splits: int = 5
    strict: bool = False
    seed: int = 0
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self):
        if self.qq not in ("gt", "predicted"):
            raise ValueError("qq must be 'gt' or 'predicted'")
        if self.k < 1:
            raise ValueError("k must be at least 1")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "training"}
        d["training"] = asdict(self.training)
        return d


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (OSError, ValueError, KeyError, LookupError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class PipelineResult:
    report: object
    traces: list
    predictions: list
    paths: dict


def _require(path, what):
    if not path:
        raise ValueError(f"no {what} file given")
    if not Path(path).exists():
        raise FileNotFoundError(f"{what} file not found: {path}")
    return path


def run_pipeline(config, write=True):
    """Run every stage; returns a :class:`PipelineResult`.

    Stage failures raise :class:`StageError` naming the stage.
    """
    store, kb_report = _stage("kb ingest", lambda: ingest_kb(_require(config.kb, "kb"), config.strict))
    annotations, ann_report = _stage(
        "annotations ingest",
        lambda: ingest_annotations(_require(config.annotations, "annotations"), config.strict),
    )
    dataset, data_report = _stage(
        "dataset ingest", lambda: load_dataset(_require(config.dataset, "dataset"), config.strict)
    )
    taxonomy = _stage("taxonomy ingest", lambda: Taxonomy.load(_require(config.taxonomy, "taxonomy")))
    if config.splits:
        splits = _stage("splits", lambda: SplitSpec.load(_require(config.splits, "splits")))
    else:
        splits = _stage("splits", make_splits, sorted(annotations), config.n_splits, config.seed)
    human = None
    if config.human:
        human = _stage("human answers ingest", _load_human, config.human)

    shared_clf = None
    if config.qq == "predicted" and config.checkpoint:
        shared_clf = _stage("checkpoint load", QueryClassifier.load, _require(config.checkpoint, "checkpoint"))

    outputs, traces, predictions = [], [], []
    for n, (train_ids, test_ids) in enumerate(splits.splits):
        train_set, test_set = set(train_ids), set(test_ids)
        train_rows = [qa for qa in dataset if qa.image_id in train_set]
        test_rows = [qa for qa in dataset if qa.image_id in test_set]
        freq = AnswerFrequencyTable(qa.answer for qa in train_rows)
        clf = shared_clf
        if config.qq == "predicted" and clf is None:
            clf = _stage(
                f"training (split {n})",
                train,
                [(qa.question, qa.query_type) for qa in train_rows],
                config.training,
            )
        items = [
            (qa.question, qa.image_id, qa.query_type if config.qq == "gt" else None) for qa in test_rows
        ]
        results = _stage(f"answering (split {n})", answer_batch, items, store, annotations, freq, clf, config.k)
        split_out = {}
        for qa, res in zip(test_rows, results):
            split_out[qa.question_id] = [Prediction(c.answer, c.supporting_fact) for c in res.candidates]
            for c in res.candidates:
                if c.supporting_fact not in store:
                    raise AssertionError(f"candidate fact {c.supporting_fact} is not in the KB")
            traces.append(_trace(n, qa, res))
            predictions.append(
                {"split": n, "question_id": qa.question_id, "candidates": [c.to_dict() for c in res.candidates]}
            )
        outputs.append(split_out)

    report = _stage("evaluation", evaluate, outputs, dataset, taxonomy, splits, human)
    report.meta = {
        "seed": config.seed,
        "qq": config.qq,
        "k": config.k,
        "ingest": {
            "kb": {"ingested": kb_report.ingested, "skipped": kb_report.skipped},
            "annotations": {"ingested": ann_report.ingested, "skipped": ann_report.skipped},
            "dataset": {"ingested": data_report.ingested, "skipped": data_report.skipped},
        },
    }
    paths = {}
    if write:
        paths = _stage("writing outputs", _write_outputs, config, report, traces, predictions, splits)
    return PipelineResult(report, traces, predictions, paths)


def _load_human(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[str(rec["question_id"])] = rec["answer"]
    return out


def _trace(split, qa, res):
    chosen = res.candidates[0] if res.candidates else None
    return {
        "split": split,
        "question_id": qa.question_id,
        "image_id": qa.image_id,
        "question": qa.question,
        "predicted_query_types": [
            {"query_type": str(qt), "probability": p} for qt, p in res.query_types
        ],
        "queried_facts": [t.to_dict() for t in res.queried_facts],
        "chosen_fact": chosen.supporting_fact.to_dict() if chosen else None,
        "answer": chosen.answer if chosen else None,
        "status": res.status,
    }


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def _write_outputs(config, report, traces, predictions, splits):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "table": out / "report.txt",
        "trace": out / "trace.jsonl",
        "predictions": out / "predictions.jsonl",
        "splits": out / "splits.json",
        "manifest": out / "manifest.json",
    }
    report.save(paths["report"])
    paths["table"].write_text(report.to_text(), encoding="utf-8")
    _write_jsonl(paths["trace"], traces)
    _write_jsonl(paths["predictions"], predictions)
    splits.save(paths["splits"])
    manifest = {"seed": config.seed, "config": config.to_dict(), "files": {k: p.name for k, p in paths.items()}}
    paths["manifest"].write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return paths
