"""Dataset rows, train/test splits, answer metrics and the evaluation report."""

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import AnswerSource, QueryType
from .concepts import VisualConceptKind
from .kb import DataError, IngestReport, Source, Triple, iter_jsonl
from .text import normalize_answer

log = logging.getLogger(__name__)

KS = (1, 3, 10)


@dataclass(frozen=True)
class QAInstance:
    question_id: str
    image_id: str
    question: str
    answer: str
    supporting_fact: Triple
    query_type: QueryType

    def __post_init__(self):
        if not self.answer.strip():
            raise ValueError("empty answer")
        if self.query_type.rel is not self.supporting_fact.predicate.kind:
            raise ValueError(
                f"query type {self.query_type} disagrees with fact predicate {self.supporting_fact.predicate}"
            )
        sides = {
            normalize_answer(self.supporting_fact.subject.canonical),
            normalize_answer(self.supporting_fact.object.canonical),
        }
        if normalize_answer(self.answer) not in sides:
            raise ValueError(f"answer {self.answer!r} is neither side of {self.supporting_fact}")

    def to_dict(self):
        return {
            "question_id": self.question_id,
            "image_id": self.image_id,
            "question": self.question,
            "answer": self.answer,
            "fact": self.supporting_fact.to_dict(),
            "query_type": self.query_type.to_dict(),
        }

    @classmethod
    def from_dict(cls, d, default_id):
        return cls(
            str(d.get("question_id", default_id)),
            str(d["image_id"]),
            d["question"],
            d["answer"],
            Triple.from_dict(d["fact"]),
            QueryType.from_dict(d["query_type"]),
        )


def load_dataset(path, strict=False):
    """Read a JSON Lines QA file; returns ``(instances, report)``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(2, "file not found", str(path))
    rows, report, seen = [], IngestReport(), set()
    for n, (lineno, record) in enumerate(iter_jsonl(path)):
        try:
            if isinstance(record, Exception):
                raise ValueError(f"invalid JSON: {record}")
            qa = QAInstance.from_dict(record, f"q{n:05d}")
            if qa.question_id in seen:
                raise ValueError(f"duplicate question_id {qa.question_id}")
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            if strict:
                raise DataError(msg, line=lineno) from None
            report.skipped += 1
            report.errors.append((lineno, msg))
            continue
        seen.add(qa.question_id)
        rows.append(qa)
        report.ingested += 1
    return rows, report


def write_dataset(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        for qa in rows:
            fh.write(json.dumps(qa.to_dict(), ensure_ascii=False) + "\n")


# -- splits -----------------------------------------------------------------

REFERENCE_IMAGES, REFERENCE_TRAIN = 2190, 1100


@dataclass
class SplitSpec:
    seed: int
    splits: list  # [(train ids, test ids)]

    def to_dict(self):
        return {
            "seed": self.seed,
            "splits": [{"train": list(tr), "test": list(te)} for tr, te in self.splits],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["seed"], [(list(s["train"]), list(s["test"])) for s in d["splits"]])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_size(n_images):
    """1100 of 2190 images, scaled proportionally (rounded half up) for other sizes."""
    n_train = math.floor(n_images * REFERENCE_TRAIN / REFERENCE_IMAGES + 0.5)
    return min(max(n_train, 1), n_images - 1)


def make_splits(image_ids, n=5, seed=0):
    ids = sorted(set(image_ids))
    if len(ids) < 2:
        raise ValueError("need at least two images to split")
    n_train = train_size(len(ids))
    splits = []
    for k in range(n):
        rng = np.random.default_rng([seed, k])
        perm = rng.permutation(len(ids))
        splits.append(
            (sorted(ids[i] for i in perm[:n_train]), sorted(ids[i] for i in perm[n_train:]))
        )
    return SplitSpec(seed, splits)


# -- taxonomy and WUPS ------------------------------------------------------


class Taxonomy:
    """Single-rooted tree given as a child -> parent map. The root has depth 1."""

    def __init__(self, parents):
        self.parent = {}
        for child, parent in parents.items():
            child = normalize_answer(child)
            self.parent[child] = normalize_answer(parent) if parent else None
        for p in list(self.parent.values()):
            if p is not None and p not in self.parent:
                self.parent[p] = None
        roots = [n for n, p in self.parent.items() if p is None]
        if len(roots) != 1:
            raise ValueError(f"taxonomy must have exactly one root, found {len(roots)}")
        self.root = roots[0]
        self._depth = {}
        for node in self.parent:
            self.depth(node)

    @classmethod
    def load(cls, path):
        parents = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                child, _, parent = line.partition("\t")
                if child in parents:
                    raise DataError(f"node {child!r} listed twice", line=lineno)
                parents[child] = parent.strip()
        return cls(parents)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for child, parent in self.parent.items():
                fh.write(f"{child}\t{parent or ''}\n")

    def __contains__(self, node):
        return node in self.parent

    def depth(self, node):
        if node in self._depth:
            return self._depth[node]
        chain = []
        cur = node
        while cur is not None and cur not in self._depth:
            if cur in chain:
                raise ValueError(f"cycle through {cur!r}")
            chain.append(cur)
            cur = self.parent[cur]
        d = 0 if cur is None else self._depth[cur]
        for n in reversed(chain):
            d += 1
            self._depth[n] = d
        return self._depth[node]

    def ancestors(self, node):
        out = []
        while node is not None:
            out.append(node)
            node = self.parent[node]
        return out

    def lca(self, a, b):
        anc = set(self.ancestors(a))
        for n in self.ancestors(b):
            if n in anc:
                return n
        raise ValueError("nodes share no ancestor")


def wup(taxonomy, a, b):
    """Wu-Palmer similarity ``2 depth(lca) / (depth(a) + depth(b))``."""
    if a not in taxonomy or b not in taxonomy:
        raise KeyError(a if a not in taxonomy else b)
    return 2 * taxonomy.depth(taxonomy.lca(a, b)) / (taxonomy.depth(a) + taxonomy.depth(b))


def _tokens(answer, taxonomy):
    norm = normalize_answer(answer)
    if norm in taxonomy:
        return [norm]
    return norm.split()


def _token_sim(taxonomy, a, b):
    if a in taxonomy and b in taxonomy:
        return wup(taxonomy, a, b)
    return 1.0 if a == b else 0.0


def wups_pair(taxonomy, pred, gt, threshold):
    """Soft match of one predicted answer against one ground-truth answer."""
    P, G = _tokens(pred, taxonomy), _tokens(gt, taxonomy)

    def cover(xs, ys):
        s = 1.0
        for x in xs:
            s *= max((_token_sim(taxonomy, x, y) for y in ys), default=0.0)
        return s

    s = min(cover(P, G), cover(G, P))
    return 0.1 * s if s < threshold else s


def _check(predictions, gts):
    if len(predictions) != len(gts):
        raise ValueError(f"{len(predictions)} predictions for {len(gts)} ground truths")
    if not gts:
        raise ValueError("empty evaluation set")


def topk_accuracy(predictions, gts, k):
    """Share of instances whose normalized answer is among the first ``k`` predictions."""
    _check(predictions, gts)
    hits = 0
    for preds, gt in zip(predictions, gts):
        g = normalize_answer(gt)
        hits += any(normalize_answer(p) == g for p in preds[:k])
    return hits / len(gts)


def wups_score(predictions, gts, taxonomy, threshold, k=1):
    """Mean WUPS, taking the best of the first ``k`` predictions per instance."""
    if not 0 <= threshold <= 1:
        raise ValueError("threshold must be in [0, 1]")
    _check(predictions, gts)
    total = 0.0
    for preds, gt in zip(predictions, gts):
        total += max((wups_pair(taxonomy, p, gt, threshold) for p in preds[:k]), default=0.0)
    return total / len(gts)


def fact_accuracy(predicted_facts, gt_facts, k):
    """Share of instances whose supporting fact is among the first ``k`` predicted facts."""
    _check(predicted_facts, gt_facts)
    return sum(gt in facts[:k] for facts, gt in zip(predicted_facts, gt_facts)) / len(gt_facts)


# -- report -----------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    answer: str
    fact: Triple = None


def load_predictions(path):
    """JSON Lines ``{question_id, split?, candidates: [{answer, fact?}, ...]}``.

    Returns one mapping ``{question_id: [Prediction]}``, or a list of them
    indexed by split when records carry a ``split`` field.
    """
    per_split = {}
    for lineno, rec in iter_jsonl(path):
        if isinstance(rec, Exception):
            raise DataError(f"invalid JSON: {rec}", line=lineno)
        try:
            out = per_split.setdefault(rec.get("split"), {})
            out[str(rec["question_id"])] = [
                Prediction(c["answer"], Triple.from_dict(c["fact"]) if c.get("fact") else None)
                for c in rec["candidates"]
            ]
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise DataError(str(exc), line=lineno) from None
    if set(per_split) <= {None}:
        return per_split.get(None, {})
    if None in per_split:
        raise DataError("predictions mix records with and without a split field")
    return [per_split.get(n, {}) for n in range(max(per_split) + 1)]


BREAKDOWNS = {
    "kb_source": (lambda qa: qa.supporting_fact.source.value, [s.value for s in Source]),
    "visual_concept": (lambda qa: qa.query_type.vc.value, [v.value for v in VisualConceptKind]),
    "answer_source": (lambda qa: qa.query_type.answer_source.value, [a.value for a in AnswerSource]),
}


class MissingOutputsError(ValueError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        shown = ", ".join(self.missing[:20]) + (" ..." if len(self.missing) > 20 else "")
        super().__init__(f"{len(self.missing)} test question(s) have no output: {shown}")


def _metrics(rows, outputs, taxonomy):
    answers = [[p.answer for p in outputs[qa.question_id]] for qa in rows]
    facts = [[p.fact for p in outputs[qa.question_id]] for qa in rows]
    gts = [qa.answer for qa in rows]
    m = {"count": len(rows)}
    for k in KS:
        m[f"top{k}"] = topk_accuracy(answers, gts, k)
        m[f"wups0.9_top{k}"] = wups_score(answers, gts, taxonomy, 0.9, k)
        m[f"wups0.0_top{k}"] = wups_score(answers, gts, taxonomy, 0.0, k)
        m[f"fact_top{k}"] = fact_accuracy(facts, [qa.supporting_fact for qa in rows], k)
    return m


def _split_metrics(rows, outputs, taxonomy, human):
    m = _metrics(rows, outputs, taxonomy)
    for name, (key, cats) in BREAKDOWNS.items():
        groups = defaultdict(list)
        for qa in rows:
            groups[key(qa)].append(qa)
        m[name] = {}
        for cat in cats:
            sub = groups.get(cat, [])
            if sub:
                answers = [[p.answer for p in outputs[qa.question_id]] for qa in sub]
                facts = [[p.fact for p in outputs[qa.question_id]] for qa in sub]
                gts = [qa.answer for qa in sub]
                node = {"count": len(sub)}
                for k in KS:
                    node[f"top{k}"] = topk_accuracy(answers, gts, k)
                    node[f"fact_top{k}"] = fact_accuracy(facts, [qa.supporting_fact for qa in sub], k)
                m[name][cat] = node
            else:
                m[name][cat] = {"count": 0}
    if human is not None:
        answers = [[human[qa.question_id]] for qa in rows]
        gts = [qa.answer for qa in rows]
        m["human"] = {
            "top1": topk_accuracy(answers, gts, 1),
            "wups0.9_top1": wups_score(answers, gts, taxonomy, 0.9),
            "wups0.0_top1": wups_score(answers, gts, taxonomy, 0.0),
        }
    return m


def _summarize(values):
    values = [v for v in values if v is not None]
    if not values:
        return None
    return {"mean": float(np.mean(values)), "std": float(np.std(values))}


def _summary_tree(per_split):
    # a category can be empty in one split and populated in another
    keys = list(dict.fromkeys(k for s in per_split for k in s))
    out = {}
    for key in keys:
        vals = [s.get(key) for s in per_split]
        if any(isinstance(v, dict) for v in vals):
            out[key] = _summary_tree([v or {} for v in vals])
        else:
            out[key] = _summarize(vals)
    return out


@dataclass
class EvalReport:
    splits: list
    summary: dict
    method: str = "ours"
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"method": self.method, "meta": self.meta, "splits": self.splits, "summary": self.summary}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    def mean(self, *path):
        node = self.summary
        for p in path:
            node = node[p]
        return node["mean"]

    def to_text(self):
        return format_report(self)


def evaluate(outputs, dataset, taxonomy, splits, human=None, method="ours"):
    """Score predictions on every split's test images.

    ``outputs`` is ``{question_id: [Prediction]}`` shared by all splits, or a
    list with one such mapping per split (a model trained per split).
    """
    dataset = list(dataset)
    if isinstance(outputs, dict):
        outputs = [outputs] * len(splits.splits)
    if len(outputs) != len(splits.splits):
        raise ValueError(f"{len(outputs)} output sets for {len(splits.splits)} splits")
    per_split = []
    for (train_ids, test_ids), split_outputs in zip(splits.splits, outputs):
        test = set(test_ids)
        rows = [qa for qa in dataset if qa.image_id in test]
        if not rows:
            raise ValueError("a split has no test questions")
        missing = [qa.question_id for qa in rows if qa.question_id not in split_outputs]
        if missing:
            raise MissingOutputsError(missing)
        if human is not None:
            gaps = [qa.question_id for qa in rows if qa.question_id not in human]
            if gaps:
                raise MissingOutputsError(gaps)
        per_split.append(_split_metrics(rows, split_outputs, taxonomy, human))
    return EvalReport(per_split, _summary_tree(per_split), method)


def _pct(node):
    if node is None:
        return "-"
    return f"{100 * node['mean']:6.2f}±{100 * node['std']:.2f}"


def format_report(report):
    s = report.summary
    lines = [f"method: {report.method}   splits: {len(report.splits)}", ""]

    def table(title, prefix):
        lines.append(f"{title:<16}{'Top-1':>14}{'Top-3':>14}{'Top-10':>14}")
        lines.append(f"{'overall':<16}" + "".join(f"{_pct(s.get(f'{prefix}top{k}')):>14}" for k in KS))
        lines.append("")

    table("Accuracy (%)", "")
    table("WUPS@0.9 (%)", "wups0.9_")
    table("WUPS@0.0 (%)", "wups0.0_")
    table("Facts (%)", "fact_")
    for name in BREAKDOWNS:
        lines.append(f"{name:<16}{'Top-1':>14}{'Top-3':>14}{'Top-10':>14}")
        for cat, node in s[name].items():
            lines.append(f"{cat:<16}" + "".join(f"{_pct(node.get(f'top{k}')):>14}" for k in KS))
        lines.append("")
    if "human" in s:
        h = s["human"]
        lines.append(f"{'human':<16}{'Top-1':>14}{'WUPS@0.9':>14}{'WUPS@0.0':>14}")
        lines.append(f"{'':<16}{_pct(h['top1']):>14}{_pct(h['wups0.9_top1']):>14}{_pct(h['wups0.0_top1']):>14}")
    return "\n".join(lines).rstrip() + "\n"
