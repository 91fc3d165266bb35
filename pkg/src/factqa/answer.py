"""Answering by querying the KB.

For each candidate query type the image-scoped KB query is run, and:

* answers from the image: every fact is scored by the Jaccard similarity of
  its KB-side words and the question keywords; the image concept of the best
  fact is the answer;
* answers from the KB: the image concept the question is about is chosen
  (top scene/action, or the object picked by location/size words) and its
  linked KB entities are the answers, most frequent training answer first.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field

from .classifier import AnswerSource
from .concepts import NoConceptError, VisualConceptKind, parse_cues, select_object, top_concept
from .kb import Triple, query_vc
from .text import keywords, normalize_answer, tokenize

log = logging.getLogger(__name__)

NO_FACT = "no supporting fact found"


def extract_keywords(question):
    return keywords(question)


def jaccard(a, b):
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


class AnswerFrequencyTable:
    """How often each (normalized) answer occurs in the training answers."""

    def __init__(self, answers=()):
        self.counts = Counter(normalize_answer(a) for a in answers if a.strip())

    def __getitem__(self, answer):
        return self.counts.get(normalize_answer(answer), 0)

    def most_common(self, n=None):
        # ties broken alphabetically for determinism
        items = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return items if n is None else items[:n]


@dataclass(frozen=True)
class AnswerCandidate:
    answer: str
    supporting_fact: Triple
    score: float
    query_type_rank: int
    source: AnswerSource
    query_type: object = None

    def to_dict(self):
        return {
            "answer": self.answer,
            "fact": self.supporting_fact.to_dict(),
            "score": self.score,
            "query_type_rank": self.query_type_rank,
            "query_type": str(self.query_type) if self.query_type else None,
            "source": self.source.value,
        }


def answer_from_image(results, question_keywords, freq, query_type_rank=1, query_type=None):
    """Rank image concepts by the best Jaccard match of their linked facts."""
    scored = []
    for r in results:
        score = jaccard(keywords(r.answer.canonical), question_keywords)
        label = r.concept.label.canonical
        scored.append(((-score, -freq[label], label, r.fact.key), score, r))
    scored.sort(key=lambda s: s[0])
    return [
        AnswerCandidate(r.concept.label.canonical, r.fact, score, query_type_rank, AnswerSource.Image, query_type)
        for _, score, r in scored
    ]


def answer_from_kb(results, annotation, cues, vc, freq, question_keywords=frozenset(), query_type_rank=1, query_type=None):
    """Answers linked to the image concept the question refers to."""
    vc = VisualConceptKind(vc)
    try:
        if vc is VisualConceptKind.Object:
            target = select_object(annotation, cues)
        else:
            target = top_concept(annotation, vc)
    except NoConceptError:
        return []
    picked = [r for r in results if r.concept == target]
    ranked = sorted(picked, key=lambda r: (-freq[r.answer.canonical], r.answer.canonical, r.fact.key))
    return [
        AnswerCandidate(
            r.answer.canonical,
            r.fact,
            jaccard(keywords(r.answer.canonical), question_keywords),
            query_type_rank,
            AnswerSource.KB,
            query_type,
        )
        for r in ranked
    ]


def merge_candidates(blocks):
    """Merge per-query-type candidate lists into one ranking.

    ``blocks`` is ``[(rank, source, candidates)]``. Image-source candidates
    of all types are pooled by score (ties: better type rank first). Each
    KB-source block keeps its own order and goes right after the last
    pooled image candidate of a better-ranked type. Repeated answers keep
    their first position only.
    """
    pooled = sorted(
        (
            (-c.score, rank, n, c)
            for rank, source, cands in blocks
            if source is AnswerSource.Image
            for n, c in enumerate(cands)
        ),
        key=lambda t: t[:3],
    )
    image = [t[3] for t in pooled]
    slots = [[] for _ in range(len(image) + 1)]
    for rank, source, cands in sorted(blocks, key=lambda b: b[0]):
        if source is not AnswerSource.KB:
            continue
        after = max((n + 1 for n, c in enumerate(image) if c.query_type_rank < rank), default=0)
        slots[after].extend(cands)
    merged = list(slots[0])
    for n, c in enumerate(image):
        merged.append(c)
        merged.extend(slots[n + 1])
    seen = set()
    out = []
    for c in merged:
        key = normalize_answer(c.answer)
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


@dataclass
class AnswerResult:
    question: str
    image_id: str
    candidates: list
    query_types: list  # [(QueryType, probability or None)]
    queried_facts: list = field(default_factory=list)
    status: str = "ok"

    def to_dict(self):
        return {
            "question": self.question,
            "image_id": self.image_id,
            "status": self.status,
            "query_types": [
                {"rank": n + 1, "query_type": str(qt), "probability": p}
                for n, (qt, p) in enumerate(self.query_types)
            ],
            "candidates": [c.to_dict() for c in self.candidates],
        }


class UnknownImageError(KeyError):
    pass


def answer(question, image_id, store, annotations, freq, classifier=None, k=1, gt_query_type=None):
    """Answer ``question`` about image ``image_id``.

    Uses ``gt_query_type`` when given, otherwise the classifier's top-``k``
    query types. Every candidate carries the fact it was derived from.
    """
    if image_id not in annotations:
        raise UnknownImageError(f"unknown image {image_id!r}")
    annotation = annotations[image_id]
    if gt_query_type is not None:
        types = [(gt_query_type, None)]
    else:
        if classifier is None:
            raise ValueError("need a classifier or a ground-truth query type")
        if k < 1:
            raise ValueError("k must be at least 1")
        types = classifier.predict_topk(question, min(k, len(classifier.registry)))
    return _answer_with_types(question, annotation, store, freq, types)


def _answer_with_types(question, annotation, store, freq, types):
    kw = extract_keywords(question)
    cues = parse_cues(tokenize(question))
    blocks = []
    queried = []
    for rank, (qt, _) in enumerate(types, 1):
        results = query_vc(store, annotation, qt.rel, qt.vc)
        queried.extend(r.fact for r in results)
        if qt.answer_source is AnswerSource.Image:
            cands = answer_from_image(results, kw, freq, rank, qt)
        else:
            cands = answer_from_kb(results, annotation, cues, qt.vc, freq, kw, rank, qt)
        blocks.append((rank, qt.answer_source, cands))
    candidates = merge_candidates(blocks)
    return AnswerResult(
        question,
        annotation.image_id,
        candidates,
        list(types),
        queried,
        "ok" if candidates else NO_FACT,
    )


def answer_batch(items, store, annotations, freq, classifier=None, k=1):
    """Answer many ``(question, image_id, gt_query_type or None)`` items.

    Classifier predictions are computed in one batched pass.
    """
    items = list(items)
    need = [n for n, (_, _, gt) in enumerate(items) if gt is None]
    predicted = {}
    if need:
        if classifier is None:
            raise ValueError("need a classifier or ground-truth query types")
        kk = min(k, len(classifier.registry))
        for n, types in zip(need, classifier.predict_topk_batch([items[n][0] for n in need], kk)):
            predicted[n] = types
    out = []
    for n, (question, image_id, gt) in enumerate(items):
        if image_id not in annotations:
            raise UnknownImageError(f"unknown image {image_id!r}")
        types = [(gt, None)] if gt is not None else predicted[n]
        out.append(_answer_with_types(question, annotations[image_id], store, freq, types))
    return out
