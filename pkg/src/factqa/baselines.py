"""Answer-classification baselines: most-frequent answers and an LSTM over a fixed answer space."""

from dataclasses import dataclass, replace

import numpy as np

from . import lstm
from .answer import AnswerFrequencyTable
from .classifier import TrainingConfig, Vocabulary, fit
from .kb import DataError, iter_jsonl
from .text import normalize_answer, tokenize

ANSWER_SPACE = 500
# LSTM answer baseline: 512 memory cells, clip 5, otherwise as the query classifier.
LSTM_BASELINE_CONFIG = TrainingConfig(hidden_dim=512, clip=5.0)


class FrequentAnswerBaseline:
    """Predicts the most frequent training answers, whatever the question."""

    def __init__(self, train_rows):
        rows = list(train_rows)
        if not rows:
            raise ValueError("empty training split")
        self.table = AnswerFrequencyTable(qa.answer for qa in rows)
        self.ranked = [a for a, _ in self.table.most_common()]

    def predict(self, question=None, image_id=None, k=10):
        return self.ranked[:k]


def baseline_frequent(train_rows):
    return FrequentAnswerBaseline(train_rows)


def load_features(path):
    """JSON Lines ``{"image_id": ..., "features": [...]}`` -> {image_id: vector}."""
    feats, dim = {}, None
    for lineno, rec in iter_jsonl(path):
        if isinstance(rec, Exception):
            raise DataError(f"invalid JSON: {rec}", line=lineno)
        vec = np.asarray(rec["features"], dtype=float)
        if vec.ndim != 1:
            raise DataError("features must be a flat list", line=lineno)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DataError(f"feature dimension {vec.size}, expected {dim}", line=lineno, record_id=rec.get("image_id"))
        feats[str(rec["image_id"])] = vec
    return feats


MODES = ("question", "image", "question+image")


@dataclass
class LstmAnswerBaseline:
    params: lstm.LstmParameters
    vocab: Vocabulary
    answers: list
    features: dict
    mode: str
    losses: list

    def _inputs(self, questions, image_ids):
        if self.mode == "image":
            seqs = [[1] for _ in questions]
        else:
            seqs = [self.vocab.encode(tokenize(q)) for q in questions]
        feats = None
        if self.params.feature_dim:
            feats = np.zeros((len(questions), self.params.feature_dim))
            if self.mode != "question":
                for n, img in enumerate(image_ids):
                    if img in self.features:
                        feats[n] = self.features[img]
        return seqs, feats

    def probabilities(self, questions, image_ids):
        seqs, feats = self._inputs(questions, image_ids)
        return lstm.forward_batch(self.params, seqs, feats)

    def predict(self, question, image_id=None, k=10):
        p = self.probabilities([question], [image_id])[0]
        return [self.answers[n] for n in np.argsort(-p, kind="stable")[:k]]

    def predict_batch(self, questions, image_ids, k=10):
        probs = self.probabilities(list(questions), list(image_ids))
        return [[self.answers[n] for n in np.argsort(-p, kind="stable")[:k]] for p in probs]


def baseline_lstm_answers(train_rows, answer_space=ANSWER_SPACE, features=None, mode="question+image", config=None):
    """Classify questions (and optional image features) into the top training answers.

    ``features`` maps image ids to vectors; images without one get zeros,
    as does every image in ``"question"`` mode. ``"image"`` mode feeds only
    the start word.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rows = list(train_rows)
    if not rows:
        raise ValueError("empty training split")
    config = config or LSTM_BASELINE_CONFIG
    table = AnswerFrequencyTable(qa.answer for qa in rows)
    answers = [a for a, _ in table.most_common(min(answer_space, len(table.counts)))]
    index = {a: n for n, a in enumerate(answers)}
    rows = [qa for qa in rows if normalize_answer(qa.answer) in index]
    features = features or {}
    dims = {v.size for v in features.values()}
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
    feature_dim = dims.pop() if dims else 0

    vocab = Vocabulary.build(qa.question for qa in rows)
    if mode == "image":
        seqs = [[1] for _ in rows]
    else:
        seqs = [vocab.encode(tokenize(qa.question)) for qa in rows]
    feats = None
    if feature_dim:
        feats = np.zeros((len(rows), feature_dim))
        if mode != "question":
            for n, qa in enumerate(rows):
                if qa.image_id in features:
                    feats[n] = features[qa.image_id]
    labels = [index[normalize_answer(qa.answer)] for qa in rows]
    params, losses = fit(seqs, labels, len(answers), len(vocab), config, feats)
    return LstmAnswerBaseline(params, vocab, answers, features, mode, losses)


def with_config(**overrides):
    return replace(LSTM_BASELINE_CONFIG, **overrides)
