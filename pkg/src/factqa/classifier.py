"""Question -> query-type classifier built on :mod:`factqa.lstm`.

A query type is the triple (predicate kind, visual concept kind, answer
source). The label space is the registry of types observed in training
data, kept in sorted order so the class index of a type never depends on
the order questions were read in.
"""

import enum
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import lstm
from .concepts import VisualConceptKind
from .kb import PredicateKind
from .text import tokenize

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class AnswerSource(str, enum.Enum):
    Image = "Image"
    KB = "KB"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name):
        for s in cls:
            if s.value.lower() == str(name).strip().lower():
                return s
        raise ValueError(f"unknown answer source {name!r}")


@dataclass(frozen=True, order=True)
class QueryType:
    rel: PredicateKind
    vc: VisualConceptKind
    answer_source: AnswerSource

    @classmethod
    def parse(cls, text):
        """``"CapableOf,Object,Image"`` -> QueryType (field order rel, vc, answer source)."""
        parts = [p.strip() for p in text.strip("() ").split(",")]
        if len(parts) != 3:
            raise ValueError(f"query type needs REL,VC,AS: {text!r}")
        return cls(PredicateKind(parts[0]), VisualConceptKind.parse(parts[1]), AnswerSource.parse(parts[2]))

    @classmethod
    def from_dict(cls, d):
        return cls(PredicateKind(d["rel"]), VisualConceptKind.parse(d["vc"]), AnswerSource.parse(d["answer_source"]))

    def to_dict(self):
        return {"rel": self.rel.value, "vc": self.vc.value, "answer_source": self.answer_source.value}

    def __str__(self):
        return f"({self.rel},{self.vc},{self.answer_source})"


def _qt(rel, as_, vc):
    return QueryType(PredicateKind(rel), VisualConceptKind(vc), AnswerSource(as_))


# Rows of the reference query-type table, printed as (REL, AS, VC), in
# reference order. (AtLocation, KB, Scene) is listed twice, so only 31 are
# distinct.
REFERENCE_QUERY_TYPES = tuple(
    _qt(*row)
    for row in [
        ("Category", "Image", "Object"),
        ("IsA", "Image", "Object"),
        ("RelatedTo", "Image", "Object"),
        ("UsedFor", "Image", "Object"),
        ("CapableOf", "Image", "Object"),
        ("HasA", "Image", "Object"),
        ("HasProperty", "Image", "Object"),
        ("Comparative", "Image", "Object"),
        ("AtLocation", "Image", "Object"),
        ("AtLocation", "KB", "Scene"),
        ("UsedFor", "KB", "Scene"),
        ("UsedFor", "KB", "Object"),
        ("Desires", "Image", "Object"),
        ("RelatedTo", "KB", "Object"),
        ("AtLocation", "KB", "Object"),
        ("HasProperty", "KB", "Scene"),
        ("Comparative", "KB", "Object"),
        ("HasA", "KB", "Object"),
        ("HasA", "KB", "Scene"),
        ("PartOf", "Image", "Object"),
        ("AtLocation", "KB", "Scene"),
        ("HasProperty", "KB", "Object"),
        ("Comparative", "KB", "Scene"),
        ("Category", "KB", "Object"),
        ("IsA", "KB", "Object"),
        ("ReceivesAction", "Image", "Object"),
        ("Comparative", "KB", "Action"),
        ("CapableOf", "KB", "Object"),
        ("ReceivesAction", "KB", "Object"),
        ("CreatedBy", "Image", "Object"),
        ("CapableOf", "KB", "Scene"),
        ("HasProperty", "KB", "Action"),
    ]
)


class Registry:
    """Sorted, deduplicated list of query types; index = class id."""

    def __init__(self, types):
        self.types = tuple(sorted(set(types)))
        self._index = {t: n for n, t in enumerate(self.types)}

    def __len__(self):
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    def __contains__(self, qt):
        return qt in self._index

    def __getitem__(self, n):
        return self.types[n]

    def __eq__(self, other):
        return isinstance(other, Registry) and self.types == other.types

    def index(self, qt):
        try:
            return self._index[qt]
        except KeyError:
            raise KeyError(f"query type {qt} not in registry") from None


UNK = "<unk>"
START = "<s>"


class Vocabulary:
    """Token -> index; 0 is UNK and 1 the start word, the rest sorted."""

    def __init__(self, tokens):
        words = sorted(set(tokens) - {UNK, START})
        self.itos = [UNK, START] + words
        self.stoi = {w: n for n, w in enumerate(self.itos)}

    @classmethod
    def build(cls, questions, min_count=1):
        counts = {}
        for q in questions:
            for t in tokenize(q):
                counts[t] = counts.get(t, 0) + 1
        return cls(t for t, n in counts.items() if n >= min_count)

    def __len__(self):
        return len(self.itos)

    def encode(self, tokens):
        """Index sequence with the start word prepended."""
        return [1] + [self.stoi.get(t, 0) for t in tokens]


@dataclass
class TrainingConfig:
    batch_size: int = 100
    learning_rate: float = 0.001
    clip: float = 10.0
    dropout: float = 0.5
    epochs: int = 50
    l2: float = 1e-6
    seed: int = 0
    embed_dim: int = 128
    hidden_dim: int = 128
    optimizer: str = "adam"

    def __post_init__(self):
        for name in ("batch_size", "learning_rate", "clip", "epochs", "embed_dim", "hidden_dim"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training option(s): {', '.join(sorted(unknown))}")
        types = {k: type(getattr(cls(), k)) for k in known}
        return cls(**{k: types[k](v) for k, v in d.items()})


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, p in params.items():
            g = getattr(grads, k)
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, p in params.items():
            p -= self.lr * getattr(grads, k)


def fit(sequences, labels, n_classes, vocab_size, config, features=None):
    """Minibatch training of an LSTM classifier on index sequences.

    Returns ``(params, losses)`` where ``losses`` is the mean training loss
    of each epoch. Deterministic for a given ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    feature_dim = 0 if features is None else np.asarray(features).shape[1]
    params = lstm.LstmParameters.init(
        rng, vocab_size, config.embed_dim, config.hidden_dim, n_classes, feature_dim
    )
    opt = (_Adam if config.optimizer == "adam" else _SGD)(params, config.learning_rate)
    labels = np.asarray(labels)
    features = None if features is None else np.asarray(features, dtype=float)
    N = len(sequences)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, config.batch_size):
            idx = order[start : start + config.batch_size]
            mask = None
            if config.dropout > 0:
                keep = rng.random((len(idx), config.hidden_dim)) >= config.dropout
                mask = keep / (1.0 - config.dropout)
            value, grads = lstm.loss_and_grad(
                params,
                [sequences[n] for n in idx],
                labels[idx],
                config.l2,
                None if features is None else features[idx],
                mask,
            )
            lstm.clip_by_global_norm(grads, config.clip)
            opt.step(params, grads)
            total += value * len(idx)
        losses.append(total / N)
        log.debug("epoch %d loss %.4f", epoch + 1, losses[-1])
    return params, losses


@dataclass
class QueryClassifier:
    params: lstm.LstmParameters
    vocab: Vocabulary
    registry: Registry
    losses: list = field(default_factory=list)
    config: TrainingConfig = None

    def encode(self, question):
        return self.vocab.encode(tokenize(question))

    def probabilities(self, question):
        return lstm.forward(self.params, self.encode(question))

    def probabilities_batch(self, questions):
        return lstm.forward_batch(self.params, [self.encode(q) for q in questions])

    def predict_topk(self, question, k):
        """``k`` most probable query types, descending; ties keep registry order."""
        if not 1 <= k <= len(self.registry):
            raise ValueError(f"k must be in [1, {len(self.registry)}]")
        p = self.probabilities(question)
        return _topk(p, k, self.registry)

    def predict_topk_batch(self, questions, k):
        if not 1 <= k <= len(self.registry):
            raise ValueError(f"k must be in [1, {len(self.registry)}]")
        return [_topk(p, k, self.registry) for p in self.probabilities_batch(questions)]

    def save(self, path):
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path):
        return load_checkpoint(path)


def _topk(p, k, registry):
    order = np.argsort(-p, kind="stable")[:k]
    return [(registry[n], float(p[n])) for n in order]


def train(dataset, config=None, registry=None):
    """Train on ``(question, QueryType)`` pairs."""
    config = config or TrainingConfig()
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty training set")
    registry = registry or Registry(qt for _, qt in dataset)
    outside = {qt for _, qt in dataset if qt not in registry}
    if outside:
        raise ValueError(f"labels outside registry: {', '.join(map(str, sorted(outside)))}")
    vocab = Vocabulary.build(q for q, _ in dataset)
    seqs = [vocab.encode(tokenize(q)) for q, _ in dataset]
    labels = [registry.index(qt) for _, qt in dataset]
    params, losses = fit(seqs, labels, len(registry), len(vocab), config)
    return QueryClassifier(params, vocab, registry, losses, config)


def topk_accuracy(clf, dataset, k):
    dataset = list(dataset)
    preds = clf.predict_topk_batch([q for q, _ in dataset], k)
    return sum(qt in {t for t, _ in p} for p, (_, qt) in zip(preds, dataset)) / len(dataset)


def params_to_json(params):
    return {k: v.tolist() for k, v in params.items()}


def params_from_json(d):
    return lstm.LstmParameters(**{k: np.array(d[k], dtype=float) for k in lstm.PARAM_NAMES}).check()


def save_checkpoint(clf, path):
    """JSON checkpoint; floats are written with repr so loading is exact."""
    p = clf.params
    doc = {
        "format": "factqa-lstm",
        "version": CHECKPOINT_VERSION,
        "dims": {
            "vocab": p.vocab_size,
            "embed": p.embed_dim,
            "hidden": p.hidden_dim,
            "features": p.feature_dim,
            "classes": p.n_classes,
        },
        "vocabulary": clf.vocab.itos,
        "registry": [qt.to_dict() for qt in clf.registry],
        "config": asdict(clf.config) if clf.config else None,
        "losses": clf.losses,
        "params": params_to_json(p),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "factqa-lstm" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} classifier checkpoint")
    vocab = Vocabulary(doc["vocabulary"])
    if vocab.itos != doc["vocabulary"]:
        raise ValueError(f"{path}: vocabulary is not in canonical order")
    registry = Registry(QueryType.from_dict(d) for d in doc["registry"])
    params = params_from_json(doc["params"])
    if params.n_classes != len(registry) or params.vocab_size != len(vocab):
        raise ValueError(f"{path}: parameter shapes disagree with vocabulary/registry")
    config = TrainingConfig(**doc["config"]) if doc.get("config") else None
    return QueryClassifier(params, vocab, registry, doc.get("losses", []), config)
