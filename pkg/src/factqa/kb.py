"""In-memory triple store over commonsense facts.

Facts are ``(subject, predicate, object)`` triples drawn from DBpedia,
ConceptNet and WebChild. The store keeps three hash indexes (subject,
subject+predicate kind, object) plus a predicate-kind index, and answers the
image-scoped query used by the answer engine::

    Find ?X, ?Y such that (img, Contain, ?X), (?X, VC-Type, vc), (?X, rel, ?Y)
"""

import enum
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)


class PredicateKind(str, enum.Enum):
    Category = "Category"
    RelatedTo = "RelatedTo"
    AtLocation = "AtLocation"
    IsA = "IsA"
    CapableOf = "CapableOf"
    UsedFor = "UsedFor"
    Desires = "Desires"
    HasProperty = "HasProperty"
    HasA = "HasA"
    PartOf = "PartOf"
    ReceivesAction = "ReceivesAction"
    CreatedBy = "CreatedBy"
    Comparative = "Comparative"

    def __str__(self):
        return self.value


class Source(str, enum.Enum):
    DBpedia = "DBpedia"
    ConceptNet = "ConceptNet"
    WebChild = "WebChild"

    def __str__(self):
        return self.value


_KIND_BY_LOWER = {k.value.lower(): k for k in PredicateKind}
_SOURCE_BY_LOWER = {s.value.lower(): s for s in Source}


@dataclass(frozen=True)
class Predicate:
    """Canonical predicate kind plus the raw relation it was read from.

    Every WebChild comparative (``Slower``, ``Bigger``, ...) collapses to
    kind ``Comparative`` but keeps its raw name, which is what identifies a
    fact and what an answer reports.
    """

    kind: PredicateKind
    raw: str

    @classmethod
    def parse(cls, name, source=None):
        name = name.strip()
        if not name:
            raise ValueError("empty predicate")
        kind = _KIND_BY_LOWER.get(name.lower())
        if kind is not None and kind is not PredicateKind.Comparative:
            return cls(kind, kind.value)
        if kind is PredicateKind.Comparative or source is Source.WebChild:
            return cls(PredicateKind.Comparative, name)
        raise ValueError(f"unknown predicate {name!r} for source {source}")

    def __str__(self):
        return self.raw


_CAMEL_1 = re.compile(r"([a-z0-9])([A-Z])")
_CAMEL_2 = re.compile(r"([A-Z]+)([A-Z][a-z])")
_SEPARATORS = re.compile(r"[\s_]+")


def canonical(text):
    """``ClimbingTrees`` / ``climbing_trees`` / ``Climbing  trees`` -> ``climbing trees``."""
    text = _CAMEL_2.sub(r"\1 \2", _CAMEL_1.sub(r"\1 \2", text))
    return _SEPARATORS.sub(" ", text).strip().lower()


@dataclass(frozen=True)
class EntityId:
    """A KB or visual concept name; equality is on the canonical form only."""

    canonical: str
    surface: str = field(default="", compare=False)

    @classmethod
    def of(cls, text):
        if isinstance(text, EntityId):
            return text
        return cls(canonical(text), text)

    def __str__(self):
        return self.canonical


@dataclass(frozen=True)
class Triple:
    """One fact. Identity is ``(subject, raw predicate, object)``; the source is metadata."""

    subject: EntityId
    predicate: Predicate
    object: EntityId
    source: Source = field(compare=False)

    def __post_init__(self):
        if not self.subject.canonical or not self.object.canonical:
            raise ValueError("triple with empty subject or object")

    @classmethod
    def make(cls, subject, predicate, obj, source):
        source = source if isinstance(source, Source) else parse_source(source)
        if not isinstance(predicate, Predicate):
            predicate = Predicate.parse(predicate, source)
        return cls(EntityId.of(subject), predicate, EntityId.of(obj), source)

    @property
    def key(self):
        return (self.subject.canonical, self.predicate.raw, self.object.canonical)

    def to_dict(self):
        return {
            "subject": self.subject.surface or self.subject.canonical,
            "predicate": self.predicate.raw,
            "object": self.object.surface or self.object.canonical,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, record):
        missing = [k for k in ("subject", "predicate", "object", "source") if k not in record]
        if missing:
            raise ValueError(f"missing field(s): {', '.join(missing)}")
        for k in ("subject", "predicate", "object", "source"):
            if not isinstance(record[k], str) or not record[k].strip():
                raise ValueError(f"field {k!r} must be a nonempty string")
        return cls.make(record["subject"], record["predicate"], record["object"], record["source"])

    def __str__(self):
        return f"({self.subject.surface or self.subject}, {self.predicate}, {self.object.surface or self.object})"


def parse_source(name):
    try:
        return _SOURCE_BY_LOWER[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown KB source {name!r}") from None


class FrozenStoreError(RuntimeError):
    pass


class TripleStore:
    """Build-then-freeze fact store.

    Mutation is single-threaded; once :meth:`freeze` is called the store is
    read-only and can be shared between threads.
    """

    def __init__(self, triples=()):
        self._triples = []
        self._keys = set()
        self._by_subject = defaultdict(list)
        self._by_subject_kind = defaultdict(list)
        self._by_object = defaultdict(list)
        self._by_kind = defaultdict(list)
        self.frozen = False
        for t in triples:
            self.add(t)

    def add(self, triple):
        """Insert ``triple``; returns False when its key is already present."""
        if self.frozen:
            raise FrozenStoreError("store is frozen")
        if triple.key in self._keys:
            return False
        self._keys.add(triple.key)
        self._triples.append(triple)
        s = triple.subject.canonical
        self._by_subject[s].append(triple)
        self._by_subject_kind[s, triple.predicate.kind].append(triple)
        self._by_object[triple.object.canonical].append(triple)
        self._by_kind[triple.predicate.kind].append(triple)
        return True

    def freeze(self):
        self.frozen = True
        return self

    def __len__(self):
        return len(self._triples)

    def __iter__(self):
        return iter(self._triples)

    def __contains__(self, triple):
        return triple.key in self._keys

    def triples(self):
        return list(self._triples)

    def _candidates(self, subject, kind, obj):
        if subject is not None and kind is not None:
            return self._by_subject_kind.get((subject.canonical, kind), ())
        if subject is not None:
            return self._by_subject.get(subject.canonical, ())
        if obj is not None:
            return self._by_object.get(obj.canonical, ())
        return self._by_kind.get(kind, ())

    def lookup_ordered(self, subject=None, predicate=None, object=None):
        """Like :meth:`lookup` but returns a list in insertion order."""
        if subject is None and predicate is None and object is None:
            raise ValueError("lookup needs at least one bound position")
        subject = EntityId.of(subject) if subject is not None else None
        obj = EntityId.of(object) if object is not None else None
        kind = PredicateKind(predicate) if predicate is not None else None
        return [
            t
            for t in self._candidates(subject, kind, obj)
            if (subject is None or t.subject == subject)
            and (kind is None or t.predicate.kind is kind)
            and (obj is None or t.object == obj)
        ]

    def lookup(self, subject=None, predicate=None, object=None):
        """Triples matching every bound position. ``predicate`` is a kind."""
        return set(self.lookup_ordered(subject, predicate, object))

    def scan(self, subject=None, predicate=None, object=None):
        """Linear-scan equivalent of :meth:`lookup`, no indexes involved."""
        subject = EntityId.of(subject) if subject is not None else None
        obj = EntityId.of(object) if object is not None else None
        return {
            t
            for t in self._triples
            if (subject is None or t.subject == subject)
            and (predicate is None or t.predicate.kind == predicate)
            and (obj is None or t.object == obj)
        }


@dataclass
class IngestReport:
    ingested: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)  # (line number, message)


class DataError(ValueError):
    """Malformed input record; carries the line number when known."""

    def __init__(self, message, line=None, record_id=None):
        self.line = line
        self.record_id = record_id
        where = []
        if line is not None:
            where.append(f"line {line}")
        if record_id is not None:
            where.append(f"id {record_id}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def iter_jsonl(path):
    """Yield ``(line number, parsed object or exception)`` for non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, exc


def ingest_kb(path, strict=False):
    """Read a JSON Lines fact file into a frozen :class:`TripleStore`.

    Returns ``(store, report)``. Duplicate facts keep the first occurrence
    and count as skipped. Malformed records are skipped and reported, or
    raise :class:`DataError` when ``strict``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(2, "file not found", str(path))
    store = TripleStore()
    report = IngestReport()
    for lineno, record in iter_jsonl(path):
        try:
            if isinstance(record, Exception):
                raise ValueError(f"invalid JSON: {record}")
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
            triple = Triple.from_dict(record)
        except ValueError as exc:
            if strict:
                raise DataError(str(exc), line=lineno) from None
            report.skipped += 1
            report.errors.append((lineno, str(exc)))
            log.warning("%s:%d: %s", path, lineno, exc)
            continue
        if store.add(triple):
            report.ingested += 1
        else:
            report.skipped += 1
    return store.freeze(), report


def write_kb(triples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class QueryResult:
    """One ``(?X, ?Y)`` binding and the fact that witnesses it."""

    concept: object  # VisualConceptInstance
    answer: EntityId
    fact: Triple


def query_vc(store, annotation, rel, vc, both_directions=True):
    """All ``(?X, ?Y, fact)`` with ``?X`` a concept of kind ``vc`` in the image.

    ``?X`` is linked to a KB entity by exact canonical-name equality. With
    ``both_directions`` a fact whose *object* is the visual concept (e.g.
    ``(Bikini, AtLocation, Beach)`` for scene ``beach``) also binds, with
    ``?Y`` taken from the subject.
    """
    rel = PredicateKind(rel)
    results = []
    seen = set()
    for concept in annotation.concepts:
        if concept.kind != vc:
            continue
        for fact in store.lookup_ordered(subject=concept.label, predicate=rel):
            r = QueryResult(concept, fact.object, fact)
            if r not in seen:
                seen.add(r)
                results.append(r)
        if both_directions:
            for fact in store.lookup_ordered(predicate=rel, object=concept.label):
                r = QueryResult(concept, fact.subject, fact)
                if r not in seen:
                    seen.add(r)
                    results.append(r)
    return results
