"""Seeded synthetic KB + annotations + QA dataset with unambiguous answers.

Construction guarantees:

* every fact's KB-side phrase has a keyword set no other fact shares, and
  the phrase words never occur in question templates or concept labels, so
  an image-answer question is best matched by exactly one fact in the KB;
* for a KB-answer question the concept it is about (top scene/action, or
  the object singled out by a location/size word) has exactly one fact with
  the question's predicate, so the answer is unique;
* every registered query type gets at least one question.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classifier import REFERENCE_QUERY_TYPES, AnswerSource, QueryType
from .concepts import (
    Box,
    ImageAnnotation,
    VisualConceptInstance,
    VisualConceptKind,
    select_object,
    top_concept,
    write_annotations,
)
from .evaluation import QAInstance, Taxonomy, write_dataset
from .kb import EntityId, Predicate, PredicateKind, Source, Triple, TripleStore, write_kb
from .text import STOPWORDS, keywords, stem, tokenize

log = logging.getLogger(__name__)

Obj, Scene, Action = VisualConceptKind.Object, VisualConceptKind.Scene, VisualConceptKind.Action
Img, KB = AnswerSource.Image, AnswerSource.KB
P = PredicateKind

# The reference table repeats (AtLocation, KB, Scene); the synthetic label
# space fills the 32nd slot with (AtLocation, KB, Action).
SYNTHETIC_QUERY_TYPES = tuple(sorted(set(REFERENCE_QUERY_TYPES))) + (QueryType(P.AtLocation, Action, KB),)

OBJECTS = {
    "animal": "cat dog horse zebra giraffe elephant sheep cow bird bear monkey rabbit".split(),
    "vehicle": "car bus train bicycle motorcycle boat airplane truck".split(),
    "food": "apple banana pizza cake sandwich orange broccoli carrot".split(),
    "furniture": "sofa chair bed table bench desk".split(),
    "device": "clock laptop television phone camera lamp".split(),
    "artifact": "umbrella kite bottle cup book vase saxophone guitar".split(),
}
SCENES = [
    "kitchen", "beach", "park", "bedroom", "office", "street", "forest", "farm",
    "ski slope", "harbor", "restaurant", "library", "stadium", "garden", "desert",
    "mountain", "river bank", "bathroom", "classroom", "market",
]
ACTIONS = ["cooking", "surfing", "skiing", "riding", "reading", "swimming", "running", "eating", "sleeping", "painting"]
COMPARATIVES = ["Faster", "Slower", "Bigger", "Smaller", "Taller", "Heavier", "Cheaper", "Better"]

VERBS = """
climb jump swim fly carry pull push dig hunt chase fetch guard build paint wash
fold grow boil mix pour stack sort lift throw catch kick roll spin float sail row
knit sew plant pick dream sing whistle bark hatch drill print melt freeze
""".split()
NOUNS = """
tree fence rope ball stone shell feather branch nest wheel brick window door
bridge tower bucket basket ladder blanket pillow candle mirror carpet wagon
engine anchor compass lantern kettle hammer needle ribbon button pocket sock
glove helmet jacket bottle jar barrel coin map flag drum bell trumpet violin
""".split()
ADJECTIVES = """
soft hard warm cold bright dark loud quiet smooth rough heavy light round
square tiny huge shiny dusty sticky fluffy crispy sweet sour bitter salty
spicy gentle fierce clever lazy brave happy sad noisy calm wild tame fresh
""".split()

CUE_PHRASES = {
    "left": "object on the left",
    "right": "object on the right",
    "top": "object at the top",
    "bottom": "object at the bottom",
    "center": "object in the center",
    "small": "small object",
    "large": "large object",
}

# {y}: KB-side phrase, {cmp}: comparative adjective, {o}: object reference.
TEMPLATES = {
    QueryType(P.Category, Obj, Img): [
        "Which object in this image belongs to the category {y}?",
        "Which thing in this image is categorized as {y}?",
        "What in this image falls under the category {y}?",
    ],
    QueryType(P.IsA, Obj, Img): [
        "Which object in this image is a kind of {y}?",
        "What in this image is a type of {y}?",
        "Which thing shown here is an example of {y}?",
    ],
    QueryType(P.RelatedTo, Obj, Img): [
        "Which object in this image is related to {y}?",
        "What in this image is associated with {y}?",
        "Which thing shown here has a connection to {y}?",
    ],
    QueryType(P.UsedFor, Obj, Img): [
        "Which object in this image is used for {y}?",
        "What in this image can be used for {y}?",
        "Which thing shown here is useful for {y}?",
    ],
    QueryType(P.CapableOf, Obj, Img): [
        "Which object in this image is able to {y}?",
        "What in this image is capable of {y}?",
        "Which animal in this image is able to {y}?",
    ],
    QueryType(P.HasA, Obj, Img): [
        "Which object in this image has {y}?",
        "What in this image owns {y}?",
        "Which thing shown here comes with {y}?",
    ],
    QueryType(P.HasProperty, Obj, Img): [
        "Which object in this image is usually {y}?",
        "What in this image has the property {y}?",
        "Which thing shown here is typically {y}?",
    ],
    QueryType(P.Comparative, Obj, Img): [
        "Which object in this image is {cmp} than {y}?",
        "What in this image is {cmp} compared to {y}?",
        "Which thing shown here is {cmp} than a {y}?",
    ],
    QueryType(P.AtLocation, Obj, Img): [
        "Which object in this image can be found in {y}?",
        "What in this image is usually located at {y}?",
        "Which thing shown here is typically seen in {y}?",
    ],
    QueryType(P.Desires, Obj, Img): [
        "Which object in this image wants {y}?",
        "What in this image desires {y}?",
        "Which thing shown here would like {y}?",
    ],
    QueryType(P.PartOf, Obj, Img): [
        "Which object in this image is part of {y}?",
        "What in this image is a component of {y}?",
        "Which thing shown here forms a piece of {y}?",
    ],
    QueryType(P.ReceivesAction, Obj, Img): [
        "Which object in this image receives {y}?",
        "What in this image is often subjected to {y}?",
        "Which thing shown here undergoes {y}?",
    ],
    QueryType(P.CreatedBy, Obj, Img): [
        "Which object in this image is made from {y}?",
        "What in this image is created by {y}?",
        "Which thing shown here is produced from {y}?",
    ],
    QueryType(P.Category, Obj, KB): [
        "What category does the {o} belong to?",
        "Which category is the {o} in?",
    ],
    QueryType(P.IsA, Obj, KB): [
        "What kind of thing is the {o}?",
        "The {o} is a type of what?",
    ],
    QueryType(P.RelatedTo, Obj, KB): [
        "What is the {o} related to?",
        "What concept is associated with the {o}?",
    ],
    QueryType(P.UsedFor, Obj, KB): [
        "What is the {o} used for?",
        "What can people use the {o} for?",
    ],
    QueryType(P.CapableOf, Obj, KB): [
        "What is the {o} capable of?",
        "What is the {o} able to do?",
    ],
    QueryType(P.HasA, Obj, KB): [
        "What does the {o} have?",
        "What does the {o} own?",
    ],
    QueryType(P.HasProperty, Obj, KB): [
        "What property does the {o} have?",
        "How would you describe the {o}?",
    ],
    QueryType(P.Comparative, Obj, KB): [
        "What is the {o} {cmp} than?",
        "Compared to what is the {o} {cmp}?",
    ],
    QueryType(P.AtLocation, Obj, KB): [
        "Where can the {o} usually be found?",
        "Where is the {o} typically located?",
    ],
    QueryType(P.ReceivesAction, Obj, KB): [
        "What can be done to the {o}?",
        "What action does the {o} receive?",
    ],
    QueryType(P.AtLocation, Scene, KB): [
        "What can be found in this place?",
        "What is usually located in this scene?",
    ],
    QueryType(P.UsedFor, Scene, KB): [
        "What is this place used for?",
        "What can people do in this scene?",
    ],
    QueryType(P.HasProperty, Scene, KB): [
        "What property does this place have?",
        "How would you describe this scene?",
    ],
    QueryType(P.HasA, Scene, KB): [
        "What does this place have?",
        "What does this scene own?",
    ],
    QueryType(P.Comparative, Scene, KB): [
        "What is this place {cmp} than?",
        "Compared to what is this scene {cmp}?",
    ],
    QueryType(P.CapableOf, Scene, KB): [
        "What is this place capable of?",
        "What is this scene able to do?",
    ],
    QueryType(P.Comparative, Action, KB): [
        "What is this activity {cmp} than?",
        "Compared to what is the action shown {cmp}?",
    ],
    QueryType(P.HasProperty, Action, KB): [
        "What property does this activity have?",
        "How would you describe the action shown?",
    ],
    QueryType(P.AtLocation, Action, KB): [
        "Where does this activity usually take place?",
        "Where is the action shown typically done?",
    ],
}


@dataclass
class SyntheticSpec:
    images: int = 200
    questions_per_type: int = 13
    facts_per_kind: int = 80
    seed: int = 0
    width: int = 640
    height: int = 480
    query_types: tuple = SYNTHETIC_QUERY_TYPES
    templates: dict = field(default_factory=lambda: dict(TEMPLATES))

    def validate(self):
        missing = [qt for qt in self.query_types if not self.templates.get(qt)]
        if missing:
            raise ValueError(f"no templates for query type(s): {', '.join(map(str, missing))}")
        if self.images < 2 or self.questions_per_type < 1 or self.facts_per_kind < 0:
            raise ValueError("images >= 2, questions_per_type >= 1, facts_per_kind >= 0 required")

    def manifest(self):
        return {
            "images": self.images,
            "questions_per_type": self.questions_per_type,
            "facts_per_kind": self.facts_per_kind,
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "query_types": [str(qt) for qt in self.query_types],
        }


@dataclass
class SyntheticData:
    store: TripleStore
    annotations: list
    dataset: list
    taxonomy: Taxonomy
    spec: SyntheticSpec


def _gerund(verb):
    if len(verb) >= 3 and verb[-1] not in "aeiouwxy" and verb[-2] in "aeiou" and verb[-3] not in "aeiou":
        return verb + verb[-1] + "ing"
    return verb + "ing"


class _Phrases:
    """Fresh KB-side phrases; each keyword set is handed out once."""

    def __init__(self, rng, banned_stems):
        ok = lambda w: w not in STOPWORDS and stem(w) not in banned_stems
        self.verbs = [v for v in VERBS if ok(v) and stem(_gerund(v)) == stem(v)]
        self.nouns = [n for n in NOUNS if ok(n)]
        self.adjs = [a for a in ADJECTIVES if ok(a)]
        self.rng = rng
        self.used = set()

    def fresh(self):
        """``(fact surface form, question form)``."""
        for _ in range(10000):
            noun = self.nouns[self.rng.integers(len(self.nouns))]
            plural = noun + "s" if stem(noun + "s") == stem(noun) else noun
            if self.rng.random() < 0.5:
                verb = self.verbs[self.rng.integers(len(self.verbs))]
                fact, question = f"{_gerund(verb)} {plural}", f"{verb} {noun}"
            else:
                adj = self.adjs[self.rng.integers(len(self.adjs))]
                fact, question = f"{adj} {plural}", f"{adj} {noun}"
            kw = keywords(fact)
            if kw not in self.used and kw == keywords(question):
                self.used.add(kw)
                return fact, question
        raise RuntimeError("phrase pool exhausted; lower the fact counts")


def _source_for(kind):
    if kind is P.Category:
        return Source.DBpedia
    if kind is P.Comparative:
        return Source.WebChild
    return Source.ConceptNet


def _template_stems(spec):
    words = set()
    for temps in spec.templates.values():
        for t in temps:
            words |= set(tokenize(t.replace("{y}", " ").replace("{cmp}", " ").replace("{o}", " ")))
    words |= {w for c in COMPARATIVES for w in tokenize(c)}
    words |= {w for p in CUE_PHRASES.values() for w in tokenize(p)}
    for labels in list(OBJECTS.values()) + [SCENES, ACTIONS, list(OBJECTS)]:
        for label in labels:
            words |= set(tokenize(label))
    return {stem(w) for w in words}


def _make_annotation(rng, n, spec, object_labels):
    n_obj = int(rng.integers(2, 6))
    labels = rng.choice(len(object_labels), size=n_obj, replace=False)
    concepts = []
    for li in labels:
        w = int(rng.integers(20, spec.width // 3))
        h = int(rng.integers(20, spec.height // 3))
        x = int(rng.integers(0, spec.width - w + 1))
        y = int(rng.integers(0, spec.height - h + 1))
        conf = round(float(rng.uniform(0.3, 1.0)), 3)
        concepts.append(VisualConceptInstance(EntityId.of(object_labels[li]), Obj, conf, Box(x, y, w, h)))
    for kind, pool, lo, hi in ((Scene, SCENES, 1, 4), (Action, ACTIONS, 0, 3)):
        count = int(rng.integers(lo, hi))
        for li in rng.choice(len(pool), size=count, replace=False):
            conf = round(float(rng.uniform(0.05, 1.0)), 3)
            concepts.append(VisualConceptInstance(EntityId.of(pool[li]), kind, conf))
    return ImageAnnotation(f"img{n:04d}", spec.width, spec.height, tuple(concepts))


def generate(spec=None):
    """Build a :class:`SyntheticData` for ``spec``; same spec, same data."""
    spec = spec or SyntheticSpec()
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    object_labels = sorted(w for ws in OBJECTS.values() for w in ws)
    annotations = [_make_annotation(rng, n, spec, object_labels) for n in range(spec.images)]
    phrases = _Phrases(rng, _template_stems(spec))

    facts = []  # in creation order
    by_pair = {}  # (subject canonical, kind) -> [Triple]
    locked = set()  # pairs that must keep exactly one fact

    def add_fact(subject, kind, phrase):
        raw = COMPARATIVES[rng.integers(len(COMPARATIVES))] if kind is P.Comparative else kind.value
        t = Triple(EntityId.of(subject), Predicate(kind, raw), EntityId.of(phrase), _source_for(kind))
        facts.append(t)
        by_pair.setdefault((t.subject.canonical, kind), []).append(t)
        return t

    def render(qt, fact, qphrase, obj_ref=None):
        template = spec.templates[qt][rng.integers(len(spec.templates[qt]))]
        cmp_word = fact.predicate.raw.lower() if qt.rel is P.Comparative else ""
        return template.format(y=qphrase or "", cmp=cmp_word, o=obj_ref or "")

    rows = []
    order = [qt for qt in spec.query_types for _ in range(spec.questions_per_type)]
    # KB-answer questions first: they lock (concept, predicate) pairs
    order.sort(key=lambda qt: qt.answer_source is Img)
    for qt in order:
        for _attempt in range(1000):
            ann = annotations[rng.integers(len(annotations))]
            made = _try_question(qt, ann, rng, add_fact, by_pair, locked, phrases, render)
            if made is not None:
                break
        else:
            raise RuntimeError(f"could not place a question of type {qt}")
        question, answer, fact = made
        rows.append(QAInstance(f"q{len(rows):05d}", ann.image_id, question, answer, fact, qt))

    subjects = {
        Obj: object_labels,
        Scene: SCENES,
        Action: ACTIONS,
    }
    for kind in PredicateKind:
        made = 0
        while made < spec.facts_per_kind:
            vc = (Obj, Obj, Scene, Action)[rng.integers(4)]
            subject = EntityId.of(subjects[vc][rng.integers(len(subjects[vc]))]).canonical
            if (subject, kind) in locked:
                continue
            add_fact(subject, kind, phrases.fresh()[0])
            made += 1

    store = TripleStore()
    for t in facts:
        if not store.add(t):
            raise AssertionError(f"duplicate synthetic fact {t}")
    store.freeze()
    _verify(store, rows, annotations, locked)
    return SyntheticData(store, annotations, rows, _taxonomy(), spec)


def _try_question(qt, ann, rng, add_fact, by_pair, locked, phrases, render):
    if qt.answer_source is Img:
        objs = [c for c in ann.of_kind(Obj) if (c.label.canonical, qt.rel) not in locked]
        if not objs:
            return None
        x = objs[rng.integers(len(objs))]
        fact_form, q_form = phrases.fresh()
        fact = add_fact(x.label.canonical, qt.rel, fact_form)
        return render(qt, fact, q_form), x.label.canonical, fact

    if qt.vc is Obj:
        objs = ann.of_kind(Obj)
        x = objs[rng.integers(len(objs))]
        cues = [c for c in CUE_PHRASES if select_object(ann, {c}) == x]
        if not cues:
            return None
        obj_ref = CUE_PHRASES[cues[rng.integers(len(cues))]]
    else:
        if not ann.of_kind(qt.vc):
            return None
        x = top_concept(ann, qt.vc)
        obj_ref = None
    pair = (x.label.canonical, qt.rel)
    existing = by_pair.get(pair, [])
    if pair in locked:
        fact = existing[0]
    elif existing:
        return None
    else:
        fact = add_fact(x.label.canonical, qt.rel, phrases.fresh()[0])
        locked.add(pair)
    return render(qt, fact, None, obj_ref), fact.object.canonical, fact


def _verify(store, rows, annotations, locked):
    for pair in locked:
        n = len(store.lookup(subject=pair[0], predicate=pair[1]))
        if n != 1:
            raise AssertionError(f"locked pair {pair} has {n} facts")
    labels = {c.label.canonical for a in annotations for c in a.concepts}
    seen = {}
    for t in store:
        if t.object.canonical in labels:
            raise AssertionError(f"fact object {t.object} collides with a concept label")
        kw = keywords(t.object.canonical)
        if kw in seen and seen[kw] != t.object.canonical:
            raise AssertionError(f"phrases {seen[kw]!r} and {t.object} share keywords")
        seen[kw] = t.object.canonical
    for qa in rows:
        if qa.query_type.answer_source is Img:
            y = keywords(qa.supporting_fact.object.canonical)
            if not y or not y <= keywords(qa.question):
                raise AssertionError(f"{qa.question_id}: question does not contain its fact phrase")


def _taxonomy():
    parents = {"entity": ""}
    for cat, words in OBJECTS.items():
        parents[cat] = "object"
        for w in words:
            parents[w] = cat
    parents["object"] = "entity"
    parents["place"] = "entity"
    parents["activity"] = "entity"
    for s in SCENES:
        parents[s] = "place"
    for a in ACTIONS:
        parents[a] = "activity"
    return Taxonomy(parents)


FILES = {
    "kb": "kb.jsonl",
    "annotations": "annotations.jsonl",
    "dataset": "dataset.jsonl",
    "taxonomy": "taxonomy.tsv",
    "manifest": "manifest.json",
}


def write(data, out_dir):
    """Write the five synthetic files; returns ``{name: path}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in FILES.items()}
    write_kb(data.store, paths["kb"])
    write_annotations(data.annotations, paths["annotations"])
    write_dataset(data.dataset, paths["dataset"])
    data.taxonomy.save(paths["taxonomy"])
    manifest = {
        "spec": data.spec.manifest(),
        "counts": {
            "images": len(data.annotations),
            "facts": len(data.store),
            "questions": len(data.dataset),
            "query_types": len({qa.query_type for qa in data.dataset}),
        },
        "files": {k: v for k, v in FILES.items() if k != "manifest"},
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return paths
