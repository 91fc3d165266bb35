"""Per-image visual concepts and the rules for picking the one a question is about.

Concepts come from annotation files rather than detectors. Each image has
objects (optionally with a pixel box), scenes and actions, each with a
confidence in [0, 1].
"""

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .kb import DataError, EntityId, IngestReport, iter_jsonl

log = logging.getLogger(__name__)


class VisualConceptKind(str, enum.Enum):
    Object = "Object"
    Scene = "Scene"
    Action = "Action"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name):
        for k in cls:
            if k.value.lower() == str(name).strip().lower():
                return k
        raise ValueError(f"unknown visual concept kind {name!r}")


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    @property
    def center(self):
        return (self.x + self.w / 2, self.y + self.h / 2)

    @property
    def area(self):
        return self.w * self.h

    def mirrored(self, width):
        return Box(width - self.x - self.w, self.y, self.w, self.h)


@dataclass(frozen=True)
class VisualConceptInstance:
    label: EntityId
    kind: VisualConceptKind
    confidence: float
    box: Box = None

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0) or math.isnan(self.confidence):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.box is not None:
            if self.kind is not VisualConceptKind.Object:
                raise ValueError(f"{self.kind} concept cannot carry a box")
            if not (self.box.w > 0 and self.box.h > 0):
                raise ValueError("box width and height must be positive")

    def to_dict(self):
        d = {
            "label": self.label.surface or self.label.canonical,
            "kind": self.kind.value,
            "confidence": self.confidence,
        }
        if self.box is not None:
            b = self.box
            d["box"] = {"x": b.x, "y": b.y, "w": b.w, "h": b.h}
        return d


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: int
    height: int
    concepts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image width and height must be positive")
        for c in self.concepts:
            b = c.box
            if b is not None and (
                b.x < 0 or b.y < 0 or b.x + b.w > self.width or b.y + b.h > self.height
            ):
                raise ValueError(f"box of {c.label} does not fit inside the image")

    def of_kind(self, kind):
        return [c for c in self.concepts if c.kind == kind]

    def to_dict(self):
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "concepts": [c.to_dict() for c in self.concepts],
        }

    @classmethod
    def from_dict(cls, record):
        if not isinstance(record, dict):
            raise ValueError("record is not an object")
        for k in ("image_id", "width", "height", "concepts"):
            if k not in record:
                raise ValueError(f"missing field {k!r}")
        concepts = []
        for c in record["concepts"]:
            box = c.get("box")
            if box is not None:
                box = Box(float(box["x"]), float(box["y"]), float(box["w"]), float(box["h"]))
            concepts.append(
                VisualConceptInstance(
                    EntityId.of(c["label"]),
                    VisualConceptKind.parse(c["kind"]),
                    float(c["confidence"]),
                    box,
                )
            )
        return cls(str(record["image_id"]), record["width"], record["height"], tuple(concepts))


def ingest_annotations(path, strict=False):
    """Read a JSON Lines annotation file.

    Returns ``({image_id: ImageAnnotation}, report)``; invalid records are
    reported with their image id (or raise :class:`DataError` if ``strict``).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(2, "file not found", str(path))
    annotations = {}
    report = IngestReport()
    for lineno, record in iter_jsonl(path):
        image_id = record.get("image_id") if isinstance(record, dict) else None
        try:
            if isinstance(record, Exception):
                raise ValueError(f"invalid JSON: {record}")
            ann = ImageAnnotation.from_dict(record)
            if ann.image_id in annotations:
                raise ValueError("duplicate image_id")
        except (ValueError, TypeError, KeyError) as exc:
            msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
            if strict:
                raise DataError(msg, line=lineno, record_id=image_id) from None
            report.skipped += 1
            report.errors.append((lineno, f"image {image_id}: {msg}"))
            log.warning("%s:%d: image %s: %s", path, lineno, image_id, msg)
            continue
        annotations[ann.image_id] = ann
        report.ingested += 1
    return annotations, report


def write_annotations(annotations, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_dict(), ensure_ascii=False) + "\n")


class NoConceptError(LookupError):
    pass


def _tiebreak(c):
    return (-c.confidence, c.label.canonical)


def top_concept(annotation, kind):
    """Highest-confidence scene or action; ties go to the smaller label."""
    kind = VisualConceptKind(kind)
    candidates = annotation.of_kind(kind)
    if not candidates:
        raise NoConceptError(f"no concept of kind {kind} in image {annotation.image_id}")
    return min(candidates, key=_tiebreak)


SPATIAL_CUES = ("top", "bottom", "left", "right", "center")
SIZE_CUES = ("small", "large")
CUE_WORDS = SPATIAL_CUES + SIZE_CUES


def _cue_key(cue, annotation):
    cx0, cy0 = annotation.width / 2, annotation.height / 2
    return {
        "top": lambda b: b.center[1],
        "bottom": lambda b: -b.center[1],
        "left": lambda b: b.center[0],
        "right": lambda b: -b.center[0],
        "center": lambda b: math.hypot(b.center[0] - cx0, b.center[1] - cy0),
        "small": lambda b: b.area,
        "large": lambda b: -b.area,
    }[cue]


def select_object(annotation, cues=()):
    """Pick the object a question refers to from location/size keywords.

    With several cues the first one in ``CUE_WORDS`` order wins. Without a
    cue the most confident object is returned. Ties fall back to higher
    confidence, then the smaller label.
    """
    cue = next((c for c in CUE_WORDS if c in set(cues)), None)
    objects = annotation.of_kind(VisualConceptKind.Object)
    if cue is None:
        if not objects:
            raise NoConceptError(f"no objects in image {annotation.image_id}")
        return min(objects, key=_tiebreak)
    boxed = [o for o in objects if o.box is not None]
    if not boxed:
        raise NoConceptError(f"no boxed objects in image {annotation.image_id}")
    key = _cue_key(cue, annotation)
    return min(boxed, key=lambda o: (key(o.box),) + _tiebreak(o))


def parse_cues(tokens):
    """Cue words present in a tokenized question."""
    return {t for t in tokens if t in CUE_WORDS}
