"""Ground-truth rasterization: word boxes become text pixels fenced by border rings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wordfence.errors import FormatError, InvalidAnnotation, InvalidArgument, InvalidInput
from wordfence.grid import BACKGROUND, BORDER, NUM_CLASSES, TEXT, Box, as_label_grid

DEFAULT_BORDER_WIDTH = 8


@dataclass(frozen=True)
class WordAnnotation:
    box: Box
    transcription: str = ""
    ignore: bool = False

    def __post_init__(self):
        if not isinstance(self.box, Box):
            raise InvalidAnnotation(f"annotation box must be a Box, got {type(self.box).__name__}")
        if not self.transcription and not self.ignore:
            raise InvalidAnnotation(f"word {self.box.as_tuple()} has no transcription and is not ignored")

    def to_json(self) -> dict:
        x0, y0, x1, y1 = self.box.as_tuple()
        return {"x0": x0, "y0": y0, "x1": x1, "y1": y1, "text": self.transcription, "ignore": self.ignore}

    @classmethod
    def from_json(cls, obj: dict) -> WordAnnotation:
        try:
            box = Box(obj["x0"], obj["y0"], obj["x1"], obj["y1"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidAnnotation(f"bad annotation record {obj!r}: {exc}") from exc
        return cls(box, str(obj.get("text", "")), bool(obj.get("ignore", False)))


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel classes plus a mask of pixels excluded from loss and scoring."""

    grid: np.ndarray
    ignore_mask: np.ndarray = field(default=None)
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        grid = as_label_grid(self.grid, self.num_classes)
        mask = np.zeros(grid.shape, dtype=bool) if self.ignore_mask is None else np.asarray(self.ignore_mask, dtype=bool)
        if mask.shape != grid.shape:
            raise InvalidInput(f"ignore mask {mask.shape} does not match label grid {grid.shape}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "ignore_mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


def rasterize_labels(annotations, height: int, width: int,
                     border_width: int = DEFAULT_BORDER_WIDTH) -> LabelMap:
    """Paint word boxes as text and their square rings as border.

    Where a word's text meets another word's ring, the ring wins, so that
    neighbouring words are always separated. Ignored words do not touch the
    class grid; their dilated extent goes to ``ignore_mask`` instead.
    """
    if height < 1 or width < 1:
        raise InvalidArgument(f"image size must be positive, got {height}x{width}")
    if border_width < 1:
        raise InvalidArgument(f"border_width must be >= 1, got {border_width}")

    text = np.zeros((height, width), dtype=bool)
    fence = np.zeros((height, width), dtype=bool)
    ignore = np.zeros((height, width), dtype=bool)

    for ann in annotations:
        box = ann.box
        inner = box.clipped(height, width)
        if inner is None:
            raise InvalidAnnotation(f"word box {box.as_tuple()} lies outside the {width}x{height} image")
        x0, y0, x1, y1 = box.expanded(border_width)
        outer = (slice(max(y0, 0), min(y1, height)), slice(max(x0, 0), min(x1, width)))
        interior = (slice(inner.y0, inner.y1), slice(inner.x0, inner.x1))
        if ann.ignore:
            ignore[outer] = True
            continue
        ring = np.zeros((height, width), dtype=bool)
        ring[outer] = True
        ring[interior] = False
        fence |= ring
        text[interior] = True

    grid = np.full((height, width), BACKGROUND, dtype=np.uint8)
    grid[text] = TEXT
    grid[fence] = BORDER
    return LabelMap(grid, ignore)


def drop_fence(labels: LabelMap) -> LabelMap:
    """Two-class view of a label map: border pixels become background."""
    grid = labels.grid.copy()
    grid[grid == BORDER] = BACKGROUND
    return LabelMap(grid, labels.ignore_mask.copy(), labels.num_classes)


def class_counts(labels: LabelMap) -> np.ndarray:
    """Pixel count per class over non-ignored pixels (length ``num_classes``)."""
    kept = labels.grid[~labels.ignore_mask]
    return np.bincount(kept, minlength=labels.num_classes).astype(np.int64)


def present_classes(counts) -> int:
    return int(np.count_nonzero(np.asarray(counts)))


def load_annotations(path) -> list[WordAnnotation]:
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(records, list):
        raise FormatError(f"{path}: expected a JSON array of word records")
    try:
        return [WordAnnotation.from_json(r) for r in records]
    except (InvalidAnnotation, InvalidArgument, AttributeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def dump_annotations(annotations) -> str:
    return json.dumps([a.to_json() for a in annotations], indent=1, sort_keys=True) + "\n"


def save_annotations(path, annotations) -> None:
    Path(path).write_text(dump_annotations(annotations))


# JSON Schema for annotation files. Detector output uses the same records
# without ``text``/``ignore``.
ANNOTATION_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "x0": {"type": "integer"},
            "y0": {"type": "integer"},
            "x1": {"type": "integer"},
            "y1": {"type": "integer"},
            "text": {"type": "string"},
            "ignore": {"type": "boolean"},
        },
        "required": ["x0", "y0", "x1", "y1"],
        "additionalProperties": False,
    },
}


def dump_boxes(boxes, texts=None) -> str:
    records = []
    for i, box in enumerate(boxes):
        x0, y0, x1, y1 = box.as_tuple()
        rec = {"x0": x0, "y0": y0, "x1": x1, "y1": y1}
        if texts is not None:
            rec["text"] = texts[i]
        records.append(rec)
    return json.dumps(records, indent=1, sort_keys=True) + "\n"


def load_boxes(path) -> list[tuple[Box, str]]:
    """Detection records as ``(box, text)`` pairs; ``text`` is "" when absent."""
    path = Path(path)
    try:
        records = json.loads(path.read_text())
        return [(Box(r["x0"], r["y0"], r["x1"], r["y1"]), str(r.get("text", ""))) for r in records]
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    except (json.JSONDecodeError, KeyError, TypeError, InvalidArgument) as exc:
        raise FormatError(f"{path}: malformed box file ({exc})") from exc
