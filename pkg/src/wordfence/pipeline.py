"""End-to-end detection over a list of images: segment, extract, score, write artifacts."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from wordfence.errors import FormatError, InvalidArgument, WordFenceError
from wordfence.evaluate import DetectionReport, match_detections
from wordfence.extract import extract_boxes
from wordfence.formats import read_image, write_pnm
from wordfence.fusion import DEFAULT_SCALES, ScaleSet, segment
from wordfence.labelgen import DEFAULT_BORDER_WIDTH, dump_boxes, load_annotations
from wordfence.overlay import render_overlay
from wordfence.toynet import load_checkpoint

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    checkpoint: Path
    images: list = field(default_factory=list)
    # one annotation file per image, or empty to skip scoring
    annotations: list = field(default_factory=list)
    out_dir: Path = Path("out")
    border_width: int = DEFAULT_BORDER_WIDTH
    scales: tuple = DEFAULT_SCALES
    min_area: int = 6
    expand: int = 0
    iou_thresh: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.checkpoint = Path(self.checkpoint)
        self.out_dir = Path(self.out_dir)
        self.images = [Path(p) for p in self.images]
        self.annotations = [Path(p) for p in self.annotations]
        if self.annotations and len(self.annotations) != len(self.images):
            raise InvalidArgument(f"{len(self.images)} images but {len(self.annotations)} annotation files")
        ScaleSet(tuple(self.scales))
        if self.min_area < 0 or self.expand < 0 or self.border_width < 1:
            raise InvalidArgument("min_area and expand must be >= 0 and border_width >= 1")
        if not 0.0 < self.iou_thresh <= 1.0:
            raise InvalidArgument(f"iou threshold must lie in (0, 1], got {self.iou_thresh}")

    @classmethod
    def from_manifest(cls, manifest, **kwargs) -> PipelineConfig:
        """Images and annotations listed by a synthetic-dataset manifest."""
        manifest = Path(manifest)
        try:
            scenes = json.loads(manifest.read_text())["scenes"]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise FormatError(f"{manifest}: not a dataset manifest ({exc})") from exc
        root = manifest.parent
        return cls(images=[root / s["image"] for s in scenes],
                   annotations=[root / s["annotations"] for s in scenes], **kwargs)


@dataclass
class PipelineResult:
    report: DetectionReport
    per_image: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Detect words in every image and score them against annotations when given.

    Writes ``<stem>.labels.pgm``, ``<stem>.boxes.json`` and ``<stem>.overlay.ppm``
    per image, then ``report.json`` and ``per_image.csv`` once at the end. A
    broken image is logged, recorded in ``failures`` and skipped.
    """
    params, _ = load_checkpoint(config.checkpoint)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    result = PipelineResult(DetectionReport())
    for i, image_path in enumerate(config.images):
        try:
            image = read_image(image_path)
            labels = segment(params, image, config.scales)
            boxes = extract_boxes(labels, config.min_area, config.expand)
            stem = image_path.stem
            write_pnm(config.out_dir / f"{stem}.labels.pgm", labels)
            (config.out_dir / f"{stem}.boxes.json").write_text(dump_boxes(boxes))
            write_pnm(config.out_dir / f"{stem}.overlay.ppm", render_overlay(image, boxes, labels))
            if config.annotations:
                report = match_detections(boxes, load_annotations(config.annotations[i]), config.iou_thresh)
                result.report = result.report + report
                result.per_image.append((stem, report))
        except (WordFenceError, OSError) as exc:
            log.error("%s: %s", image_path, exc)
            result.failures.append((str(image_path), str(exc)))

    summary = result.report.summary()
    summary["images"] = len(config.images)
    summary["failures"] = [path for path, _ in result.failures]
    (config.out_dir / "report.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    (config.out_dir / "per_image.csv").write_text(per_image_csv(result.per_image))
    return result


def per_image_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image", "tp", "fp", "fn", "precision", "recall", "fscore"])
    for name, r in rows:
        writer.writerow([name, r.true_positives, r.false_positives, r.false_negatives,
                         f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f_score:.6f}"])
    return buf.getvalue()
