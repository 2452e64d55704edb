"""Detection scoring: one-to-one IoU matching and the end-to-end word protocol."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from wordfence.grid import Box
from wordfence.labelgen import WordAnnotation

_ALNUM = re.compile(r"[A-Za-z0-9]+")


def iou(a: Box, b: Box) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass
class DetectionReport:
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    # (detection index, ground-truth index, iou) for box-matched pairs
    matches: list = field(default_factory=list)
    # detections swallowed by ignored ground truth
    discarded: list = field(default_factory=list)

    @property
    def precision(self) -> float:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.true_positives + self.false_negatives
        return self.true_positives / denom if denom else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: DetectionReport) -> DetectionReport:
        # per-box assignments are image-local and do not survive aggregation
        return DetectionReport(self.true_positives + other.true_positives,
                               self.false_positives + other.false_positives,
                               self.false_negatives + other.false_negatives)

    def summary(self) -> dict:
        return {"tp": self.true_positives, "fp": self.false_positives, "fn": self.false_negatives,
                "precision": self.precision, "recall": self.recall, "fscore": self.f_score}


def _greedy_pairs(dets, gts, candidates, thresh):
    """Greedy one-to-one assignment in descending IoU, ties by (det, gt) index."""
    pairs = []
    for d in candidates:
        for g, gt in enumerate(gts):
            if gt.ignore:
                continue
            v = iou(dets[d], gt.box)
            if v >= thresh:
                pairs.append((-v, d, g))
    pairs.sort()
    used_d, used_g, out = set(), set(), []
    for neg_v, d, g in pairs:
        if d in used_d or g in used_g:
            continue
        used_d.add(d)
        used_g.add(g)
        out.append((d, g, -neg_v))
    return out


def _absorbed(det: Box, gts, thresh) -> bool:
    """True if the detection's best-overlapping ground truth is ignored and overlaps enough."""
    best, best_ignored = 0.0, False
    for gt in gts:
        v = iou(det, gt.box)
        # strictly greater: a tie with a scored word keeps the detection in play
        if v > best:
            best, best_ignored = v, gt.ignore
    return best_ignored and best >= thresh


def match_detections(dets, gts, iou_thresh: float = 0.5) -> DetectionReport:
    dets, gts = list(dets), list(gts)
    discarded = [d for d, box in enumerate(dets) if _absorbed(box, gts, iou_thresh)]
    scored = [d for d in range(len(dets)) if d not in set(discarded)]
    pairs = _greedy_pairs(dets, gts, scored, iou_thresh)
    n_gt = sum(not g.ignore for g in gts)
    return DetectionReport(true_positives=len(pairs), false_positives=len(scored) - len(pairs),
                           false_negatives=n_gt - len(pairs), matches=pairs, discarded=discarded)


def is_scorable_word(text: str) -> bool:
    """Words longer than three characters made only of ASCII letters and digits."""
    return len(text) > 3 and _ALNUM.fullmatch(text) is not None


def end_to_end_score(dets, gts, iou_thresh: float = 0.5) -> DetectionReport:
    """Score ``(box, transcription)`` detections against word annotations.

    Ground-truth words that are too short or contain anything but letters and
    digits are ignored. A box match only counts when the transcriptions agree
    case-insensitively; otherwise it costs one false positive and one false
    negative.
    """
    dets = list(dets)
    gts = [WordAnnotation(g.box, g.transcription, g.ignore or not is_scorable_word(g.transcription))
           for g in gts]
    boxes = [box for box, _ in dets]
    report = match_detections(boxes, gts, iou_thresh)
    correct = [(d, g, v) for d, g, v in report.matches
               if dets[d][1].lower() == gts[g].transcription.lower()]
    wrong = len(report.matches) - len(correct)
    return DetectionReport(true_positives=len(correct),
                           false_positives=report.false_positives + wrong,
                           false_negatives=report.false_negatives + wrong,
                           matches=correct, discarded=report.discarded)
