"""Fence-separation experiment: the same network trained with and without border labels.

Both runs share scenes, seeds and budget; only the training targets differ.
Without the fence class, words a few pixels apart tend to merge into one
component and are lost at IoU 0.5.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from wordfence.evaluate import DetectionReport, match_detections
from wordfence.extract import extract_boxes
from wordfence.fusion import DEFAULT_SCALES, segment
from wordfence.labelgen import drop_fence, rasterize_labels
from wordfence.synth import SynthConfig, generate_scene
from wordfence.toynet import TrainConfig, train

log = logging.getLogger(__name__)

# at 64x64 the ring must stay narrower than the smallest gap, or a
# neighbour's fence would eat into a word's own text pixels
EXPERIMENT_BORDER_WIDTH = 2
EXPERIMENT_TRAIN = TrainConfig(learning_rate=0.02, epochs=20, batch=1, seed=7, weight_init_scale=0.25)
EXPERIMENT_SCENES = SynthConfig(image_h=64, image_w=64, words_min=2, words_max=4, gap_min=3, gap_max=10)


@dataclass
class ArmResult:
    name: str
    report: DetectionReport
    loss_log: list = field(default_factory=list)
    seconds: float = 0.0


def make_scenes(config: SynthConfig, count: int, first_seed: int):
    return [generate_scene(SynthConfig(**{**config.__dict__, "seed": first_seed + i})) for i in range(count)]


def evaluate(params, scenes, scales=DEFAULT_SCALES, min_area=6) -> DetectionReport:
    total = DetectionReport()
    for image, annotations in scenes:
        boxes = extract_boxes(segment(params, image, scales), min_area=min_area)
        total = total + match_detections(boxes, annotations)
    return total


def run_fence_experiment(n_train: int = 200, n_test: int = 50, scenes: SynthConfig = EXPERIMENT_SCENES,
                         train_config: TrainConfig = EXPERIMENT_TRAIN,
                         border_width: int = EXPERIMENT_BORDER_WIDTH, scales=DEFAULT_SCALES,
                         scene_seed: int = 1000) -> dict[str, ArmResult]:
    train_scenes = make_scenes(scenes, n_train, scene_seed)
    test_scenes = make_scenes(scenes, n_test, scene_seed + 100_000)
    h, w = scenes.image_h, scenes.image_w
    fenced = [(img, rasterize_labels(anns, h, w, border_width)) for img, anns in train_scenes]
    arms = {"fence": fenced, "plain": [(img, drop_fence(lab)) for img, lab in fenced]}

    results = {}
    for name, data in arms.items():
        start = time.perf_counter()
        params, history = train(data, train_config)
        report = evaluate(params, test_scenes, scales)
        results[name] = ArmResult(name, report, history, time.perf_counter() - start)
        log.info("%s: recall %.3f precision %.3f (%.0fs)", name, report.recall, report.precision,
                 results[name].seconds)
    return results
