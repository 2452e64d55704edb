"""Pixelwise softmax loss with per-image inverse-frequency class weights.

Every non-ignored pixel ``p`` with ground truth ``g`` contributes
``-log(softmax(logits_p)[g]) / n_g`` where ``n_g`` is the number of pixels of
class ``g`` in the same image. Each present class therefore carries a total
weight of exactly one, whatever its area, so a handful of text and border
pixels is not drowned out by the background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wordfence.errors import DegenerateInput, InvalidInput
from wordfence.grid import as_float_grid, log_softmax_channels
from wordfence.labelgen import LabelMap, class_counts


@dataclass(frozen=True)
class LossOutput:
    loss: float
    grad: np.ndarray


def compute_class_weights(labels: LabelMap) -> np.ndarray:
    """``1 / n_c`` for every class present in the image, 0 for absent ones."""
    counts = class_counts(labels)
    weights = np.zeros(len(counts), dtype=np.float64)
    present = counts > 0
    weights[present] = 1.0 / counts[present]
    return weights


def weighted_softmax_loss(logits, labels: LabelMap) -> LossOutput:
    x = as_float_grid(logits, "logits").astype(np.float64, copy=False)
    h, w, c = x.shape
    if labels.shape != (h, w):
        raise InvalidInput(f"logits {x.shape[:2]} and labels {labels.shape} differ in size")
    if labels.num_classes > c:
        raise InvalidInput(f"{labels.num_classes} label classes but only {c} logit channels")
    if labels.ignore_mask.all():
        raise DegenerateInput("every pixel is ignored; the loss is undefined")

    weights = np.zeros(c)
    weights[:labels.num_classes] = compute_class_weights(labels)
    gt = labels.grid.astype(np.intp)
    pixel_w = np.where(labels.ignore_mask, 0.0, weights[gt])

    logp = log_softmax_channels(x)
    logp_gt = np.take_along_axis(logp, gt[:, :, None], axis=2)[:, :, 0]
    loss = -float(np.sum(pixel_w * logp_gt))

    grad = np.exp(logp)
    np.put_along_axis(grad, gt[:, :, None], np.take_along_axis(grad, gt[:, :, None], axis=2) - 1.0, axis=2)
    grad *= pixel_w[:, :, None]
    return LossOutput(loss=max(loss, 0.0), grad=grad)


def batch_loss(logits_list, labels_list) -> tuple[float, list[np.ndarray]]:
    """Sum of per-image losses, each image weighted by its own class counts."""
    total, grads = 0.0, []
    for logits, labels in zip(logits_list, labels_list, strict=True):
        out = weighted_softmax_loss(logits, labels)
        total += out.loss
        grads.append(out.grad)
    return total, grads
