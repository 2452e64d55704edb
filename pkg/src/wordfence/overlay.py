"""Color overlays of detections on the input image, for eyeballing results."""

from __future__ import annotations

import logging

import numpy as np

from wordfence.formats import image_to_u8
from wordfence.grid import BORDER, TEXT

log = logging.getLogger(__name__)

BOX_COLOR = (0, 255, 0)
TINTS = {TEXT: (255, 0, 0), BORDER: (0, 0, 255)}
TINT_ALPHA = 0.4


def render_overlay(image, boxes=(), labels=None) -> np.ndarray:
    """``(H, W, 3)`` uint8 picture: gray image, optional class tint, green box outlines."""
    gray = image_to_u8(image)
    h, w = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2).astype(np.float64)
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (h, w):
            raise ValueError(f"label grid {labels.shape} does not match image {(h, w)}")
        for cls, color in TINTS.items():
            mask = labels == cls
            rgb[mask] = (1.0 - TINT_ALPHA) * rgb[mask] + TINT_ALPHA * np.array(color, dtype=np.float64)
    out = np.rint(rgb).astype(np.uint8)

    for box in boxes:
        clipped = box.clipped(h, w)
        if clipped is None:
            log.warning("box %s lies outside the %dx%d image; skipped", box.as_tuple(), w, h)
            continue
        if clipped != box:
            log.warning("box %s clipped to the %dx%d image", box.as_tuple(), w, h)
        x0, y0, x1, y1 = clipped.as_tuple()
        out[y0, x0:x1] = BOX_COLOR
        out[y1 - 1, x0:x1] = BOX_COLOR
        out[y0:y1, x0] = BOX_COLOR
        out[y0:y1, x1 - 1] = BOX_COLOR
    return out
