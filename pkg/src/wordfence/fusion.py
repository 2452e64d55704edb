"""Multi-scale inference and probability voting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wordfence.errors import InvalidArgument, InvalidInput
from wordfence.grid import argmax_channels, as_float_grid, bilinear_resize, softmax_channels
from wordfence.toynet import NetworkParams, forward

DEFAULT_SCALES = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ScaleSet:
    scales: tuple[float, ...] = DEFAULT_SCALES
    target_h: int | None = None
    target_w: int | None = None

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        if not scales or any(not s > 0 for s in scales):
            raise InvalidArgument(f"scales must be a non-empty list of positive numbers, got {self.scales}")
        object.__setattr__(self, "scales", scales)


def scaled_size(height: int, width: int, scale: float) -> tuple[int, int]:
    # round half away from zero, not Python's banker's rounding
    h, w = int(np.floor(scale * height + 0.5)), int(np.floor(scale * width + 0.5))
    if h < 1 or w < 1:
        raise InvalidArgument(f"scale {scale} shrinks a {height}x{width} image to {h}x{w}")
    return h, w


def infer_multiscale(params: NetworkParams, image, scaleset: ScaleSet | tuple = DEFAULT_SCALES) -> list[np.ndarray]:
    """Class probabilities at each scale, kept at the scaled size."""
    image = as_float_grid(image, "image")
    scales = scaleset.scales if isinstance(scaleset, ScaleSet) else ScaleSet(tuple(scaleset)).scales
    h, w, _ = image.shape
    maps = []
    for s in scales:
        sh, sw = scaled_size(h, w, s)
        logits, _ = forward(params, bilinear_resize(image, sh, sw))
        maps.append(softmax_channels(logits))
    return maps


def vote_accumulator(maps, target_h: int, target_w: int) -> np.ndarray:
    """Sum, per pixel, each scale's winning probability into its winning channel."""
    maps = list(maps)
    if not maps:
        raise InvalidInput("no probability maps to fuse")
    channels = {np.shape(m)[2] if np.ndim(m) == 3 else None for m in maps}
    if len(channels) != 1 or None in channels:
        raise InvalidInput("all maps must be (H, W, C) with the same channel count")
    acc = np.zeros((target_h, target_w, channels.pop()))
    rows, cols = np.indices((target_h, target_w))
    for m in maps:
        up = bilinear_resize(m, target_h, target_w)
        winner = argmax_channels(up)
        acc[rows, cols, winner] += up[rows, cols, winner]
    return acc


def fuse_votes(maps, target_h: int, target_w: int) -> np.ndarray:
    """Final label grid from the vote accumulator (ties to the lowest class)."""
    return argmax_channels(vote_accumulator(maps, target_h, target_w))


def segment(params: NetworkParams, image, scales=DEFAULT_SCALES) -> np.ndarray:
    image = as_float_grid(image, "image")
    h, w, _ = image.shape
    return fuse_votes(infer_multiscale(params, image, ScaleSet(tuple(scales))), h, w)
