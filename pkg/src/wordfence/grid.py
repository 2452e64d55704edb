"""Grid conventions and the numeric primitives every stage shares.

Grids are plain numpy arrays:

* a float grid is ``(height, width, channels)`` (logits, probabilities, images);
* a label grid is ``(height, width)`` of ``uint8`` class ids.

Functions never modify their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wordfence.errors import InvalidArgument, InvalidInput

BACKGROUND, TEXT, BORDER = 0, 1, 2
NUM_CLASSES = 3


@dataclass(frozen=True, order=True)
class Box:
    """Axis-aligned pixel rectangle, ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            value = getattr(self, name)
            if isinstance(value, (bool, np.bool_)) or int(value) != value:
                raise InvalidArgument(f"box coordinate {name}={value!r} is not an integer")
            object.__setattr__(self, name, int(value))
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise InvalidArgument(f"empty box {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    def expanded(self, amount: int) -> tuple[int, int, int, int]:
        """Chebyshev dilation by ``amount``; may leave the image, hence a tuple."""
        return (self.x0 - amount, self.y0 - amount, self.x1 + amount, self.y1 + amount)

    def clipped(self, height: int, width: int) -> Box | None:
        x0, y0 = max(self.x0, 0), max(self.y0, 0)
        x1, y1 = min(self.x1, width), min(self.y1, height)
        if x0 >= x1 or y0 >= y1:
            return None
        return Box(x0, y0, x1, y1)

    def scaled(self, factor: int) -> Box:
        return Box(self.x0 * factor, self.y0 * factor, self.x1 * factor, self.y1 * factor)


def as_float_grid(values, name: str = "grid") -> np.ndarray:
    """Validate and return ``values`` as a finite float64 ``(H, W, C)`` array."""
    arr = np.asarray(values)
    if arr.ndim != 3:
        raise InvalidInput(f"{name} must be (height, width, channels), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise InvalidInput(f"{name} has an empty dimension: {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


def as_label_grid(values, num_classes: int = NUM_CLASSES, name: str = "labels") -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise InvalidInput(f"{name} must be a non-empty (height, width) grid, got {arr.shape}")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise InvalidInput(f"{name} values must fit in uint8")
        arr = arr.astype(np.uint8)
    if arr.size and int(arr.max()) >= num_classes:
        raise InvalidInput(f"{name} holds class {int(arr.max())} but only {num_classes} classes exist")
    return arr


def softmax_channels(logits) -> np.ndarray:
    """Per-pixel softmax over the channel axis."""
    x = as_float_grid(logits, "logits")
    shifted = x - x.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=2, keepdims=True)


def log_softmax_channels(logits) -> np.ndarray:
    x = as_float_grid(logits, "logits")
    shifted = x - x.max(axis=2, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=2, keepdims=True))


def argmax_channels(probs) -> np.ndarray:
    """Per-pixel winning channel; ties go to the lowest index."""
    x = as_float_grid(probs, "probs")
    if x.shape[2] > 255:
        raise InvalidInput("label grids hold at most 255 classes")
    # np.argmax returns the first maximal index, which is the tie-break rule.
    return np.argmax(x, axis=2).astype(np.uint8)


def _axis_weights(n_in: int, n_out: int):
    # align-corners: output sample i sits at input coordinate i * (n_in - 1) / (n_out - 1)
    if n_out == 1 or n_in == 1:
        src = np.zeros(n_out)
    else:
        src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    lo = np.minimum(np.floor(src).astype(np.intp), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def bilinear_resize(grid, out_h: int, out_w: int) -> np.ndarray:
    """Resize a float grid with align-corners bilinear interpolation.

    Corner samples map exactly onto corner samples, every channel is
    interpolated independently and the values are not renormalized.
    """
    x = as_float_grid(grid, "map")
    if int(out_h) != out_h or int(out_w) != out_w or out_h < 1 or out_w < 1:
        raise InvalidArgument(f"output size must be positive integers, got {out_h}x{out_w}")
    out_h, out_w = int(out_h), int(out_w)
    h, w, _ = x.shape
    if (h, w) == (out_h, out_w):
        return x.copy()

    lo, hi, t = _axis_weights(h, out_h)
    t = t[:, None, None]
    rows = x[lo] * (1.0 - t) + x[hi] * t

    lo, hi, t = _axis_weights(w, out_w)
    t = t[None, :, None]
    return rows[:, lo] * (1.0 - t) + rows[:, hi] * t
