"""Word detection by semantic segmentation with per-word border fences."""

from wordfence.grid import Box, argmax_channels, bilinear_resize, softmax_channels
from wordfence.labelgen import LabelMap, WordAnnotation, class_counts, rasterize_labels
from wordfence.wsloss import LossOutput, compute_class_weights, weighted_softmax_loss

__all__ = [
    "Box",
    "LabelMap",
    "LossOutput",
    "WordAnnotation",
    "argmax_channels",
    "bilinear_resize",
    "class_counts",
    "compute_class_weights",
    "rasterize_labels",
    "softmax_channels",
    "weighted_softmax_loss",
]

__version__ = "0.1.0"
