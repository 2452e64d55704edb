"""Connected text components and their bounding boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from wordfence.errors import InvalidArgument
from wordfence.grid import NUM_CLASSES, TEXT, Box, as_label_grid

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class ComponentMap:
    ids: np.ndarray  # uint32, 0 = not part of any component
    count: int
    sizes: np.ndarray  # sizes[i] = pixel count of component i + 1
    extents: tuple[Box, ...]  # tight box of component i + 1


def connected_components(labels, target_class: int = TEXT, connectivity: int = 4,
                         num_classes: int = 256) -> ComponentMap:
    """Label connected regions of ``target_class``.

    Ids are dense from 1 and follow raster-scan order of each component's
    first pixel.
    """
    if connectivity not in _STRUCTURE:
        raise InvalidArgument(f"connectivity must be 4 or 8, got {connectivity}")
    grid = as_label_grid(labels, num_classes)
    raw, count = ndimage.label(grid == target_class, structure=_STRUCTURE[connectivity])

    # renumber by first occurrence in raster order
    flat = raw.ravel()
    first = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size))
    order = np.argsort(first[1:], kind="stable") + 1
    remap = np.zeros(count + 1, dtype=np.uint32)
    remap[order] = np.arange(1, count + 1, dtype=np.uint32)
    ids = remap[raw]

    sizes = np.bincount(ids.ravel(), minlength=count + 1)[1:].astype(np.int64)
    extents = tuple(Box(sx.start, sy.start, sx.stop, sy.stop)
                    for sy, sx in ndimage.find_objects(ids.astype(np.int32)))
    return ComponentMap(ids=ids, count=int(count), sizes=sizes, extents=extents)


def components_to_boxes(components: ComponentMap, min_area: int = 6, expand: int = 0) -> list[Box]:
    """One box per component with at least ``min_area`` pixels, sorted by (y0, x0)."""
    if min_area < 0 or expand < 0:
        raise InvalidArgument("min_area and expand must be non-negative")
    h, w = components.ids.shape
    boxes = []
    for size, box in zip(components.sizes, components.extents):
        if size < min_area:
            continue
        if expand:
            x0, y0, x1, y1 = box.expanded(expand)
            box = Box(max(x0, 0), max(y0, 0), min(x1, w), min(y1, h))
        boxes.append(box)
    return sorted(boxes, key=lambda b: (b.y0, b.x0, b.y1, b.x1))


def extract_boxes(labels, min_area: int = 6, expand: int = 0, connectivity: int = 4) -> list[Box]:
    grid = as_label_grid(labels, NUM_CLASSES)
    return components_to_boxes(connected_components(grid, TEXT, connectivity), min_area, expand)
