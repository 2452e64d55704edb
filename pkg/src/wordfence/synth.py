"""Seeded synthetic scenes: textured word rectangles on a noisy gray background."""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from wordfence.errors import GenerationError, InvalidArgument
from wordfence.formats import write_image
from wordfence.grid import Box
from wordfence.labelgen import WordAnnotation, save_annotations

MAX_RETRIES = 1000
BACKGROUND_LEVEL = 0.7
INK_LEVEL = 0.06


@dataclass(frozen=True)
class SynthConfig:
    image_h: int = 64
    image_w: int = 64
    words_min: int = 2
    words_max: int = 4
    word_h: tuple[int, int] = (8, 14)
    word_w: tuple[int, int] = (12, 28)
    gap_min: int = 3
    # when set, every word after the first is placed next to an earlier one
    # at a gap in [gap_min, gap_max], producing text-line-like clusters
    gap_max: int | None = None
    noise_sigma: float = 0.04
    texture: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "word_h", tuple(self.word_h))
        object.__setattr__(self, "word_w", tuple(self.word_w))
        problems = []
        if self.image_h < 1 or self.image_w < 1:
            problems.append("image size must be positive")
        if not 1 <= self.words_min <= self.words_max:
            problems.append("need 1 <= words_min <= words_max")
        for name in ("word_h", "word_w"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                problems.append(f"{name} range {lo}..{hi} is invalid")
        if self.word_h[1] > self.image_h or self.word_w[1] > self.image_w:
            problems.append("words may not exceed the image")
        if self.gap_min < 1:
            problems.append("gap_min must be >= 1")
        if self.gap_max is not None and self.gap_max < self.gap_min:
            problems.append("gap_max must be >= gap_min")
        if self.noise_sigma < 0:
            problems.append("noise_sigma must be >= 0")
        if not 0 < self.texture <= 1:
            problems.append("texture must lie in (0, 1]")
        if problems:
            raise InvalidArgument("; ".join(problems))


def chebyshev_gap(a: Box, b: Box) -> int:
    """Pixels of clearance between two boxes (negative when they overlap)."""
    dx = max(b.x0 - a.x1, a.x0 - b.x1)
    dy = max(b.y0 - a.y1, a.y0 - b.y1)
    return max(dx, dy)


def _random_word(rng: np.random.Generator) -> str:
    n = int(rng.integers(2, 9))
    return "".join(rng.choice(list(string.ascii_lowercase), size=n))


def _candidate(rng, cfg: SynthConfig, placed: list[Box]) -> Box:
    h = int(rng.integers(cfg.word_h[0], cfg.word_h[1] + 1))
    w = int(rng.integers(cfg.word_w[0], cfg.word_w[1] + 1))
    if cfg.gap_max is None or not placed:
        y = int(rng.integers(0, cfg.image_h - h + 1))
        x = int(rng.integers(0, cfg.image_w - w + 1))
        return Box(x, y, x + w, y + h)
    anchor = placed[int(rng.integers(len(placed)))]
    gap = int(rng.integers(cfg.gap_min, cfg.gap_max + 1))
    side = rng.choice(4, p=[0.35, 0.35, 0.15, 0.15])
    if side < 2:  # right / left of the anchor, vertically overlapping
        y = int(rng.integers(anchor.y0 - h // 2, anchor.y1 - h // 2 + 1))
        x = anchor.x1 + gap if side == 0 else anchor.x0 - gap - w
    else:  # below / above, horizontally overlapping
        x = int(rng.integers(anchor.x0 - w // 2, anchor.x1 - w // 2 + 1))
        y = anchor.y1 + gap if side == 2 else anchor.y0 - gap - h
    return Box(x, y, x + w, y + h)


def place_words(rng: np.random.Generator, cfg: SynthConfig) -> list[Box]:
    n = int(rng.integers(cfg.words_min, cfg.words_max + 1))
    placed: list[Box] = []
    for _ in range(n):
        for _ in range(MAX_RETRIES):
            box = _candidate(rng, cfg, placed)
            inside = box.x0 >= 0 and box.y0 >= 0 and box.x1 <= cfg.image_w and box.y1 <= cfg.image_h
            if inside and all(chebyshev_gap(box, other) >= cfg.gap_min for other in placed):
                placed.append(box)
                break
        else:
            raise GenerationError(f"could not place word {len(placed) + 1} of {n} after {MAX_RETRIES} tries")
    return placed


def render_glyphs(rng: np.random.Generator, h: int, w: int, density: float) -> np.ndarray:
    """Ink mask of a word: stems 1-2 px apart joined by random bars.

    The first and last columns and the top and bottom rows always carry ink,
    so the annotation box is tight around the rendered word.
    """
    ink = np.zeros((h, w), dtype=bool)
    t = 1 if h < 10 else 2
    stems = []
    x = 0
    while x < w:
        x1 = min(x + t, w)
        r = rng.random()
        if r < density or not stems:
            ink[:, x:x1] = True
        elif r < (1 + density) / 2:
            ink[: (2 * h + 2) // 3, x:x1] = True
        else:
            ink[h // 3:, x:x1] = True
        stems.append((x, x1))
        x = x1 + int(rng.integers(1, 3))
    ink[:, w - t:] = True
    stems.append((w - t, w))

    for (a0, _), (_, b1) in zip(stems, stems[1:]):
        for row in (0, (h - t) // 2, h - t):
            if rng.random() < density / 2:
                ink[row:row + t, a0:b1] = True
    return ink


def generate_scene(config: SynthConfig) -> tuple[np.ndarray, list[WordAnnotation]]:
    """A ``(H, W, 1)`` image in [0, 1] and its exact word annotations."""
    rng = np.random.default_rng(config.seed)
    boxes = place_words(rng, config)
    level = BACKGROUND_LEVEL + rng.uniform(-0.05, 0.05)
    image = np.full((config.image_h, config.image_w), level)
    annotations = []
    for box in boxes:
        ink = render_glyphs(rng, box.height, box.width, config.texture)
        patch = image[box.y0:box.y1, box.x0:box.x1]
        patch[ink] = INK_LEVEL + rng.uniform(-0.04, 0.04)
        annotations.append(WordAnnotation(box, _random_word(rng)))
    if config.noise_sigma > 0:
        image = image + rng.normal(0.0, config.noise_sigma, size=image.shape)
    return np.clip(image, 0.0, 1.0)[:, :, None], annotations


def write_dataset(directory, config: SynthConfig, count: int) -> list[dict]:
    """Write ``count`` scenes with seeds ``config.seed + i`` plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        cfg = _with_seed(config, config.seed + i)
        image, annotations = generate_scene(cfg)
        stem = f"scene_{i:05d}"
        write_image(directory / f"{stem}.pgm", image)
        save_annotations(directory / f"{stem}.json", annotations)
        entries.append({"image": f"{stem}.pgm", "annotations": f"{stem}.json", "seed": cfg.seed})
    manifest = {"config": asdict(config), "scenes": entries}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return entries


def _with_seed(config: SynthConfig, seed: int) -> SynthConfig:
    return SynthConfig(**{**asdict(config), "seed": seed})
