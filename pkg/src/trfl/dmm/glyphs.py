"""Digit sources: MNIST glyphs or procedurally drawn stand-ins."""
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError
from .idx import load_idx

GLYPH_SIZE = 28
SHAPES = ("box", "cross", "disc")


@dataclass(frozen=True, eq=False)
class DigitGlyph:
    """One 28x28 8-bit glyph and where it came from."""

    pixels: np.ndarray
    index: int
    split: str

    def __post_init__(self):
        if self.pixels.shape != (GLYPH_SIZE, GLYPH_SIZE):
            raise ConfigurationError(f"glyph must be {GLYPH_SIZE}x{GLYPH_SIZE}, got {self.pixels.shape}")
        if self.split not in ("train", "test"):
            raise ConfigurationError(f"glyph split must be 'train' or 'test', got {self.split!r}")

    @property
    def glyph_id(self):
        return f"{self.split}:{self.index}"


def glyphs_from_array(images, split):
    return [DigitGlyph(np.asarray(img, dtype=np.uint8), i, split) for i, img in enumerate(images)]


def load_mnist_glyphs(images_path, split):
    images = load_idx(images_path)
    if images.ndim != 3:
        raise ConfigurationError(f"{images_path} holds labels, not images")
    return glyphs_from_array(images, split)


def draw_shape(shape, rng):
    """A 28x28 box, cross or disc with random size, stroke and intensity."""
    yy, xx = np.mgrid[0:GLYPH_SIZE, 0:GLYPH_SIZE]
    c = (GLYPH_SIZE - 1) / 2 + rng.uniform(-2, 2, size=2)
    half = rng.uniform(6, 12)
    stroke = rng.uniform(1.5, 3.5)
    dy, dx = np.abs(yy - c[0]), np.abs(xx - c[1])
    if shape == "box":
        mask = (np.maximum(dy, dx) <= half) & (np.maximum(dy, dx) >= half - stroke)
    elif shape == "cross":
        mask = ((dy <= stroke / 2) & (dx <= half)) | ((dx <= stroke / 2) & (dy <= half))
    elif shape == "disc":
        mask = np.hypot(dy, dx) <= half
    else:
        raise ConfigurationError(f"unknown shape {shape!r}; choose from {SHAPES}")
    return np.where(mask, int(rng.integers(160, 256)), 0).astype(np.uint8)


def synthetic_glyphs(n, split, seed=0):
    """``n`` procedural glyphs cycling through box, cross and disc.

    Used when no MNIST files are supplied. Train and test pools come from
    different random streams, so no glyph is shared between them.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0 if split == "train" else 1,)))
    return [DigitGlyph(draw_shape(SHAPES[i % len(SHAPES)], rng), i, split) for i in range(n)]
