"""Directional moving-glyph video dataset."""
from .container import read_container, write_container
from .generate import (CANONICAL_CLASSES, SPLITS, DMMConfig, Split, VideoSample, generate,
                       generate_video, shrink_glyph)
from .glyphs import DigitGlyph, glyphs_from_array, load_mnist_glyphs, synthetic_glyphs
from .idx import encode_idx, load_idx, parse_idx
from .render import SUB_ACTIONS, bounce, render_trajectory, trajectory

__all__ = [
    "CANONICAL_CLASSES", "SPLITS", "SUB_ACTIONS", "DMMConfig", "DigitGlyph", "Split", "VideoSample",
    "bounce", "encode_idx", "generate", "generate_video", "glyphs_from_array", "load_idx",
    "load_mnist_glyphs", "parse_idx", "read_container", "render_trajectory", "shrink_glyph",
    "synthetic_glyphs", "trajectory", "write_container",
]
