"""Split construction for the directional moving-glyph dataset.

Every video draws from its own PCG64 stream keyed by ``(seed, split, index)``,
so any single video can be regenerated without the others and the output
does not depend on generation order. The two test splits share the content
stream and differ only by the permutation coin, which has a stream of its
own.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import ConfigurationError, GenerationError
from .glyphs import GLYPH_SIZE, synthetic_glyphs
from .render import render_trajectory

SPLITS = ("train", "test_noperm", "test_perm")
CANONICAL_CLASSES = (("vertical", "horizontal"), ("vertical", "diagonal"), ("horizontal", "diagonal"))

_CONTENT_STREAM = {"train": 0, "test_noperm": 1, "test_perm": 1}
_COIN_STREAM = 2


def _default_permutation():
    return {"train": 0.0, "test_noperm": 0.0, "test_perm": 0.5}


@dataclass
class DMMConfig:
    """Dataset description.

    Attributes:
        canvas: ``(H, W)`` of every frame.
        d: frames per sub-action; clips have ``2 * d`` frames.
        speeds: pixels per frame, one drawn per video.
        classes: ordered sub-action pair per class index.
        videos_per_class: videos of each class in every split.
        permutation_probability: chance per split that a video plays its
            sub-actions in reverse order. ``test_noperm`` is always 0.
        seed: master seed.
        glyph_size: side of the glyph as drawn on the canvas; must divide 28.
            Values below 28 shrink glyphs by block averaging.
    """

    canvas: tuple = (64, 64)
    d: int = 16
    speeds: tuple = (1, 2)
    classes: tuple = CANONICAL_CLASSES
    videos_per_class: int = 1000
    permutation_probability: dict = field(default_factory=_default_permutation)
    seed: int = 0
    glyph_size: int = GLYPH_SIZE

    def __post_init__(self):
        self.canvas = tuple(int(v) for v in self.canvas)
        self.speeds = tuple(int(v) for v in self.speeds)
        self.classes = tuple(tuple(pair) for pair in self.classes)
        probs = _default_permutation()
        probs.update(self.permutation_probability or {})
        self.permutation_probability = {k: float(v) for k, v in probs.items()}
        self.validate()

    def validate(self):
        if len(self.canvas) != 2:
            raise ConfigurationError(f"canvas must be (H, W), got {self.canvas}")
        if self.d < 1:
            raise ConfigurationError(f"d must be >= 1, got {self.d}")
        if not self.speeds or min(self.speeds) < 0:
            raise ConfigurationError(f"speeds must be non-empty and non-negative, got {self.speeds}")
        if self.videos_per_class < 1:
            raise ConfigurationError(f"videos_per_class must be >= 1, got {self.videos_per_class}")
        if len(self.classes) != 3 or any(len(p) != 2 for p in self.classes):
            raise ConfigurationError(f"classes must be three sub-action pairs, got {self.classes}")
        if {frozenset(p) for p in self.classes} != {frozenset(p) for p in CANONICAL_CLASSES}:
            raise ConfigurationError(
                f"classes must be the pairs {{V,H}}, {{V,D}}, {{H,D}}, got {self.classes}")
        unknown = set(self.permutation_probability) - set(SPLITS)
        if unknown:
            raise ConfigurationError(f"permutation_probability has unknown splits {sorted(unknown)}")
        for name, p in self.permutation_probability.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"permutation_probability[{name!r}] = {p} outside [0, 1]")
        if self.permutation_probability["test_noperm"] != 0.0:
            raise ConfigurationError("permutation_probability['test_noperm'] must be 0")
        if self.glyph_size < 1 or GLYPH_SIZE % self.glyph_size:
            raise ConfigurationError(f"glyph_size must divide {GLYPH_SIZE}, got {self.glyph_size}")
        if min(self.canvas) < self.glyph_size:
            raise GenerationError(
                f"canvas {self.canvas} is smaller than the {self.glyph_size}px glyph", "canvas")

    @property
    def frames(self):
        return 2 * self.d

    def to_dict(self):
        out = asdict(self)
        out["canvas"] = list(self.canvas)
        out["speeds"] = list(self.speeds)
        out["classes"] = [list(p) for p in self.classes]
        return out

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown dataset config keys {sorted(extra)}")
        return cls(**data)


@dataclass(eq=False)
class VideoSample:
    frames: np.ndarray
    label: int
    segments: tuple
    permuted: bool
    provenance: dict
    index: int = 0

    def metadata(self):
        return {"index": self.index, "label": self.label, "permuted": self.permuted,
                "segments": [list(s) for s in self.segments], "provenance": self.provenance}


@dataclass(eq=False)
class Split:
    name: str
    config: dict
    samples: list

    def __len__(self):
        return len(self.samples)

    @property
    def labels(self):
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def arrays(self, normalize=True):
        """Stack into ``(N, 1, T, H, W)`` inputs and ``(N,)`` labels.

        With ``normalize`` the 8-bit frames become ``float32`` in ``[0, 1]``.
        """
        x = np.stack([s.frames for s in self.samples])[:, None]
        if normalize:
            x = x.astype(np.float32) / np.float32(255)
        return x, self.labels


def _stream(*key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key[0], spawn_key=key[1:])))


def shrink_glyph(pixels, size):
    f = GLYPH_SIZE // size
    if f == 1:
        return np.asarray(pixels, dtype=np.uint8)
    blocks = np.asarray(pixels, dtype=np.float64).reshape(size, f, size, f).mean(axis=(1, 3))
    return np.rint(blocks).astype(np.uint8)


def generate_video(config, split, index, glyphs):
    """Render video ``index`` of ``split`` using glyph pool ``glyphs``."""
    if split not in SPLITS:
        raise ConfigurationError(f"unknown split {split!r}; choose from {SPLITS}")
    n_total = 3 * config.videos_per_class
    if not 0 <= index < n_total:
        raise ConfigurationError(f"video index {index} outside [0, {n_total})")
    label = index // config.videos_per_class
    rng = _stream(config.seed, _CONTENT_STREAM[split], index)
    glyph = glyphs[int(rng.integers(len(glyphs)))]
    speed = int(config.speeds[int(rng.integers(len(config.speeds)))])
    signs = rng.choice(np.array([-1, 1]), size=4)
    direction = {"vertical": (int(signs[0]), 0), "horizontal": (0, int(signs[1])),
                 "diagonal": (int(signs[2]), int(signs[3]))}
    size = config.glyph_size
    start = (int(rng.integers(config.canvas[0] - size + 1)),
             int(rng.integers(config.canvas[1] - size + 1)))

    coin = _stream(config.seed, _COIN_STREAM, SPLITS.index(split), index)
    permuted = bool(coin.random() < config.permutation_probability[split])
    order = config.classes[label][::-1] if permuted else config.classes[label]

    frames = render_trajectory(shrink_glyph(glyph.pixels, size), start, order, speed, direction,
                               config.d, config.canvas)
    segments = tuple((name, i * config.d, (i + 1) * config.d) for i, name in enumerate(order))
    provenance = {"glyph_id": glyph.glyph_id, "start_pos": list(start), "speed": speed,
                  "direction_signs": {name: list(direction[name]) for name in order}}
    return VideoSample(frames, label, segments, permuted, provenance, index)


def generate(config, train_glyphs=None, test_glyphs=None, splits=SPLITS):
    """Build the requested splits (all three by default).

    Train videos draw from ``train_glyphs`` and test videos from
    ``test_glyphs``. Missing pools fall back to procedural glyphs.

    Returns:
        dict mapping split name to :class:`Split`.
    """
    if train_glyphs is None:
        train_glyphs = synthetic_glyphs(300, "train", config.seed)
    if test_glyphs is None:
        test_glyphs = synthetic_glyphs(300, "test", config.seed)
    for pool, name in ((train_glyphs, "train"), (test_glyphs, "test")):
        if len(pool) == 0:
            raise ConfigurationError(f"{name} glyph pool is empty")
    echo = config.to_dict()
    out = {}
    for split in splits:
        pool = train_glyphs if split == "train" else test_glyphs
        samples = [generate_video(config, split, i, pool) for i in range(3 * config.videos_per_class)]
        out[split] = Split(split, echo, samples)
    return out

