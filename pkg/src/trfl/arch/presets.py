"""3D ResNet-50 and Video BagNet architecture presets.

Both share the bottleneck layout of ResNet-50 (3, 4, 6, 3 blocks; 64/128/256/512
bottleneck widths, 4x expansion, projection shortcuts at stage entries). The
BagNet variants shrink temporal kernels, pool only spatially after ``conv1``,
drop temporal padding and widen every channel count.
"""
import json

from ..exceptions import ConfigurationError
from .graph import ArchGraph, GraphBuilder

STAGE_BLOCKS = (3, 4, 6, 3)
STAGE_WIDTHS = (64, 128, 256, 512)
EXPANSION = 4
DOWNSAMPLE_CHOICES = ("bottleneck_entry", "mid_conv")

# temporal kernel of conv1 and of the first block's middle conv in conv2..conv5
BAGNET_KERNELS = {
    1: (1, (1, 1, 1, 1)),
    9: (3, (3, 3, 1, 1)),
    17: (3, (3, 3, 3, 1)),
    33: (3, (3, 3, 3, 3)),
}
BAGNET_WIDTH = {1: 1.40, 9: 1.40, 17: 1.35, 33: 1.25}

PRESET_NAMES = ("resnet50_3d", "video_bagnet_1", "video_bagnet_9", "video_bagnet_17",
                "video_bagnet_33")


def widen(channels, width):
    return max(1, int(round(channels * width)))


def _bottleneck(g, name, in_ch, mid, out, t_kernel, t_pad, stride, downsample_at, projection, crop):
    entry = stride if downsample_at == "bottleneck_entry" else (1, 1, 1)
    middle = stride if downsample_at == "mid_conv" else (1, 1, 1)
    x = g.last
    g.add(f"{name}.conv_a", "conv", kernel=1, stride=entry, in_channels=in_ch, out_channels=mid)
    g.add(f"{name}.bn_a", "batchnorm")
    g.add(f"{name}.relu_a", "relu")
    g.add(f"{name}.conv_b", "conv", kernel=(t_kernel, 3, 3), stride=middle, padding=(t_pad, 1, 1),
          in_channels=mid, out_channels=mid)
    g.add(f"{name}.bn_b", "batchnorm")
    g.add(f"{name}.relu_b", "relu")
    g.add(f"{name}.conv_c", "conv", kernel=1, in_channels=mid, out_channels=out)
    main = g.add(f"{name}.bn_c", "batchnorm")
    shortcut = x
    if projection:
        g.add(f"{name}.shortcut", "conv", inputs=(x,), kernel=1, stride=stride,
              in_channels=in_ch, out_channels=out)
        shortcut = g.add(f"{name}.shortcut_bn", "batchnorm")
    g.add(f"{name}.add", "residual_add", inputs=(main, shortcut), crop=crop)
    g.add(f"{name}.relu", "relu")


def _resnet_body(g, in_ch, width, first_kernels, strides, t_pad_fn, downsample_at, crop):
    for s, (n_blocks, base) in enumerate(zip(STAGE_BLOCKS, STAGE_WIDTHS)):
        mid, out = widen(base, width), widen(base * EXPANSION, width)
        for b in range(n_blocks):
            kt = first_kernels[s](b)
            _bottleneck(g, f"conv{s + 2}_{b + 1}", in_ch, mid, out, kt, t_pad_fn(kt),
                        strides[s] if b == 0 else (1, 1, 1), downsample_at,
                        projection=(b == 0), crop=crop)
            in_ch = out
    return in_ch


def resnet50_3d(width=1.0, n_classes=3, in_channels=3, downsample_at="mid_conv"):
    """3D ResNet-50 with 3x3x3 middle convolutions and a 7x7x7 stem.

    With the default ``mid_conv`` convention its last-layer temporal
    receptive field is 217 frames.
    """
    if downsample_at not in DOWNSAMPLE_CHOICES:
        raise ConfigurationError(f"downsample_at must be one of {DOWNSAMPLE_CHOICES}")
    g = GraphBuilder(in_channels)
    c1 = widen(64, width)
    g.add("conv1", "conv", kernel=7, stride=(1, 2, 2), padding=3, in_channels=in_channels,
          out_channels=c1)
    g.add("bn1", "batchnorm")
    g.add("relu1", "relu")
    g.add("maxpool", "maxpool", kernel=3, stride=2, padding=1)
    strides = ((1, 1, 1), (2, 2, 2), (2, 2, 2), (2, 2, 2))
    c = _resnet_body(g, c1, width, [lambda b: 3] * 4, strides, lambda kt: kt // 2,
                     downsample_at, crop=False)
    g.add("avgpool", "global_pool")
    g.add("fc", "fc", out_channels=n_classes)
    return g.build(preset="resnet50_3d", width=width, n_classes=n_classes,
                   in_channels=in_channels, downsample_at=downsample_at, final_channels=c)


def video_bagnet(rf, width=None, n_classes=3, in_channels=3, downsample_at="bottleneck_entry"):
    """Video BagNet with a temporal receptive field of ``rf`` in {1, 9, 17, 33} frames.

    Temporal padding is zero everywhere and residual sums crop the shortcut to
    the main branch. A stage (conv3..conv5) strides temporally only when its
    first block has a temporal kernel above 1, so BagNet-1 never strides in
    time. ``width`` defaults to the widening factor that keeps the parameter
    count near the ResNet's.
    """
    if rf not in BAGNET_KERNELS:
        raise ConfigurationError(f"video_bagnet rf must be one of {sorted(BAGNET_KERNELS)}, got {rf}")
    if downsample_at not in DOWNSAMPLE_CHOICES:
        raise ConfigurationError(f"downsample_at must be one of {DOWNSAMPLE_CHOICES}")
    width = BAGNET_WIDTH[rf] if width is None else width
    stem_kt, stage_kt = BAGNET_KERNELS[rf]
    g = GraphBuilder(in_channels)
    c1 = widen(64, width)
    g.add("conv1", "conv", kernel=(stem_kt, 7, 7), stride=(1, 2, 2), padding=(0, 3, 3),
          in_channels=in_channels, out_channels=c1)
    g.add("bn1", "batchnorm")
    g.add("relu1", "relu")
    g.add("maxpool", "maxpool", kernel=(1, 3, 3), stride=(1, 2, 2), padding=(0, 1, 1))
    strides = [(1, 1, 1)] + [(2 if kt > 1 else 1, 2, 2) for kt in stage_kt[1:]]
    kernels = [(lambda b, kt=kt: kt if b == 0 else 1) for kt in stage_kt]
    c = _resnet_body(g, c1, width, kernels, strides, lambda kt: 0, downsample_at, crop=True)
    g.add("avgpool", "global_pool")
    g.add("fc", "fc", out_channels=n_classes)
    return g.build(preset=f"video_bagnet_{rf}", width=width, n_classes=n_classes,
                   in_channels=in_channels, downsample_at=downsample_at, final_channels=c)


def normalize_preset_name(name):
    key = name.strip().lower().replace("-", "_")
    aliases = {"rn": "resnet50_3d", "resnet50": "resnet50_3d", "resnet_50_3d": "resnet50_3d"}
    key = aliases.get(key, key)
    if key.startswith("bn") and key[2:].lstrip("_").isdigit():
        key = f"video_bagnet_{key[2:].lstrip('_')}"
    if key not in PRESET_NAMES:
        raise ConfigurationError(f"unknown architecture preset {name!r}; choose from {PRESET_NAMES}")
    return key


def build_preset(name, width=None, n_classes=3, in_channels=3, downsample_at=None):
    """Build a preset by name (``resnet50-3d``, ``video_bagnet_9``, ``bn-17`` ...)."""
    key = normalize_preset_name(name)
    kw = {"n_classes": n_classes, "in_channels": in_channels}
    if downsample_at is not None:
        kw["downsample_at"] = downsample_at
    if key == "resnet50_3d":
        return resnet50_3d(width=1.0 if width is None else width, **kw)
    return video_bagnet(int(key.rsplit("_", 1)[1]), width=width, **kw)


def arch_from_config(cfg):
    """Build from an architecture-description mapping.

    Either ``{"preset": ..., "width": ..., "n_classes": ..., "in_channels": ...,
    "downsample_at": ...}`` or ``{"nodes": [...]}`` with explicit layer nodes.
    """
    if "nodes" in cfg:
        return ArchGraph.from_dict(cfg)
    if "preset" not in cfg:
        raise ConfigurationError("architecture description needs 'preset' or 'nodes'")
    return build_preset(cfg["preset"], width=cfg.get("width"), n_classes=cfg.get("n_classes", 3),
                        in_channels=cfg.get("in_channels", 3),
                        downsample_at=cfg.get("downsample_at"))


def load_arch_file(path):
    with open(path, encoding="utf-8") as fh:
        return arch_from_config(json.load(fh))
