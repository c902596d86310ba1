"""Architecture graphs, presets and their static receptive-field calculus."""
from .calculus import (NodeRF, RFReport, frame_coverage, infer_channels, param_count, rf_calculus, rf_trace,
                       shape_inference)
from .graph import ArchGraph, GraphBuilder, LayerNode
from .presets import (PRESET_NAMES, arch_from_config, build_preset, load_arch_file,
                      normalize_preset_name, resnet50_3d, video_bagnet)

__all__ = [
    "ArchGraph", "GraphBuilder", "LayerNode", "NodeRF", "RFReport", "PRESET_NAMES",
    "arch_from_config", "build_preset", "frame_coverage", "infer_channels", "load_arch_file",
    "normalize_preset_name", "param_count", "resnet50_3d", "rf_calculus", "rf_trace",
    "shape_inference", "video_bagnet",
]
