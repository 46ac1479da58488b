"""Toy-scale perspective-aware obstacle detector.

Validates the architecture wiring — a frozen feature pyramid, a decoder
that consumes the perspective channel twice per block, per-pixel BCE
training — on synthesized road scenes, consuming the dataset tooling's
file formats directly.
"""
from .data import Sample, crop_plan, load_injected_dataset, take_crop
from .model import (PERSPECTIVE_NORM, DetectorConfig, FrozenBackbone,
                    PerspectiveDetector, backbone_hash, build_model)
from .pfm import read_pfm, write_pfm
from .train import export_scores, infer, make_optimizer, save_log, train

__all__ = [
    "PERSPECTIVE_NORM", "DetectorConfig", "FrozenBackbone",
    "PerspectiveDetector", "Sample", "backbone_hash", "build_model",
    "crop_plan", "export_scores", "infer", "load_injected_dataset",
    "make_optimizer", "read_pfm", "save_log", "take_crop", "train",
    "write_pfm",
]
