"""Perspective-conditioned toy detector.

A small frozen convolutional feature pyramid stands in for a large
pretrained extractor; the trainable decoder concatenates the
(average-pooled) perspective channel both before each block's
convolution and again before its transposed convolution, and ends in a
1-channel logit map at input resolution.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

# Divisor that maps px-per-meter scale values into the unit-ish range the
# network consumes; matches the normalization convention of the dataset
# tooling that produces the scale maps.
PERSPECTIVE_NORM = 400.0


@dataclass(frozen=True)
class DetectorConfig:
    pyramid_levels: int = 4
    base_channels: int = 16
    crop_width: int = 768
    crop_height: int = 384
    learning_rate: float = 1e-4
    lr_drop_factor: float = 0.1
    lr_patience_epochs: int = 5
    epochs: int = 4

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be at least 1")
        if self.base_channels < 1:
            raise ValueError("base_channels must be at least 1")
        stride = 2 ** self.pyramid_levels
        if self.crop_width % stride or self.crop_height % stride:
            raise ValueError(
                f"crop dims {self.crop_width}x{self.crop_height} must be "
                f"divisible by 2^pyramid_levels = {stride}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_drop_factor < 1:
            raise ValueError("lr_drop_factor must be in (0, 1)")
        if self.lr_patience_epochs < 0:
            raise ValueError("lr_patience_epochs must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


class FrozenBackbone(nn.Module):
    """Fixed-weight conv stack emitting one feature map per level, at
    strides 2, 4, ..., 2^levels."""

    def __init__(self, levels: int, base_channels: int):
        super().__init__()
        blocks = []
        c_in = 3
        for i in range(levels):
            c_out = base_channels * (2 ** i)
            blocks.append(nn.Conv2d(c_in, c_out, 3, stride=2, padding=1))
            c_in = c_out
        self.blocks = nn.ModuleList(blocks)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        for conv in self.blocks:
            x = F.relu(conv(x))
            feats.append(x)
        return feats


class DecoderBlock(nn.Module):
    """One up-convolution step: concat perspective, conv, concat
    perspective again, transposed conv (x2 upsampling)."""

    def __init__(self, in_channels: int, mid_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels + 1, mid_channels, 3, padding=1)
        self.up = nn.ConvTranspose2d(mid_channels + 1, out_channels, 2, stride=2)

    def forward(self, x: torch.Tensor, perspective: torch.Tensor) -> torch.Tensor:
        pooled = F.adaptive_avg_pool2d(perspective, x.shape[-2:])
        x = F.relu(self.conv(torch.cat([x, pooled], dim=1)))
        x = F.relu(self.up(torch.cat([x, pooled], dim=1)))
        return x


class PerspectiveDetector(nn.Module):
    def __init__(self, cfg: DetectorConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = FrozenBackbone(cfg.pyramid_levels, cfg.base_channels)
        chans = [cfg.base_channels * (2 ** i) for i in range(cfg.pyramid_levels)]
        blocks = []
        for i in reversed(range(cfg.pyramid_levels)):
            # The block above level i hands down chans[i] channels, which
            # meet the equally wide skip feature; the deepest block sees
            # only the deepest feature.
            in_ch = chans[i] if i == cfg.pyramid_levels - 1 else 2 * chans[i]
            out_ch = chans[i - 1] if i > 0 else cfg.base_channels
            blocks.append(DecoderBlock(in_ch, max(out_ch, cfg.base_channels), out_ch))
        self.decoder = nn.ModuleList(blocks)
        self.head = nn.Conv2d(cfg.base_channels, 1, 3, padding=1)
        # Obstacles cover a small fraction of any road scene; starting the
        # output at a matching low prior keeps early training from being
        # spent on the base rate.
        nn.init.constant_(self.head.bias, -2.0)

    def forward(self, images: torch.Tensor,
                perspective: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or perspective.ndim != 4:
            raise ValueError("expected batched NCHW tensors")
        if images.shape[0] != perspective.shape[0] or \
                images.shape[-2:] != perspective.shape[-2:]:
            raise ValueError(
                f"image {tuple(images.shape)} and perspective "
                f"{tuple(perspective.shape)} dims differ")
        stride = 2 ** self.cfg.pyramid_levels
        h, w = images.shape[-2:]
        if h % stride or w % stride:
            raise ValueError(
                f"input dims {h}x{w} must be divisible by {stride}")
        feats = self.backbone(images)
        x = self.decoder[0](feats[-1], perspective)
        for block, skip in zip(self.decoder[1:], reversed(feats[:-1])):
            x = block(torch.cat([x, skip], dim=1), perspective)
        return self.head(x)


def build_model(cfg: DetectorConfig, seed: int = 0) -> PerspectiveDetector:
    """Deterministically initialized model; the backbone is frozen, the
    decoder and head train."""
    torch.manual_seed(seed)
    return PerspectiveDetector(cfg)


def backbone_hash(model: PerspectiveDetector) -> str:
    """sha256 over the frozen extractor's parameters, in module order."""
    digest = hashlib.sha256()
    for name, param in sorted(model.backbone.named_parameters()):
        digest.update(name.encode())
        digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
