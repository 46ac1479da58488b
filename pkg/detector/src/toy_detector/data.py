"""Loading synthesized road-scene frames into training samples.

Consumes the dataset tooling's on-disk layout directly: an injected
frame directory ({frame}_image.png, {frame}_labels.png,
{frame}_records.json) plus the matching scale-map directory
({frame}_pmap.pfm). Images are scaled to [0,1], scale maps divided by
``PERSPECTIVE_NORM``, and label maps binarized into obstacle targets.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .model import PERSPECTIVE_NORM
from .pfm import read_pfm


@dataclass(frozen=True)
class Sample:
    frame_id: str
    image: torch.Tensor        # (3, H, W) float32 in [0, 1]
    perspective: torch.Tensor  # (1, H, W) float32, scale / PERSPECTIVE_NORM
    target: torch.Tensor       # (1, H, W) float32 binary obstacle mask

    @property
    def height(self) -> int:
        return self.image.shape[-2]

    @property
    def width(self) -> int:
        return self.image.shape[-1]


def load_injected_dataset(frames_dir: str | Path,
                          maps_dir: str | Path) -> list[Sample]:
    frames_dir, maps_dir = Path(frames_dir), Path(maps_dir)
    records = sorted(frames_dir.glob("*_records.json"))
    if not records:
        raise ValueError(f"no synthesized frames under {frames_dir}")
    samples = []
    for record_path in records:
        frame_id = record_path.name[:-len("_records.json")]
        image = np.asarray(Image.open(frames_dir / f"{frame_id}_image.png"))
        labels = np.asarray(Image.open(frames_dir / f"{frame_id}_labels.png"))
        scale = read_pfm(maps_dir / f"{frame_id}_pmap.pfm")
        if image.shape[:2] != labels.shape or image.shape[:2] != scale.shape:
            raise ValueError(f"{frame_id}: image/labels/scale dims differ")
        samples.append(Sample(
            frame_id=frame_id,
            image=torch.from_numpy(
                image.astype(np.float32).transpose(2, 0, 1) / 255.0),
            perspective=torch.from_numpy(
                scale.astype(np.float32) / PERSPECTIVE_NORM)[None],
            target=torch.from_numpy(
                (labels > 0).astype(np.float32))[None],
        ))
    return samples


def crop_plan(samples: list[Sample], crop_height: int, crop_width: int,
              count: int, seed: int) -> list[tuple[int, int, int]]:
    """Pre-defined random (sample index, top, left) crop positions.

    The whole plan is drawn up front from one seeded generator so epoch
    ordering never depends on loader timing.
    """
    rng = np.random.default_rng(seed)
    plan = []
    for _ in range(count):
        idx = int(rng.integers(len(samples)))
        s = samples[idx]
        if s.height < crop_height or s.width < crop_width:
            raise ValueError(
                f"{s.frame_id}: frame {s.height}x{s.width} smaller than "
                f"crop {crop_height}x{crop_width}")
        top = int(rng.integers(s.height - crop_height + 1))
        left = int(rng.integers(s.width - crop_width + 1))
        plan.append((idx, top, left))
    return plan


def take_crop(sample: Sample, top: int, left: int, crop_height: int,
              crop_width: int) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    sl = (..., slice(top, top + crop_height), slice(left, left + crop_width))
    return sample.image[sl], sample.perspective[sl], sample.target[sl]
