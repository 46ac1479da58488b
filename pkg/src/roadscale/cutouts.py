"""Object cut-out extraction and the size-indexed pool.

A cut-out's overall size is the mean of three values: sqrt of its pixel
area, bounding-box width, and bounding-box height. The pool keeps cut-outs
sorted by that statistic so size-interval queries are range lookups.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .dataset_io import (DatasetError, read_image, read_label_map, write_image,
                         write_label_map, write_json)


def overall_size(area_px: int, bbox_w: int, bbox_h: int) -> float:
    """Mean of sqrt(area), bbox width, and bbox height, in pixels."""
    return (float(np.sqrt(area_px)) + bbox_w + bbox_h) / 3.0


@dataclass(frozen=True)
class ObjectCutout:
    pixels: np.ndarray      # (bbox_h, bbox_w, 3) uint8
    alpha: np.ndarray       # (bbox_h, bbox_w) bool
    bbox_w: int
    bbox_h: int
    area_px: int
    overall_size_px: float
    source_id: str
    class_label: str


# Cityscapes encodes instances as class_id * 1000 + index; plain class ids
# below this are semantic-only pixels.
_INSTANCE_ID_BASE = 1000


def _instance_class_id(value: int) -> int:
    return value // _INSTANCE_ID_BASE if value >= _INSTANCE_ID_BASE else value


def _cutout_from_support(image: np.ndarray, support: np.ndarray,
                         source_id: str, class_label: str) -> ObjectCutout | None:
    """Build a cut-out from an instance's boolean support; None if it
    touches the frame border (truncated shapes are not injectable)."""
    rows = np.nonzero(support.any(axis=1))[0]
    cols = np.nonzero(support.any(axis=0))[0]
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    h, w = support.shape
    if r0 == 0 or c0 == 0 or r1 == h - 1 or c1 == w - 1:
        return None
    alpha = support[r0:r1 + 1, c0:c1 + 1].copy()
    area = int(alpha.sum())
    bbox_h, bbox_w = alpha.shape
    return ObjectCutout(
        pixels=image[r0:r1 + 1, c0:c1 + 1].copy(),
        alpha=alpha,
        bbox_w=bbox_w,
        bbox_h=bbox_h,
        area_px=area,
        overall_size_px=overall_size(area, bbox_w, bbox_h),
        source_id=source_id,
        class_label=class_label,
    )


def extract_cutouts(image: np.ndarray, instance_labels: np.ndarray,
                    eligible_classes: set[str], class_table: dict[int, str],
                    frame_id: str = "frame") -> list[ObjectCutout]:
    """Extract one cut-out per eligible instance in a labeled frame.

    Instance encoding follows Cityscapes: values >= 1000 are class*1000+k
    instances; eligible class ids appearing only as plain semantic labels
    (e.g. traffic signs) are split into 8-connected components, one
    pseudo-instance each. Instances touching the frame border are skipped.
    """
    image = np.asarray(image)
    labels = np.asarray(instance_labels)
    if image.shape[:2] != labels.shape:
        raise DatasetError(
            f"image {image.shape[:2]} and labels {labels.shape} dims differ")

    cutouts: list[ObjectCutout] = []
    for value in np.unique(labels):
        value = int(value)
        if value == 0:
            continue
        class_id = _instance_class_id(value)
        class_label = class_table.get(class_id)
        if class_label is None or class_label not in eligible_classes:
            continue
        support = labels == value
        if value >= _INSTANCE_ID_BASE:
            cut = _cutout_from_support(image, support,
                                       f"{frame_id}/{value}", class_label)
            if cut is not None:
                cutouts.append(cut)
        else:
            # semantic-only class: each connected component is one instance
            comp, n = ndimage.label(support, structure=np.ones((3, 3), dtype=int))
            for k in range(1, n + 1):
                cut = _cutout_from_support(image, comp == k,
                                           f"{frame_id}/{value}c{k}", class_label)
                if cut is not None:
                    cutouts.append(cut)
    return cutouts


@dataclass
class CutoutPool:
    """Immutable-after-build collection of cut-outs, indexed by overall size."""

    cutouts: list[ObjectCutout] = field(default_factory=list)

    def __post_init__(self):
        self.cutouts = sorted(self.cutouts, key=lambda c: (c.overall_size_px, c.source_id))
        self._sizes = [c.overall_size_px for c in self.cutouts]

    def __len__(self) -> int:
        return len(self.cutouts)

    def candidates(self, min_px: float, max_px: float) -> list[ObjectCutout]:
        if min_px > max_px:
            raise ValueError(f"inverted size interval [{min_px}, {max_px}]")
        lo = bisect.bisect_left(self._sizes, min_px)
        hi = bisect.bisect_right(self._sizes, max_px)
        return self.cutouts[lo:hi]


def query_by_size(pool: CutoutPool, min_px: float, max_px: float,
                  rng: np.random.Generator) -> ObjectCutout | None:
    """Uniform random cut-out with overall size in [min_px, max_px]; None
    when no cut-out qualifies."""
    candidates = pool.candidates(min_px, max_px)
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


# ---------------------------------------------------------------------------
# Persistence: paired PNGs plus a JSON manifest

def _slug(source_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", source_id)


def save_pool(pool: CutoutPool, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, cut in enumerate(pool.cutouts):
        stem = f"{i:05d}_{_slug(cut.source_id)}"
        write_image(out_dir / f"{stem}_rgb.png", cut.pixels)
        write_label_map(out_dir / f"{stem}_mask.png", cut.alpha.astype(np.uint16))
        entries.append({
            "source_id": cut.source_id,
            "class_label": cut.class_label,
            "bbox_w": cut.bbox_w,
            "bbox_h": cut.bbox_h,
            "area_px": cut.area_px,
            "overall_size_px": cut.overall_size_px,
            "rgb": f"{stem}_rgb.png",
            "mask": f"{stem}_mask.png",
        })
    write_json(out_dir / "manifest.json", {"cutouts": entries})


def load_pool(pool_dir: str | Path) -> CutoutPool:
    pool_dir = Path(pool_dir)
    with open(pool_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    cutouts = []
    for entry in manifest["cutouts"]:
        pixels = read_image(pool_dir / entry["rgb"])
        alpha = read_label_map(pool_dir / entry["mask"]) != 0
        area = int(alpha.sum())
        bbox_h, bbox_w = alpha.shape
        if area != entry["area_px"] or bbox_w != entry["bbox_w"] or bbox_h != entry["bbox_h"]:
            raise DatasetError(f"pool entry {entry['source_id']!r} does not match its mask")
        cutouts.append(ObjectCutout(
            pixels=pixels, alpha=alpha, bbox_w=bbox_w, bbox_h=bbox_h,
            area_px=area, overall_size_px=overall_size(area, bbox_w, bbox_h),
            source_id=entry["source_id"], class_label=entry["class_label"]))
    return CutoutPool(cutouts)


# Paper-eligible source classes: vehicles, pedestrians, traffic signs/lights.
DEFAULT_ELIGIBLE_CLASSES = {
    "car", "truck", "bus", "caravan", "trailer", "train", "motorcycle",
    "bicycle", "person", "rider", "traffic sign", "traffic light",
}
