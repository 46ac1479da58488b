"""Perspective-aware obstacle synthesis and the uniform baseline.

Perspective mode lays a metric grid on the road plane (3.5 m spacing along
the road, 1 m across), jitters each node with zero-mean Gaussian offsets,
projects the surviving nodes into the image, and fills a random subset of
them with cut-outs whose overall pixel size falls inside the local
[obj_min, obj_max] * scale window. Cut-outs are never rescaled: selection
does the size matching. The uniform baseline ignores all of this and drops
unrestricted-size objects on uniformly random road pixels.

Determinism: each frame's randomness comes from a generator seeded by
(master_seed, frame_id), so any frame order or worker count reproduces the
same bytes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .cutouts import CutoutPool, ObjectCutout, query_by_size
from .dataset_io import write_image, write_json, write_label_map
from .geometry import (CameraRig, PixelCoord, back_project, depth_at,
                       project_road_point, scale_at, scale_at_row)

MODE_PERSPECTIVE = "perspective"
MODE_UNIFORM = "uniform"

# Anchors whose size window tops out below this many pixels are beyond use.
MIN_USEFUL_PX = 2.0


@dataclass(frozen=True)
class InjectionConfig:
    grid_depth_m: float = 3.5
    grid_lateral_m: float = 1.0
    jitter_sigma_m: float = 0.5
    obj_min_m: float = 0.25
    obj_max_m: float = 0.55
    fill_probability: float = 0.5
    mode: str = MODE_PERSPECTIVE
    master_seed: int = 0
    feather_px: int = 1
    noise_magnitude: float = 0.0

    def __post_init__(self):
        if self.grid_depth_m <= 0 or self.grid_lateral_m <= 0:
            raise ValueError("grid spacings must be positive")
        if not (0 < self.obj_min_m <= self.obj_max_m):
            raise ValueError(f"need 0 < obj_min_m <= obj_max_m, got "
                             f"[{self.obj_min_m}, {self.obj_max_m}]")
        if not (0.0 <= self.fill_probability <= 1.0):
            raise ValueError(f"fill_probability must be in [0, 1], got {self.fill_probability}")
        if self.jitter_sigma_m < 0:
            raise ValueError("jitter_sigma_m must be nonnegative")
        if self.mode not in (MODE_PERSPECTIVE, MODE_UNIFORM):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.feather_px < 0:
            raise ValueError("feather_px must be nonnegative")
        if self.noise_magnitude < 0:
            raise ValueError("noise_magnitude must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "grid_depth_m": self.grid_depth_m,
            "grid_lateral_m": self.grid_lateral_m,
            "jitter_sigma_m": self.jitter_sigma_m,
            "obj_min_m": self.obj_min_m,
            "obj_max_m": self.obj_max_m,
            "fill_probability": self.fill_probability,
            "mode": self.mode,
            "master_seed": self.master_seed,
            "feather_px": self.feather_px,
            "noise_magnitude": self.noise_magnitude,
        }


@dataclass(frozen=True)
class AnchorPoint:
    ground: tuple[float, float]       # jittered (lateral_m, depth_m)
    node: tuple[float, float]         # grid node before jitter
    pixel: PixelCoord                 # sub-pixel image location
    scale_px_per_m: float


@dataclass(frozen=True)
class InjectionRecord:
    anchor: AnchorPoint
    cutout_source_id: str
    pixel_size_range: tuple[float, float] | None   # None in uniform mode
    placed_size_px: float
    placed_bbox: tuple[int, int, int, int]         # (top row, left col, h, w)

    def to_dict(self) -> dict:
        return {
            "anchor": {
                "ground": list(self.anchor.ground),
                "node": list(self.anchor.node),
                "pixel": [self.anchor.pixel.row, self.anchor.pixel.col],
                "scale_px_per_m": self.anchor.scale_px_per_m,
            },
            "cutout_source_id": self.cutout_source_id,
            "pixel_size_range": list(self.pixel_size_range)
            if self.pixel_size_range is not None else None,
            "placed_size_px": self.placed_size_px,
            "placed_bbox": list(self.placed_bbox),
        }


@dataclass(frozen=True)
class SkipRecord:
    anchor: AnchorPoint
    reason: str
    pixel_size_range: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "anchor": {
                "ground": list(self.anchor.ground),
                "pixel": [self.anchor.pixel.row, self.anchor.pixel.col],
                "scale_px_per_m": self.anchor.scale_px_per_m,
            },
            "reason": self.reason,
            "pixel_size_range": list(self.pixel_size_range),
        }


@dataclass
class FrameSynthesis:
    image: np.ndarray                 # composited uint8 RGB
    labels: np.ndarray                # uint16, 0 = background, k = instance k
    records: list[InjectionRecord] = field(default_factory=list)
    skips: list[SkipRecord] = field(default_factory=list)


def frame_rng(master_seed: int, frame_id: str) -> np.random.Generator:
    """Per-frame generator seeded by (master_seed, frame_id); stable across
    platforms and independent of frame processing order."""
    digest = hashlib.sha256(frame_id.encode("utf-8")).digest()
    frame_key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(
        np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, frame_key]))


def pixel_size_range(anchor: AnchorPoint, cfg: InjectionConfig) -> tuple[float, float]:
    """Allowed overall cut-out size window at this anchor, in pixels."""
    if anchor.scale_px_per_m <= 0:
        raise ValueError(f"anchor at {anchor.pixel} has nonpositive scale "
                         f"{anchor.scale_px_per_m}")
    return (cfg.obj_min_m * anchor.scale_px_per_m,
            cfg.obj_max_m * anchor.scale_px_per_m)


def _road_row_span(road_mask: np.ndarray) -> tuple[int, int]:
    rows = np.nonzero(road_mask.any(axis=1))[0]
    if rows.size == 0:
        raise ValueError("road mask is empty")
    return int(rows[0]), int(rows[-1])


def build_grid(rig: CameraRig, road_mask: np.ndarray, cfg: InjectionConfig,
               rng: np.random.Generator) -> list[AnchorPoint]:
    """Jittered road-plane grid nodes projected into the image.

    Depth rows start at the nearest visible road row and step by
    grid_depth_m until either the local size window would fall below
    MIN_USEFUL_PX or the top of the road mask is passed; lateral nodes span
    the road's metric width at each depth. Nodes landing outside the road
    mask, above the horizon, or off the image after jitter are dropped.
    """
    road_mask = np.asarray(road_mask).astype(bool)
    if road_mask.shape != (rig.image_rows, rig.image_cols):
        raise ValueError(f"road mask shape {road_mask.shape} does not match rig "
                         f"({rig.image_rows}, {rig.image_cols})")
    try:
        top_row, bottom_row = _road_row_span(road_mask)
    except ValueError:
        return []

    horizon = rig.horizon_row
    if bottom_row <= horizon:
        return []
    # depth of the nearest road row, and a far cap from the size window
    d_near = depth_at(rig, PixelCoord(float(bottom_row), rig.principal_col))
    d_scale_cap = rig.focal_px * cfg.obj_max_m / MIN_USEFUL_PX
    top_usable = max(float(top_row), math.floor(horizon) + 1.0)
    d_road_cap = depth_at(rig, PixelCoord(top_usable, rig.principal_col))
    d_far = min(d_scale_cap, d_road_cap)

    anchors: list[AnchorPoint] = []
    depth = d_near
    while depth <= d_far:
        row = project_road_point(rig, (0.0, depth)).row
        row_idx = int(round(row))
        if 0 <= row_idx < rig.image_rows:
            on_cols = np.nonzero(road_mask[row_idx])[0]
            if on_cols.size:
                # metric width of the road at this depth
                x_lo = (on_cols[0] - rig.principal_col) * depth / rig.focal_px
                x_hi = (on_cols[-1] - rig.principal_col) * depth / rig.focal_px
                m_lo = math.ceil(x_lo / cfg.grid_lateral_m)
                m_hi = math.floor(x_hi / cfg.grid_lateral_m)
                for m in range(m_lo, m_hi + 1):
                    node = (m * cfg.grid_lateral_m, depth)
                    if cfg.jitter_sigma_m > 0:
                        offset = rng.normal(0.0, cfg.jitter_sigma_m, size=2)
                        ground = (node[0] + offset[0], node[1] + offset[1])
                    else:
                        ground = node
                    anchor = _anchor_from_ground(rig, road_mask, ground, node)
                    if anchor is not None:
                        anchors.append(anchor)
        depth += cfg.grid_depth_m
    return anchors


def _anchor_from_ground(rig: CameraRig, road_mask: np.ndarray,
                        ground: tuple[float, float],
                        node: tuple[float, float]) -> AnchorPoint | None:
    if ground[1] <= 0:
        return None
    pixel = project_road_point(rig, ground)
    r, c = int(round(pixel.row)), int(round(pixel.col))
    if not (0 <= r < rig.image_rows and 0 <= c < rig.image_cols):
        return None
    if pixel.row <= rig.horizon_row or not road_mask[r, c]:
        return None
    scale = scale_at_row(rig, pixel.row)
    if scale <= 0:
        return None
    return AnchorPoint(ground=ground, node=node, pixel=pixel, scale_px_per_m=scale)


def _feathered_alpha(mask: np.ndarray, feather_px: int) -> np.ndarray:
    """Linear alpha ramp over ``feather_px`` pixels at the mask boundary;
    interior pixels stay at exactly 1."""
    if feather_px == 0:
        return mask.astype(np.float64)
    dist = ndimage.distance_transform_edt(mask)
    return np.clip(dist / (feather_px + 1), 0.0, 1.0)


def _composite(image: np.ndarray, labels: np.ndarray, cutout: ObjectCutout,
               anchor_pixel: PixelCoord, instance_id: int,
               feather_px: int) -> tuple[int, int, int, int]:
    """Paste a cut-out with its bbox bottom-center at the anchor pixel.

    Pixels with full alpha are copied verbatim (no resampling, no blend
    rounding); only the feather ring is blended. Returns the clipped
    (top, left, h, w) region actually written.
    """
    rows, cols = labels.shape
    h, w = cutout.alpha.shape
    bottom = int(round(anchor_pixel.row))
    left = int(round(anchor_pixel.col)) - w // 2
    top = bottom - h + 1

    r0, r1 = max(top, 0), min(bottom, rows - 1)
    c0, c1 = max(left, 0), min(left + w - 1, cols - 1)
    if r0 > r1 or c0 > c1:
        return (r0, c0, 0, 0)

    sr0, sr1 = r0 - top, r1 - top
    sc0, sc1 = c0 - left, c1 - left
    src = cutout.pixels[sr0:sr1 + 1, sc0:sc1 + 1]
    mask = cutout.alpha[sr0:sr1 + 1, sc0:sc1 + 1]
    alpha = _feathered_alpha(cutout.alpha, feather_px)[sr0:sr1 + 1, sc0:sc1 + 1]

    dst = image[r0:r1 + 1, c0:c1 + 1]
    full = alpha >= 1.0
    partial = (alpha > 0.0) & ~full
    dst[full] = src[full]
    if partial.any():
        a = alpha[partial][:, None]
        dst[partial] = np.clip(
            np.rint(src[partial] * a + dst[partial] * (1.0 - a)), 0, 255
        ).astype(np.uint8)
    labels[r0:r1 + 1, c0:c1 + 1][mask] = instance_id
    return (r0, c0, r1 - r0 + 1, c1 - c0 + 1)


def synthesize_frame(image: np.ndarray, road_mask: np.ndarray, rig: CameraRig,
                     pool: CutoutPool, cfg: InjectionConfig,
                     frame_id: str) -> FrameSynthesis:
    """Perspective-aware synthesis of one frame.

    Anchors are processed far-to-near so nearer objects composite over
    farther ones. Selected anchors whose size window holds no cut-out are
    skipped and logged; nothing is ever rescaled to fit.
    """
    image = np.asarray(image)
    road_mask = np.asarray(road_mask).astype(bool)
    if image.shape[:2] != road_mask.shape:
        raise ValueError(f"image {image.shape[:2]} and road mask "
                         f"{road_mask.shape} dims differ")
    rng = frame_rng(cfg.master_seed, frame_id)
    anchors = build_grid(rig, road_mask, cfg, rng)
    anchors.sort(key=lambda a: (-a.ground[1], a.ground[0]))

    result = FrameSynthesis(image=image.copy(),
                            labels=np.zeros(road_mask.shape, dtype=np.uint16))
    next_id = 1
    for anchor in anchors:
        if rng.random() >= cfg.fill_probability:
            continue
        size_range = pixel_size_range(anchor, cfg)
        cutout = query_by_size(pool, size_range[0], size_range[1], rng)
        if cutout is None:
            result.skips.append(SkipRecord(anchor, "no_candidate", size_range))
            continue
        bbox = _composite(result.image, result.labels, cutout, anchor.pixel,
                          next_id, cfg.feather_px)
        result.records.append(InjectionRecord(
            anchor=anchor, cutout_source_id=cutout.source_id,
            pixel_size_range=size_range,
            placed_size_px=cutout.overall_size_px, placed_bbox=bbox))
        next_id += 1
    return result


def synthesize_frame_uniform(image: np.ndarray, road_mask: np.ndarray,
                             rig: CameraRig, pool: CutoutPool,
                             cfg: InjectionConfig, frame_id: str) -> FrameSynthesis:
    """Uniform baseline: same per-frame object budget as perspective mode,
    but placement pixels are uniform over (sub-horizon) road pixels and
    objects come uniformly from the full pool, sizes unrestricted."""
    image = np.asarray(image)
    road_mask = np.asarray(road_mask).astype(bool)
    if image.shape[:2] != road_mask.shape:
        raise ValueError(f"image {image.shape[:2]} and road mask "
                         f"{road_mask.shape} dims differ")
    rng = frame_rng(cfg.master_seed, frame_id)
    n_attempts = len(build_grid(rig, road_mask, cfg, rng))

    below_horizon = np.zeros_like(road_mask)
    first_row = max(0, int(math.floor(rig.horizon_row)) + 1)
    below_horizon[first_row:] = True
    sites = np.argwhere(road_mask & below_horizon)

    result = FrameSynthesis(image=image.copy(),
                            labels=np.zeros(road_mask.shape, dtype=np.uint16))
    if sites.shape[0] == 0 or len(pool) == 0:
        return result
    next_id = 1
    for _ in range(n_attempts):
        if rng.random() >= cfg.fill_probability:
            continue
        r, c = sites[int(rng.integers(sites.shape[0]))]
        pixel = PixelCoord(float(r), float(c))
        cutout = pool.cutouts[int(rng.integers(len(pool)))]
        ground = back_project(rig, pixel)
        anchor = AnchorPoint(ground=ground, node=ground, pixel=pixel,
                             scale_px_per_m=scale_at(rig, pixel))
        bbox = _composite(result.image, result.labels, cutout, pixel,
                          next_id, cfg.feather_px)
        result.records.append(InjectionRecord(
            anchor=anchor, cutout_source_id=cutout.source_id,
            pixel_size_range=None,
            placed_size_px=cutout.overall_size_px, placed_bbox=bbox))
        next_id += 1
    return result


def add_noise(image: np.ndarray, magnitude: float,
              rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Gaussian pixel noise of the given standard deviation,
    clamped to the valid 8-bit range. Magnitude 0 is the identity."""
    if magnitude < 0:
        raise ValueError("noise magnitude must be nonnegative")
    image = np.asarray(image)
    if magnitude == 0:
        return image.copy()
    noisy = image.astype(np.float64) + rng.normal(0.0, magnitude, size=image.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def synthesize_to_dir(image: np.ndarray, road_mask: np.ndarray, rig: CameraRig,
                      pool: CutoutPool, cfg: InjectionConfig, frame_id: str,
                      out_dir: str | Path) -> FrameSynthesis:
    """Run one frame in the configured mode, apply the noise stage, and
    write the per-frame artifact triple."""
    synth_fn = (synthesize_frame if cfg.mode == MODE_PERSPECTIVE
                else synthesize_frame_uniform)
    result = synth_fn(image, road_mask, rig, pool, cfg, frame_id)
    if cfg.noise_magnitude > 0:
        noise_gen = frame_rng(cfg.master_seed, frame_id + "/noise")
        result.image = add_noise(result.image, cfg.noise_magnitude, noise_gen)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_image(out_dir / f"{frame_id}_image.png", result.image)
    write_label_map(out_dir / f"{frame_id}_labels.png", result.labels)
    write_json(out_dir / f"{frame_id}_records.json", {
        "frame_id": frame_id,
        "placements": [r.to_dict() for r in result.records],
        "skips": [s.to_dict() for s in result.skips],
    })
    return result
