"""Closed-form ground-plane geometry: scale maps, depth, horizon, pitch.

Coordinate conventions (fixed throughout the package):

  Image frame:
    - row: 0 at the top, increasing downward
    - col: 0 at the left, increasing rightward

  Signed image coordinates, relative to the principal point:
    - u = col - principal_col   (positive right)
    - v = principal_row - row   (positive ABOVE the principal point;
                                 v decreases as row increases)

  Camera frame (meters):
    - x: right, y: up, z: depth along the optical axis
    - a visible road point has z > 0 and y < 0 (road is below the camera)

  The camera sits at height ``cam_height_m`` (perpendicular distance to the
  road plane) with its optical axis pitched down by ``pitch_rad`` relative
  to the road surface (positive = tilted toward the road).

With these conventions, a road point at depth z satisfies

    y = z * tan(pitch) - h0,         h0 = cam_height_m / cos(pitch)
    v = focal_px * y / z

and the pixels-per-meter scale of a meter-wide object resting on the road
at pixel (row, col) is

    scale = (cos(pitch) / cam_height_m) * (focal_px * tan(pitch) - v)

which is positive strictly below the horizon row and nonpositive at or
above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class PixelCoord(NamedTuple):
    """Image location; row/col may be fractional."""

    row: float
    col: float


class RoadPoint(NamedTuple):
    """Camera-frame road point in meters (z > 0 when visible)."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class CameraRig:
    """Calibration parameters from which all geometry is derived."""

    focal_px: float
    cam_height_m: float
    pitch_rad: float
    principal_row: float
    principal_col: float
    image_rows: int
    image_cols: int

    def __post_init__(self):
        for name in ("focal_px", "cam_height_m", "pitch_rad",
                     "principal_row", "principal_col"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"rig parameter {name} is not finite: {value!r}")
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if self.cam_height_m <= 0:
            raise ValueError(f"cam_height_m must be positive, got {self.cam_height_m}")
        if abs(self.pitch_rad) >= math.pi / 2:
            raise ValueError(f"pitch_rad must satisfy |pitch| < pi/2, got {self.pitch_rad}")
        if self.image_rows <= 0 or self.image_cols <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.principal_row <= self.image_rows - 1):
            raise ValueError(f"principal_row {self.principal_row} outside image")
        if not (0 <= self.principal_col <= self.image_cols - 1):
            raise ValueError(f"principal_col {self.principal_col} outside image")

    @property
    def horizon_row(self) -> float:
        """Row where the road plane projects to infinity (may be fractional)."""
        return self.principal_row - self.focal_px * math.tan(self.pitch_rad)

    @property
    def slant_height_m(self) -> float:
        """Distance from camera center to the road along the image-plane vertical (h0)."""
        return self.cam_height_m / math.cos(self.pitch_rad)


@dataclass(frozen=True)
class PerspectiveMap:
    """Per-pixel px-per-meter scale field, clamped to 0 at/above the horizon."""

    values: np.ndarray
    horizon_row: float
    rig: CameraRig


def scale_at_row(rig: CameraRig, row: float) -> float:
    """Pixels-per-meter scale at a (possibly fractional, possibly
    out-of-frame) image row; the field is column-constant. Returns 0.0 at
    and above the horizon, where the closed form goes nonpositive."""
    v = rig.principal_row - row
    raw = (math.cos(rig.pitch_rad) / rig.cam_height_m) * (
        rig.focal_px * math.tan(rig.pitch_rad) - v)
    return raw if raw > 0.0 else 0.0


def scale_at(rig: CameraRig, pix: PixelCoord) -> float:
    """Pixels-per-meter width of a meter-wide object on the road at ``pix``.

    Returns 0.0 at or above the horizon, where the closed form goes
    nonpositive.
    """
    row, col = pix
    if not (0 <= row <= rig.image_rows - 1 and 0 <= col <= rig.image_cols - 1):
        raise ValueError(f"pixel {pix} outside image bounds")
    return scale_at_row(rig, row)


def depth_at(rig: CameraRig, pix: PixelCoord) -> float:
    """Depth z (meters, along the optical axis) of the road point seen at ``pix``.

    Only defined strictly below the horizon; raises elsewhere because the
    viewing ray never meets the road.
    """
    row, _ = pix
    v = rig.principal_row - row
    denom = rig.focal_px * math.tan(rig.pitch_rad) - v
    if denom <= 0:
        raise ValueError(f"pixel {pix} is at or above the horizon; no road intersection")
    return rig.slant_height_m * rig.focal_px / denom


def project_road_point(rig: CameraRig, ground: tuple[float, float]) -> PixelCoord:
    """Project a road-plane point (lateral_m, depth_m) into the image.

    lateral_m is the camera-frame x coordinate (positive right), depth_m the
    z coordinate along the optical axis. The inverse of
    (depth_at, lateral recovery via x = u * z / f).
    """
    lateral_m, depth_m = ground
    if depth_m <= 0:
        raise ValueError(f"depth must be positive, got {depth_m}")
    y = depth_m * math.tan(rig.pitch_rad) - rig.slant_height_m
    v = rig.focal_px * y / depth_m
    u = rig.focal_px * lateral_m / depth_m
    return PixelCoord(row=rig.principal_row - v, col=rig.principal_col + u)


def back_project(rig: CameraRig, pix: PixelCoord) -> tuple[float, float]:
    """Recover (lateral_m, depth_m) of the road point seen at a sub-horizon pixel."""
    z = depth_at(rig, pix)
    u = pix[1] - rig.principal_col
    return (u * z / rig.focal_px, z)


def perspective_map(rig: CameraRig) -> PerspectiveMap:
    """Dense px-per-meter scale field for the whole image.

    Values depend on the row only (column-constant) and are clamped to 0 at
    and above the horizon row.
    """
    rows = np.arange(rig.image_rows, dtype=np.float64)
    v = rig.principal_row - rows
    column = (math.cos(rig.pitch_rad) / rig.cam_height_m) * (
        rig.focal_px * math.tan(rig.pitch_rad) - v)
    np.clip(column, 0.0, None, out=column)
    values = np.broadcast_to(
        column[:, None], (rig.image_rows, rig.image_cols)).astype(np.float32)
    return PerspectiveMap(values=np.ascontiguousarray(values),
                          horizon_row=rig.horizon_row, rig=rig)


# Divisor bringing typical road scales into ~[0, 1] for the detector input.
SCALE_NORM_DIVISOR = 400.0


def normalize(pmap: PerspectiveMap | np.ndarray) -> np.ndarray:
    """Scale-map values divided by the fixed normalization constant (400)."""
    values = pmap.values if isinstance(pmap, PerspectiveMap) else np.asarray(pmap)
    return values / SCALE_NORM_DIVISOR


def estimate_pitch(road_mask: np.ndarray, focal_px: float, principal_row: float,
                   horizon_offset_px: int = 16) -> float:
    """Estimate the camera pitch from the visible road extent.

    Takes the horizon to sit ``horizon_offset_px`` pixels above the
    uppermost road row, then converts the resulting offset from the
    principal row into an angle. May be negative when the horizon falls
    below the principal point.
    """
    mask = np.asarray(road_mask)
    road_rows = np.nonzero(mask.any(axis=1))[0]
    if road_rows.size == 0:
        raise ValueError("road mask is empty")
    r_horiz = float(road_rows[0]) - horizon_offset_px
    v_horiz = principal_row - r_horiz
    return math.atan(v_horiz / focal_px)
