"""Loaders and writers: PFM floats, 16-bit PNG label maps, calibration
sidecars, dataset manifests.

All label/instance maps travel as 16-bit grayscale PNG, float rasters as
PFM ("Pf" header, little-endian float32, bottom-to-top row order), and
metadata as JSON. Manifest paths are resolved relative to the manifest
file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import CameraRig


class DatasetError(ValueError):
    """Raised on malformed manifests, sidecars, or raster files."""


# ---------------------------------------------------------------------------
# PFM

def write_pfm(path: str | Path, raster: np.ndarray) -> None:
    """Write a 2-D float raster as a grayscale little-endian PFM."""
    data = np.asarray(raster, dtype=np.float32)
    if data.ndim != 2:
        raise DatasetError(f"PFM raster must be 2-D, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise DatasetError("PFM raster contains non-finite values")
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{cols} {rows}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        # PFM stores rows bottom-to-top
        fh.write(np.ascontiguousarray(data[::-1]).astype("<f4").tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a grayscale PFM written by :func:`write_pfm` (bit-exact round trip)."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"Pf":
            raise DatasetError(f"{path}: not a grayscale PFM (header {magic!r})")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise DatasetError(f"{path}: malformed PFM dimension line")
        cols, rows = int(dims[0]), int(dims[1])
        scale = float(fh.readline())
        if scale >= 0:
            raise DatasetError(f"{path}: big-endian PFM not supported (scale {scale})")
        payload = fh.read(rows * cols * 4)
        if len(payload) != rows * cols * 4:
            raise DatasetError(f"{path}: truncated PFM payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    if np.isnan(data).any():
        raise DatasetError(f"{path}: PFM contains NaN")
    return np.ascontiguousarray(data[::-1])


# ---------------------------------------------------------------------------
# PNG rasters

def write_image(path: str | Path, image: np.ndarray) -> None:
    """Write an 8-bit RGB (H, W, 3) image."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise DatasetError(f"expected uint8 (H, W, 3) image, got {arr.dtype} {arr.shape}")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def write_label_map(path: str | Path, labels: np.ndarray) -> None:
    """Write a nonnegative integer map as 16-bit grayscale PNG."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise DatasetError(f"label map must be 2-D, got shape {arr.shape}")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 0xFFFF:
        raise DatasetError("label values outside the 16-bit range")
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


def read_label_map(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise DatasetError(f"{path}: label map must be single-channel, got shape {arr.shape}")
    return arr.astype(np.int64)


def read_mask(path: str | Path) -> np.ndarray:
    """Read a mask PNG as boolean (nonzero = on)."""
    return read_label_map(path) != 0


# ---------------------------------------------------------------------------
# Calibration sidecars

_CALIB_REQUIRED = ("focal_px", "cam_height_m", "image_rows", "image_cols")


def rig_from_dict(data: dict, source: str = "<dict>") -> CameraRig:
    """Build a CameraRig from sidecar JSON contents.

    ``pitch_rad`` must be present (estimate it first if the dataset lacks
    one). The principal point defaults to the image center when omitted.
    """
    for key in _CALIB_REQUIRED:
        if key not in data:
            raise DatasetError(f"{source}: calibration missing key {key!r}")
    if "pitch_rad" not in data:
        raise DatasetError(
            f"{source}: calibration has no pitch_rad; estimate one (estimate-pitch) first")
    rows, cols = int(data["image_rows"]), int(data["image_cols"])
    try:
        return CameraRig(
            focal_px=float(data["focal_px"]),
            cam_height_m=float(data["cam_height_m"]),
            pitch_rad=float(data["pitch_rad"]),
            principal_row=float(data.get("principal_row", rows / 2)),
            principal_col=float(data.get("principal_col", cols / 2)),
            image_rows=rows,
            image_cols=cols,
        )
    except ValueError as exc:
        raise DatasetError(f"{source}: {exc}") from exc


def load_calibration(path: str | Path) -> CameraRig:
    path = Path(path)
    with open(path) as fh:
        return rig_from_dict(json.load(fh), source=str(path))


def rig_to_dict(rig: CameraRig) -> dict:
    return {
        "focal_px": rig.focal_px,
        "cam_height_m": rig.cam_height_m,
        "pitch_rad": rig.pitch_rad,
        "principal_row": rig.principal_row,
        "principal_col": rig.principal_col,
        "image_rows": rig.image_rows,
        "image_cols": rig.image_cols,
    }


# ---------------------------------------------------------------------------
# Manifests

@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    image_path: Path
    calibration_path: Path
    labels_path: Path | None = None
    road_mask_path: Path | None = None

    def load_rig(self) -> CameraRig:
        return load_calibration(self.calibration_path)


@dataclass(frozen=True)
class DatasetManifest:
    frames: list[FrameRecord]
    root: Path

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Per-frame calibration resolution: frame sidecar, then the dataset-level
    default, else an error naming the frame.
    """
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    root = path.parent
    defaults = data.get("defaults", {})
    default_calib = defaults.get("calibration")

    frames: list[FrameRecord] = []
    seen: set[str] = set()
    for entry in data.get("frames", []):
        frame_id = entry.get("frame_id")
        if not frame_id:
            raise DatasetError(f"{path}: frame entry without frame_id: {entry}")
        if frame_id in seen:
            raise DatasetError(f"{path}: duplicate frame_id {frame_id!r}")
        seen.add(frame_id)

        calib = entry.get("calibration", default_calib)
        if calib is None:
            raise DatasetError(f"{path}: frame {frame_id!r} has no calibration "
                               "and the manifest defines no default")

        def _resolve(rel: str | None, kind: str) -> Path | None:
            if rel is None:
                return None
            resolved = root / rel
            if not resolved.is_file():
                raise DatasetError(f"{path}: frame {frame_id!r} {kind} missing: {resolved}")
            return resolved

        image = _resolve(entry.get("image"), "image")
        if image is None:
            raise DatasetError(f"{path}: frame {frame_id!r} has no image")
        frames.append(FrameRecord(
            frame_id=frame_id,
            image_path=image,
            calibration_path=_resolve(calib, "calibration"),
            labels_path=_resolve(entry.get("labels"), "labels"),
            road_mask_path=_resolve(entry.get("road_mask"), "road_mask"),
        ))
    return DatasetManifest(frames=frames, root=root)


def write_json(path: str | Path, payload: dict) -> None:
    """Deterministic JSON writer (sorted keys, stable float repr)."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# Cityscapes class ids for the instance-bearing and paper-eligible classes;
# accepted as the default when no mapping file is given.
CITYSCAPES_CLASS_TABLE = {
    19: "traffic light",
    20: "traffic sign",
    24: "person",
    25: "rider",
    26: "car",
    27: "truck",
    28: "bus",
    29: "caravan",
    30: "trailer",
    31: "train",
    32: "motorcycle",
    33: "bicycle",
}
