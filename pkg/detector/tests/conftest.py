"""Session fixtures: synthesize a small dataset through the dataset
tooling's CLI, consuming it only via its documented file formats."""
from __future__ import annotations

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from toy_detector import load_injected_dataset

ROWS, COLS = 192, 320            # divisible by 2^4 for the default pyramid
FOCAL, CAM_HEIGHT, PITCH = 400.0, 1.5, 0.04
PRINCIPAL_ROW, PRINCIPAL_COL = ROWS / 2, COLS / 2
N_FRAMES = 8


def run_pipeline(*args: object) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "roadscale.cli", *map(str, args)],
        capture_output=True, text=True)
    if proc.returncode != 0:
        raise AssertionError(
            f"pipeline command {args[0]} failed:\n{proc.stderr}")


def road_corridor() -> np.ndarray:
    """Straight-road trapezoid below the horizon, 8 m half width."""
    mask = np.zeros((ROWS, COLS), dtype=bool)
    tan_pitch = math.tan(PITCH)
    slant = CAM_HEIGHT / math.cos(PITCH)
    cols = np.arange(COLS)
    for row in range(ROWS):
        denom = FOCAL * tan_pitch - (PRINCIPAL_ROW - row)
        if denom <= 0:
            continue
        depth = slant * FOCAL / denom
        half_px = FOCAL * 8.0 / depth
        mask[row] = np.abs(cols - PRINCIPAL_COL) <= half_px
    return mask


def scatter_ellipses(rng: np.random.Generator, image: np.ndarray,
                     labels: np.ndarray, sizes: list[float],
                     max_row: int) -> None:
    """Labeled ellipse objects (car instances) scattered above the road."""
    occupied = np.zeros_like(labels, dtype=bool)
    for k, target in enumerate(sizes):
        aspect = float(rng.uniform(0.7, 1.4))
        unit = math.sqrt(math.pi) + 2.0 * (aspect + 1.0 / aspect)
        s = max((3.0 * target - 2.0) / unit, 0.5)
        a, b = max(s * aspect, 0.5), max(s / aspect, 0.5)
        rh, rw = math.ceil(b), math.ceil(a)
        for _ in range(60):
            if 2 * rh + 6 >= max_row:
                break
            cy = int(rng.integers(rh + 2, max_row - rh - 2))
            cx = int(rng.integers(rw + 2, COLS - rw - 2))
            box = (slice(cy - rh - 1, cy + rh + 2),
                   slice(cx - rw - 1, cx + rw + 2))
            if occupied[box].any():
                continue
            rr, cc = np.mgrid[box]
            inside = ((cc - cx) / a) ** 2 + ((rr - cy) / b) ** 2 <= 1.0
            image[box][inside] = rng.integers(0, 256, size=3)
            labels[box][inside] = 26 * 1000 + k
            occupied[box] = True
            break


@pytest.fixture(scope="session")
def dataset(tmp_path_factory) -> dict:
    root = tmp_path_factory.mktemp("scene")
    with open(root / "calibration.json", "w") as fh:
        json.dump({"focal_px": FOCAL, "cam_height_m": CAM_HEIGHT,
                   "pitch_rad": PITCH, "principal_row": PRINCIPAL_ROW,
                   "principal_col": PRINCIPAL_COL, "image_rows": ROWS,
                   "image_cols": COLS}, fh)
    road = road_corridor()
    horizon_top = int(np.nonzero(road.any(axis=1))[0][0])
    rng = np.random.default_rng(77)
    ladder = list(np.geomspace(1.5, 45.0, 5 * N_FRAMES))

    frames = []
    for i in range(N_FRAMES):
        frame_id = f"scene{i:03d}"
        gradient = np.linspace(150, 80, ROWS)[:, None, None]
        image = np.clip(gradient + rng.normal(0, 10, (ROWS, COLS, 3)),
                        0, 255).astype(np.uint8)
        labels = np.zeros((ROWS, COLS), dtype=np.uint16)
        scatter_ellipses(rng, image, labels, ladder[i::N_FRAMES],
                         max_row=horizon_top - 2)
        Image.fromarray(image).save(root / f"{frame_id}.png")
        Image.fromarray(labels).save(root / f"{frame_id}_labels.png")
        Image.fromarray(road.astype(np.uint8) * 255).save(
            root / f"{frame_id}_road.png")
        frames.append({"frame_id": frame_id, "image": f"{frame_id}.png",
                       "labels": f"{frame_id}_labels.png",
                       "road_mask": f"{frame_id}_road.png"})
    with open(root / "manifest.json", "w") as fh:
        json.dump({"defaults": {"calibration": "calibration.json"},
                   "frames": frames}, fh)

    maps_dir = root / "maps"
    pool_dir = root / "pool"
    injected_dir = root / "injected"
    manifest = root / "manifest.json"
    run_pipeline("map", "--manifest", manifest, "--out", maps_dir)
    run_pipeline("extract", "--manifest", manifest, "--out", pool_dir)
    run_pipeline("inject", "--manifest", manifest, "--pool", pool_dir,
                 "--out", injected_dir, "--seed", "11", "--fill-prob", "0.7")
    return {"root": root, "manifest": manifest, "maps": maps_dir,
            "pool": pool_dir, "injected": injected_dir}


@pytest.fixture(scope="session")
def samples(dataset):
    loaded = load_injected_dataset(dataset["injected"], dataset["maps"])
    assert len(loaded) == N_FRAMES
    return loaded
