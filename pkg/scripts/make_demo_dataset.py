#!/usr/bin/env python3
"""Generate a small self-contained demo dataset.

Writes a handful of synthetic street-scene frames (textured background, a
straight road corridor, and labeled ellipse "objects" usable as cut-out
sources), a shared calibration sidecar, and a manifest — everything the
CLI needs for an end-to-end run:

    python3 scripts/make_demo_dataset.py --out demo
    roadscale map     --manifest demo/manifest.json --out demo_maps
    roadscale extract --manifest demo/manifest.json --out demo_pool
    roadscale inject  --manifest demo/manifest.json --pool demo_pool \
                      --out demo_injected --seed 42
"""
from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np
from PIL import Image

from roadscale.dataset_io import rig_to_dict, write_json, write_label_map
from roadscale.geometry import CameraRig, perspective_map


def road_corridor(rig: CameraRig, half_width_m: float) -> np.ndarray:
    """Boolean mask of a straight road of the given metric half width."""
    scale_rows = perspective_map(rig).values[:, 0].astype(np.float64)
    half_px = scale_rows * half_width_m
    cols = np.arange(rig.image_cols)
    return np.abs(cols[None, :] - rig.principal_col) <= half_px[:, None]


def textured_background(rng: np.random.Generator, rig: CameraRig,
                        road: np.ndarray) -> np.ndarray:
    """Sky-to-ground gradient with noise; the road corridor drawn darker."""
    rows, cols = rig.image_rows, rig.image_cols
    gradient = np.linspace(170, 90, rows)[:, None, None]
    image = gradient + rng.normal(0.0, 12.0, size=(rows, cols, 3))
    image[road] = image[road] * 0.45 + 30.0
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def scatter_objects(rng: np.random.Generator, image: np.ndarray,
                    labels: np.ndarray, sizes: list[float],
                    class_id: int) -> int:
    """Draw one ellipse per target overall size at a free random spot.

    Labels use the ``class*1000+k`` instance convention. Returns the number
    actually placed (crowded frames may drop some).
    """
    rows, cols = labels.shape
    occupied = np.zeros_like(labels, dtype=bool)
    placed = 0
    for k, target in enumerate(sizes):
        aspect = float(rng.uniform(0.7, 1.4))
        unit = math.sqrt(math.pi) + 2.0 * (aspect + 1.0 / aspect)
        s = max((3.0 * target - 2.0) / unit, 0.5)
        a, b = max(s * aspect, 0.5), max(s / aspect, 0.5)
        rh, rw = math.ceil(b), math.ceil(a)
        for _ in range(40):
            cy = int(rng.integers(rh + 2, rows - rh - 2))
            cx = int(rng.integers(rw + 2, cols - rw - 2))
            box = (slice(cy - rh - 1, cy + rh + 2), slice(cx - rw - 1, cx + rw + 2))
            if occupied[box].any():
                continue
            rr, cc = np.mgrid[box]
            inside = ((cc - cx) / a) ** 2 + ((rr - cy) / b) ** 2 <= 1.0
            color = rng.integers(0, 256, size=3)
            image[box][inside] = color
            labels[box][inside] = class_id * 1000 + k
            occupied[box] = True
            placed += 1
            break
    return placed


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--frames", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--rows", type=int, default=512)
    parser.add_argument("--cols", type=int, default=1024)
    parser.add_argument("--focal", type=float, default=1200.0)
    parser.add_argument("--height", type=float, default=1.5,
                        help="camera height above the road in meters")
    parser.add_argument("--pitch", type=float, default=0.03,
                        help="camera pitch in radians")
    parser.add_argument("--road-half-width", type=float, default=6.0)
    parser.add_argument("--objects-per-frame", type=int, default=12)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rig = CameraRig(focal_px=args.focal, cam_height_m=args.height,
                    pitch_rad=args.pitch, principal_row=args.rows / 2,
                    principal_col=args.cols / 2, image_rows=args.rows,
                    image_cols=args.cols)
    write_json(out / "calibration.json", rig_to_dict(rig))

    # Object sizes span what the size windows ask for across the whole
    # visible depth range of this rig.
    bottom_scale = float(perspective_map(rig).values[args.rows - 1, 0])
    size_hi = max(0.6 * bottom_scale, 12.0)
    rng = np.random.default_rng(args.seed)
    road = road_corridor(rig, args.road_half_width)

    frames = []
    total_objects = 0
    for i in range(args.frames):
        frame_id = f"demo{i:03d}"
        image = textured_background(rng, rig, road)
        labels = np.zeros((args.rows, args.cols), dtype=np.int64)
        sizes = list(np.geomspace(4.0, size_hi, args.objects_per_frame))
        total_objects += scatter_objects(rng, image, labels, sizes, class_id=26)

        Image.fromarray(image).save(out / f"{frame_id}.png")
        write_label_map(out / f"{frame_id}_labels.png", labels)
        Image.fromarray(road.astype(np.uint8) * 255).save(
            out / f"{frame_id}_road.png")
        frames.append({
            "frame_id": frame_id,
            "image": f"{frame_id}.png",
            "labels": f"{frame_id}_labels.png",
            "road_mask": f"{frame_id}_road.png",
        })

    write_json(out / "manifest.json", {
        "defaults": {"calibration": "calibration.json"},
        "frames": frames,
    })
    print(f"wrote {len(frames)} frames ({total_objects} labeled objects) "
          f"to {out}/manifest.json")
    print("next steps:")
    print(f"  roadscale map     --manifest {out}/manifest.json --out {out}_maps")
    print(f"  roadscale extract --manifest {out}/manifest.json --out {out}_pool")
    print(f"  roadscale inject  --manifest {out}/manifest.json "
          f"--pool {out}_pool --out {out}_injected --seed 42")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
