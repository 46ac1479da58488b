#!/usr/bin/env python3
"""Emit a dataset manifest for a Cityscapes-style directory tree.

Expects the standard layout:

    <root>/leftImg8bit/<split>/<city>/<stem>_leftImg8bit.png
    <root>/gtFine/<split>/<city>/<stem>_gtFine_instanceIds.png   (optional)
    <root>/gtFine/<split>/<city>/<stem>_gtFine_labelIds.png      (optional)
    <root>/camera/<split>/<city>/<stem>_camera.json              (optional)

Per frame it references the image and (when present) the instance label
map, converts the vendor camera JSON into a calibration sidecar, and can
derive a road mask from the labelIds map (`--road-masks`). Frames without
a camera JSON fall back to `--calibration`; the run aborts if neither is
available, since every frame needs calibration downstream.

The manifest and its sidecars are written next to `--out`; source files
are referenced in place, never copied.
"""
from __future__ import annotations

import argparse
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

from roadscale.dataset_io import DatasetError, write_json

ROAD_CLASS_ID = 7  # the standard Cityscapes labelIds value for "road"


def convert_camera_json(camera: dict, image_size: tuple[int, int],
                        source: str) -> dict:
    """Vendor camera JSON -> calibration sidecar contents."""
    try:
        intrinsic = camera["intrinsic"]
        extrinsic = camera["extrinsic"]
        return {
            "focal_px": float(intrinsic["fx"]),
            "cam_height_m": float(extrinsic["z"]),
            "pitch_rad": float(extrinsic["pitch"]),
            "principal_row": float(intrinsic["v0"]),
            "principal_col": float(intrinsic["u0"]),
            "image_rows": image_size[0],
            "image_cols": image_size[1],
        }
    except KeyError as exc:
        raise DatasetError(f"{source}: camera JSON missing key {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cityscapes-root", required=True)
    parser.add_argument("--split", default="train")
    parser.add_argument("--out", required=True, help="output manifest path")
    parser.add_argument("--calibration", default=None,
                        help="fallback calibration sidecar for frames "
                             "without a camera JSON")
    parser.add_argument("--road-masks", action="store_true",
                        help="derive road masks from gtFine labelIds")
    parser.add_argument("--road-class", type=int, default=ROAD_CLASS_ID)
    parser.add_argument("--limit", type=int, default=None,
                        help="convert at most this many frames")
    args = parser.parse_args(argv)

    root = Path(args.cityscapes_root)
    image_dir = root / "leftImg8bit" / args.split
    if not image_dir.is_dir():
        raise DatasetError(f"no image directory at {image_dir}")
    images = sorted(image_dir.glob("*/*_leftImg8bit.png"))
    if args.limit is not None:
        images = images[:args.limit]
    if not images:
        raise DatasetError(f"no *_leftImg8bit.png frames under {image_dir}")

    out_path = Path(args.out)
    out_dir = out_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    def rel(target: Path) -> str:
        return os.path.relpath(target, out_dir)

    frames = []
    n_masks = n_cameras = 0
    for image_path in images:
        city = image_path.parent.name
        stem = image_path.name[:-len("_leftImg8bit.png")]
        frame_id = f"{city}/{stem}"
        entry: dict = {"frame_id": frame_id, "image": rel(image_path)}

        gt_dir = root / "gtFine" / args.split / city
        instances = gt_dir / f"{stem}_gtFine_instanceIds.png"
        if instances.is_file():
            entry["labels"] = rel(instances)

        label_ids = gt_dir / f"{stem}_gtFine_labelIds.png"
        if args.road_masks and label_ids.is_file():
            arr = np.asarray(Image.open(label_ids))
            mask_path = out_dir / "road_masks" / city / f"{stem}.png"
            mask_path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(
                (arr == args.road_class).astype(np.uint8) * 255).save(mask_path)
            entry["road_mask"] = rel(mask_path)
            n_masks += 1

        camera_path = root / "camera" / args.split / city / f"{stem}_camera.json"
        if camera_path.is_file():
            with open(camera_path) as fh:
                camera = json.load(fh)
            with Image.open(image_path) as im:
                size = (im.height, im.width)
            sidecar = out_dir / "calibration" / city / f"{stem}.json"
            sidecar.parent.mkdir(parents=True, exist_ok=True)
            write_json(sidecar,
                       convert_camera_json(camera, size, str(camera_path)))
            entry["calibration"] = rel(sidecar)
            n_cameras += 1
        elif args.calibration is None:
            raise DatasetError(
                f"{frame_id}: no camera JSON at {camera_path} and no "
                "--calibration fallback given")
        frames.append(entry)

    payload: dict = {"frames": frames}
    if args.calibration is not None:
        payload["defaults"] = {"calibration": rel(Path(args.calibration))}
    write_json(out_path, payload)
    print(f"wrote {len(frames)} frames to {out_path} "
          f"({n_cameras} camera sidecars, {n_masks} road masks)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
