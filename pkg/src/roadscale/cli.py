"""Command-line entry point: map, extract, inject, eval, estimate-pitch.

Every run resolves its parameters (hard defaults, then --config file values,
then explicit flags), writes the resolved union to <out>/config.json before
doing any work, and exits nonzero with a JSON error object on stderr when
something fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import cutouts as cutouts_mod
from . import dataset_io as dio
from . import geometry
from . import metrics as metrics_mod
from .inject import InjectionConfig, synthesize_to_dir


def _write_run_config(out_dir: Path, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    dio.write_json(out_dir / "config.json", payload)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise dio.DatasetError(f"{path}: config file must hold a JSON object")
    return data


def _resolve(defaults: dict, config_file: dict, cli_values: dict) -> dict:
    """defaults < config file < explicitly passed flags."""
    unknown = set(config_file) - set(defaults)
    if unknown:
        raise dio.DatasetError(f"config file has unknown keys: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(config_file)
    for key, value in cli_values.items():
        if value is not None:
            merged[key] = value
    return merged


# ---------------------------------------------------------------------------
# map

def cmd_map(args) -> int:
    manifest = dio.load_manifest(args.manifest)
    out = Path(args.out)
    _write_run_config(out, {"command": "map", "manifest": str(args.manifest)})
    for frame in manifest:
        rig = frame.load_rig()
        pmap = geometry.perspective_map(rig)
        dio.write_pfm(out / f"{frame.frame_id}_pmap.pfm", pmap.values)
        dio.write_json(out / f"{frame.frame_id}_pmap.json", {
            "frame_id": frame.frame_id,
            "horizon_row": pmap.horizon_row,
            "rig": dio.rig_to_dict(rig),
        })
    return 0


# ---------------------------------------------------------------------------
# extract

def cmd_extract(args) -> int:
    manifest = dio.load_manifest(args.manifest)
    out = Path(args.out)
    if args.classes is None:
        eligible = set(cutouts_mod.DEFAULT_ELIGIBLE_CLASSES)
    else:
        eligible = {c.strip() for c in args.classes.split(",") if c.strip()}
    if args.class_table is not None:
        with open(args.class_table) as fh:
            class_table = {int(k): v for k, v in json.load(fh).items()}
    else:
        class_table = dict(dio.CITYSCAPES_CLASS_TABLE)
    _write_run_config(out, {
        "command": "extract",
        "manifest": str(args.manifest),
        "classes": sorted(eligible),
        "class_table": {str(k): v for k, v in class_table.items()},
    })
    collected = []
    for frame in manifest:
        if frame.labels_path is None:
            continue
        image = dio.read_image(frame.image_path)
        labels = dio.read_label_map(frame.labels_path)
        collected.extend(cutouts_mod.extract_cutouts(
            image, labels, eligible, class_table, frame_id=frame.frame_id))
    pool = cutouts_mod.CutoutPool(collected)
    cutouts_mod.save_pool(pool, out)
    print(f"extracted {len(pool)} cutouts from {len(manifest)} frames")
    return 0


# ---------------------------------------------------------------------------
# inject

_WORKER: dict = {}


def _inject_worker_init(manifest_path: str, pool_dir: str, cfg_dict: dict,
                        out_dir: str) -> None:
    _WORKER["manifest"] = dio.load_manifest(manifest_path)
    _WORKER["pool"] = cutouts_mod.load_pool(pool_dir)
    _WORKER["cfg"] = InjectionConfig(**cfg_dict)
    _WORKER["out"] = Path(out_dir)


def _inject_one(index: int) -> tuple[str, int, int]:
    frame = _WORKER["manifest"].frames[index]
    if frame.road_mask_path is None:
        raise dio.DatasetError(f"frame {frame.frame_id!r} has no road_mask; "
                               "injection needs one")
    image = dio.read_image(frame.image_path)
    road_mask = dio.read_mask(frame.road_mask_path)
    rig = frame.load_rig()
    result = synthesize_to_dir(image, road_mask, rig, _WORKER["pool"],
                               _WORKER["cfg"], frame.frame_id, _WORKER["out"])
    return frame.frame_id, len(result.records), len(result.skips)


def cmd_inject(args) -> int:
    config_file = _load_config_file(args.config)
    cfg_defaults = InjectionConfig().to_dict()
    cli_values = {
        "mode": args.mode,
        "obj_min_m": args.obj_min,
        "obj_max_m": args.obj_max,
        "fill_probability": args.fill_prob,
        "noise_magnitude": args.noise,
        "feather_px": args.feather,
        "jitter_sigma_m": args.jitter,
        "grid_depth_m": args.grid_depth,
        "grid_lateral_m": args.grid_lateral,
        "master_seed": args.seed,
    }
    cfg = InjectionConfig(**_resolve(cfg_defaults, config_file, cli_values))

    manifest = dio.load_manifest(args.manifest)
    out = Path(args.out)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    # worker count never influences the produced bytes, so it stays out of
    # the reproducibility echo
    _write_run_config(out, {
        "command": "inject",
        "manifest": str(args.manifest),
        "pool": str(args.pool),
        "config": cfg.to_dict(),
    })

    indices = range(len(manifest))
    if workers <= 1:
        _inject_worker_init(args.manifest, args.pool, cfg.to_dict(), str(out))
        results = [_inject_one(i) for i in indices]
    else:
        with ProcessPoolExecutor(
                max_workers=workers, initializer=_inject_worker_init,
                initargs=(args.manifest, args.pool, cfg.to_dict(), str(out))) as pool:
            results = list(pool.map(_inject_one, indices))
    placed = sum(r[1] for r in results)
    skipped = sum(r[2] for r in results)
    print(f"synthesized {len(results)} frames: {placed} objects placed, "
          f"{skipped} anchors skipped")
    return 0


# ---------------------------------------------------------------------------
# eval

_SCORE_SUFFIXES = ("_score", "_scores", "_pmap", "_image")
_GT_SUFFIXES = ("_labels", "_label", "_gt")


def _frame_key(stem: str, suffixes: tuple[str, ...]) -> str:
    for suffix in suffixes:
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def _read_score_file(path: Path) -> np.ndarray:
    if path.suffix == ".pfm":
        return dio.read_pfm(path).astype(np.float64)
    values = dio.read_label_map(path).astype(np.float64) / 65535.0
    return values


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    out = Path(args.out)
    score_files = sorted(p for p in pred_dir.iterdir()
                         if p.suffix in (".pfm", ".png"))
    if not score_files:
        raise dio.DatasetError(f"no score maps (*.pfm / *.png) in {pred_dir}")
    gt_by_key = {}
    for p in sorted(gt_dir.glob("*.png")):
        gt_by_key[_frame_key(p.stem, _GT_SUFFIXES)] = p

    _write_run_config(out, {
        "command": "eval",
        "pred": str(pred_dir),
        "gt": str(gt_dir),
        "threshold": args.threshold,
    })

    acc = metrics_mod.MetricAccumulator(threshold=args.threshold)
    per_frame = {}
    for score_path in score_files:
        key = _frame_key(score_path.stem, _SCORE_SUFFIXES)
        gt_path = gt_by_key.get(key)
        if gt_path is None:
            raise dio.DatasetError(f"no ground truth for {score_path.name} "
                                   f"(looked for key {key!r} in {gt_dir})")
        values = _read_score_file(score_path)
        gt = dio.read_label_map(gt_path)
        eval_mask = None
        if args.mask_dir is not None:
            mask_path = Path(args.mask_dir) / f"{key}.png"
            if mask_path.is_file():
                eval_mask = dio.read_mask(mask_path)
        scores = metrics_mod.ScoreMap(np.clip(values, 0.0, 1.0), eval_mask)
        report = acc.add_frame(scores, gt)
        per_frame[key] = report.to_dict()

    aggregate = acc.report()
    dio.write_json(out / "report.json", {
        "aggregate": aggregate.to_dict(),
        "frames": per_frame,
    })
    if args.pr_csv:
        thresholds, precision, recall = acc.pr_curve()
        with open(out / "pr_curve.csv", "w") as fh:
            fh.write("threshold,precision,recall\n")
            for t, p, r in zip(thresholds, precision, recall):
                fh.write(f"{t:.9g},{p:.9g},{r:.9g}\n")
    print(json.dumps(aggregate.to_dict(), indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# estimate-pitch

def cmd_estimate_pitch(args) -> int:
    mask = dio.read_mask(args.road_mask)
    pitch = geometry.estimate_pitch(mask, args.focal, args.principal_row,
                                    horizon_offset_px=args.offset)
    print(json.dumps({"pitch_rad": pitch}))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadscale",
        description="Perspective-aware obstacle injection and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="emit per-frame scale maps (PFM + JSON)")
    p_map.add_argument("--manifest", required=True)
    p_map.add_argument("--out", required=True)
    p_map.set_defaults(func=cmd_map)

    p_ext = sub.add_parser("extract", help="build a cut-out pool from labeled frames")
    p_ext.add_argument("--manifest", required=True)
    p_ext.add_argument("--out", required=True)
    p_ext.add_argument("--classes", default=None,
                       help="comma-separated class names (default: paper-eligible set)")
    p_ext.add_argument("--class-table", default=None,
                       help="JSON file mapping class id -> class name")
    p_ext.set_defaults(func=cmd_extract)

    p_inj = sub.add_parser("inject", help="synthesize an obstacle dataset")
    p_inj.add_argument("--manifest", required=True)
    p_inj.add_argument("--pool", required=True, help="cut-out pool directory")
    p_inj.add_argument("--out", required=True)
    p_inj.add_argument("--config", default=None, help="JSON config file")
    p_inj.add_argument("--seed", type=int, default=None)
    p_inj.add_argument("--workers", type=int, default=None)
    p_inj.add_argument("--mode", choices=["perspective", "uniform"], default=None)
    p_inj.add_argument("--obj-min", type=float, default=None)
    p_inj.add_argument("--obj-max", type=float, default=None)
    p_inj.add_argument("--fill-prob", type=float, default=None)
    p_inj.add_argument("--noise", type=float, default=None)
    p_inj.add_argument("--feather", type=int, default=None)
    p_inj.add_argument("--jitter", type=float, default=None)
    p_inj.add_argument("--grid-depth", type=float, default=None)
    p_inj.add_argument("--grid-lateral", type=float, default=None)
    p_inj.set_defaults(func=cmd_inject)

    p_eval = sub.add_parser("eval", help="score detector outputs against ground truth")
    p_eval.add_argument("--pred", required=True, help="score map directory (PFM or 16-bit PNG)")
    p_eval.add_argument("--gt", required=True, help="ground-truth instance map directory")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--mask-dir", default=None,
                        help="directory of evaluation (road) masks, <frame>.png")
    p_eval.add_argument("--threshold", type=float, default=metrics_mod.DEFAULT_THRESHOLD)
    p_eval.add_argument("--pr-csv", action="store_true",
                        help="also write the pooled PR curve as CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_pitch = sub.add_parser("estimate-pitch", help="pitch angle from a road mask")
    p_pitch.add_argument("--road-mask", required=True)
    p_pitch.add_argument("--focal", type=float, required=True)
    p_pitch.add_argument("--principal-row", type=float, required=True)
    p_pitch.add_argument("--offset", type=int, default=16)
    p_pitch.set_defaults(func=cmd_estimate_pitch)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface machine-readable failure on stderr
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
