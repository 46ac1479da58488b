"""Training, inference, and score-map export."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import Sample, crop_plan, take_crop
from .model import DetectorConfig, PerspectiveDetector
from .pfm import write_pfm


def make_optimizer(model: PerspectiveDetector, cfg: DetectorConfig):
    """Adam over the trainable parameters plus the plateau schedule:
    the learning rate drops by ``lr_drop_factor`` once the epoch loss has
    failed to improve for ``lr_patience_epochs`` consecutive epochs."""
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=cfg.lr_drop_factor, patience=cfg.lr_patience_epochs)
    return optimizer, scheduler


def train(model: PerspectiveDetector, samples: list[Sample],
          cfg: DetectorConfig, steps_per_epoch: int = 16,
          batch_size: int = 2, seed: int = 0) -> dict:
    """Per-pixel binary cross-entropy training over pre-planned crops.

    Returns a JSON-serializable log with per-epoch mean loss and the
    learning rate in effect. Deterministic for a given seed.
    """
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    torch.manual_seed(seed)
    optimizer, scheduler = make_optimizer(model, cfg)
    loss_fn = nn.BCEWithLogitsLoss()
    log: dict = {"epoch_loss": [], "learning_rate": [],
                 "steps_per_epoch": steps_per_epoch, "batch_size": batch_size}
    draws = cfg.epochs * steps_per_epoch * batch_size
    plan = crop_plan(samples, cfg.crop_height, cfg.crop_width, draws, seed)
    cursor = 0
    model.train()
    for _ in range(cfg.epochs):
        losses = []
        for _ in range(steps_per_epoch):
            members = plan[cursor:cursor + batch_size]
            cursor += batch_size
            images, perspectives, targets = zip(*(
                take_crop(samples[idx], top, left,
                          cfg.crop_height, cfg.crop_width)
                for idx, top, left in members))
            logits = model(torch.stack(images), torch.stack(perspectives))
            loss = loss_fn(logits, torch.stack(targets))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        epoch_loss = float(np.mean(losses))
        log["epoch_loss"].append(epoch_loss)
        log["learning_rate"].append(optimizer.param_groups[0]["lr"])
        scheduler.step(epoch_loss)
    return log


def save_log(path: str | Path, log: dict) -> None:
    with open(path, "w") as fh:
        json.dump(log, fh, indent=2, sort_keys=True)
        fh.write("\n")


def infer(model: PerspectiveDetector, image: torch.Tensor,
          perspective: torch.Tensor) -> np.ndarray:
    """Sigmoid score map in [0, 1] for one (3,H,W) image and its (1,H,W)
    perspective channel."""
    if image.ndim != 3 or perspective.ndim != 3:
        raise ValueError("expected unbatched CHW tensors")
    model.eval()
    with torch.no_grad():
        logits = model(image[None], perspective[None])
        return torch.sigmoid(logits)[0, 0].cpu().numpy().astype(np.float32)


def export_scores(path: str | Path, scores: np.ndarray) -> None:
    """Write a score map in the float-raster format the evaluation
    command consumes."""
    scores = np.asarray(scores, dtype=np.float32)
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError("scores must lie in [0, 1]")
    write_pfm(path, scores)
