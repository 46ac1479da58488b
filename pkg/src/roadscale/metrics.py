"""Pixel- and component-level scoring of obstacle score maps.

Pixel level: area under the precision-recall curve (step interpolation,
ties grouped). Component level: per-ground-truth-component adjusted IoU
(prediction pixels lying on *other* ground-truth components are discounted
from the union), per-predicted-component positive predictive value, and an
F1 averaged over a sweep of thresholds tau in 0.25..0.75 (step 0.05):
a ground-truth component counts as found when its adjusted IoU exceeds tau,
a predicted component counts as a false positive when its PPV is at most
tau.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_TAUS = tuple(round(0.25 + 0.05 * i, 2) for i in range(11))
DEFAULT_THRESHOLD = 0.5

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class ScoreMap:
    """Obstacle likelihoods in [0, 1] plus the pixel set to evaluate on."""

    values: np.ndarray
    eval_mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("score map contains non-finite values")
        if self.values.min(initial=0.0) < 0.0 or self.values.max(initial=0.0) > 1.0:
            raise ValueError("score map values must lie in [0, 1]")
        if self.eval_mask is not None:
            self.eval_mask = np.asarray(self.eval_mask, dtype=bool)
            if self.eval_mask.shape != self.values.shape:
                raise ValueError("eval_mask dims do not match score values")


@dataclass
class ComponentReport:
    siou_per_gt: list[float]
    ppv_per_pred: list[float]
    f1_at_tau: dict[float, float]
    mean_f1: float
    mean_siou: float | None
    mean_ppv: float | None
    auprc: float | None

    def to_dict(self) -> dict:
        return {
            "auprc": self.auprc,
            "mean_f1": self.mean_f1,
            "mean_siou": self.mean_siou,
            "mean_ppv": self.mean_ppv,
            "f1_at_tau": {f"{t:.2f}": v for t, v in self.f1_at_tau.items()},
            "n_gt_components": len(self.siou_per_gt),
            "n_pred_components": len(self.ppv_per_pred),
        }


def _flatten_scored(scores: ScoreMap | np.ndarray,
                    gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(scores, ScoreMap):
        values, mask = scores.values, scores.eval_mask
    else:
        values, mask = np.asarray(scores, dtype=np.float64), None
    gt = np.asarray(gt)
    if gt.shape != values.shape:
        raise ValueError(f"score {values.shape} and gt {gt.shape} dims differ")
    if mask is None:
        return values.ravel(), (gt > 0).ravel()
    return values[mask], (gt > 0)[mask]


def auprc(scores: ScoreMap | np.ndarray, gt: np.ndarray) -> float:
    """Average precision: pixels sorted by descending score, ties grouped,
    summing precision * delta-recall at each group boundary."""
    s, y = _flatten_scored(scores, gt)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise ValueError("degenerate ground truth: need at least one positive "
                         "and one negative pixel inside the evaluation mask")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    tp_cum = np.cumsum(y[order])
    # last index of each tie group
    ends = np.append(np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1)
    tp = tp_cum[ends]
    precision = tp / (ends + 1)
    recall = tp / n_pos
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def components(mask: np.ndarray) -> np.ndarray:
    """8-connected component labels, ids assigned in raster-scan first-encounter order."""
    mask = np.asarray(mask).astype(bool)
    labeled, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 0:
        return labeled.astype(np.int64)
    flat = labeled.ravel()
    values, first_idx = np.unique(flat, return_index=True)
    nonzero = values != 0
    values, first_idx = values[nonzero], first_idx[nonzero]
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[values[np.argsort(first_idx, kind="stable")]] = np.arange(1, values.size + 1)
    return remap[labeled]


def siou(gt_component: np.ndarray, prediction: np.ndarray,
         other_gt: np.ndarray) -> float:
    """Adjusted IoU of one ground-truth component: prediction pixels that
    fall on other ground-truth components are removed from the union."""
    k = np.asarray(gt_component, dtype=bool)
    p = np.asarray(prediction, dtype=bool)
    other = np.asarray(other_gt, dtype=bool)
    inter = int(np.count_nonzero(k & p))
    union = int(np.count_nonzero(k | p))
    adjustment = int(np.count_nonzero(p & other))
    if not k.any():
        raise ValueError("ground-truth component is empty")
    return inter / (union - adjustment)


def ppv(pred_component: np.ndarray, gt_mask: np.ndarray) -> float:
    """Fraction of a predicted component's pixels lying on any ground-truth obstacle."""
    k = np.asarray(pred_component, dtype=bool)
    size = int(np.count_nonzero(k))
    if size == 0:
        raise ValueError("predicted component is empty")
    return int(np.count_nonzero(k & np.asarray(gt_mask, dtype=bool))) / size


def _component_stats(scores: ScoreMap | np.ndarray, gt_instances: np.ndarray,
                     threshold: float) -> tuple[list[float], list[float]]:
    """Per-gt-component sIoU values and per-pred-component PPV values."""
    if isinstance(scores, ScoreMap):
        values, mask = scores.values, scores.eval_mask
    else:
        values, mask = np.asarray(scores, dtype=np.float64), None
    gt = np.asarray(gt_instances)
    if gt.shape != values.shape:
        raise ValueError(f"score {values.shape} and gt {gt.shape} dims differ")
    pred = values >= threshold
    if mask is not None:
        pred = pred & mask
        gt = np.where(mask, gt, 0)

    gt_any = gt > 0
    sious = []
    for gid in np.unique(gt):
        if gid == 0:
            continue
        k = gt == gid
        sious.append(siou(k, pred, gt_any & ~k))

    pred_labels = components(pred)
    ppvs = []
    for pid in range(1, int(pred_labels.max(initial=0)) + 1):
        ppvs.append(ppv(pred_labels == pid, gt_any))
    return sious, ppvs


def _f1_from_stats(sious: list[float], ppvs: list[float],
                   taus: tuple[float, ...]) -> dict[float, float]:
    out = {}
    for tau in taus:
        tp = sum(1 for s in sious if s > tau)
        fn = len(sious) - tp
        fp = sum(1 for p in ppvs if p <= tau)
        denom = 2 * tp + fn + fp
        out[tau] = 2 * tp / denom if denom > 0 else 1.0
    return out


def _build_report(sious: list[float], ppvs: list[float], taus: tuple[float, ...],
                  auprc_value: float | None) -> ComponentReport:
    f1_at_tau = _f1_from_stats(sious, ppvs, taus)
    return ComponentReport(
        siou_per_gt=sious,
        ppv_per_pred=ppvs,
        f1_at_tau=f1_at_tau,
        mean_f1=float(np.mean(list(f1_at_tau.values()))),
        mean_siou=float(np.mean(sious)) if sious else None,
        mean_ppv=float(np.mean(ppvs)) if ppvs else None,
        auprc=auprc_value,
    )


def component_f1(scores: ScoreMap | np.ndarray, gt_instances: np.ndarray,
                 taus: tuple[float, ...] = DEFAULT_TAUS,
                 threshold: float = DEFAULT_THRESHOLD) -> ComponentReport:
    """Full component-level report for one frame.

    The prediction is binarized at ``threshold``; ground-truth components
    are the instance ids of ``gt_instances``. AuPRC is included when the
    ground truth is non-degenerate, else left as None.
    """
    if len(taus) == 0:
        raise ValueError("tau list is empty")
    if any(not (0.0 < t < 1.0) for t in taus):
        raise ValueError(f"taus must lie in (0, 1), got {taus}")
    sious, ppvs = _component_stats(scores, gt_instances, threshold)
    try:
        ap = auprc(scores, gt_instances)
    except ValueError:
        ap = None
    return _build_report(sious, ppvs, taus, ap)


@dataclass
class MetricAccumulator:
    """Associative cross-frame aggregation: component lists concatenate and
    pixel scores pool, so merge order never changes the result."""

    taus: tuple[float, ...] = DEFAULT_TAUS
    threshold: float = DEFAULT_THRESHOLD
    sious: list[float] = field(default_factory=list)
    ppvs: list[float] = field(default_factory=list)
    pooled_scores: list[np.ndarray] = field(default_factory=list)
    pooled_labels: list[np.ndarray] = field(default_factory=list)

    def add_frame(self, scores: ScoreMap | np.ndarray,
                  gt_instances: np.ndarray) -> ComponentReport:
        """Fold one frame in; returns that frame's own report."""
        report = component_f1(scores, gt_instances, self.taus, self.threshold)
        self.sious.extend(report.siou_per_gt)
        self.ppvs.extend(report.ppv_per_pred)
        s, y = _flatten_scored(scores, gt_instances)
        self.pooled_scores.append(s)
        self.pooled_labels.append(y)
        return report

    def merge(self, other: "MetricAccumulator") -> None:
        if other.taus != self.taus or other.threshold != self.threshold:
            raise ValueError("cannot merge accumulators with different settings")
        self.sious.extend(other.sious)
        self.ppvs.extend(other.ppvs)
        self.pooled_scores.extend(other.pooled_scores)
        self.pooled_labels.extend(other.pooled_labels)

    def report(self) -> ComponentReport:
        ap = None
        if self.pooled_scores:
            s = np.concatenate(self.pooled_scores)
            y = np.concatenate(self.pooled_labels)
            if 0 < int(y.sum()) < y.size:
                ap = auprc(s.astype(np.float64), y.astype(np.int64))
        return _build_report(self.sious, self.ppvs, self.taus, ap)

    def pr_curve(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pooled (threshold, precision, recall) arrays, descending threshold."""
        s = np.concatenate(self.pooled_scores)
        y = np.concatenate(self.pooled_labels)
        n_pos = int(y.sum())
        if n_pos == 0 or n_pos == y.size:
            raise ValueError("degenerate pooled ground truth")
        order = np.argsort(-s, kind="stable")
        s_sorted = s[order]
        tp_cum = np.cumsum(y[order])
        ends = np.append(np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1)
        tp = tp_cum[ends]
        return s_sorted[ends], tp / (ends + 1), tp / n_pos
