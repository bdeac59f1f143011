"""Evaluation metrics: segmentation IoU/accuracy, depth error suite, flow EPE.

Each family has a mergeable accumulator so shards can be reduced in any
order: confusion-matrix counts are exact integers, mean-based statistics use
compensated (Kahan) float64 sums.  ``MetricReport`` serializes to a flat JSON
object with stable snake_case keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

DELTA_BASE = 1.25


class KahanSum:
    """Compensated running sum; merge order does not matter at 1e-9 scale."""

    __slots__ = ("total", "comp")

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, value):
        y = float(value) - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t

    def merge(self, other):
        self.add(other.total)
        self.add(-other.comp)


@dataclass
class MetricReport:
    task: str
    sample_count: int = 0
    # segmentation block
    per_class_iou: Optional[Dict[int, Optional[float]]] = None
    mean_iou: Optional[float] = None
    pixel_acc: Optional[float] = None
    # depth block
    abs_rel: Optional[float] = None
    sq_rel: Optional[float] = None
    rmse: Optional[float] = None
    rmse_log: Optional[float] = None
    delta_1: Optional[float] = None
    delta_2: Optional[float] = None
    delta_3: Optional[float] = None
    # flow block
    aepe: Optional[float] = None
    f1_outlier_rate: Optional[float] = None

    def to_json(self) -> dict:
        out = {"task": self.task, "sample_count": self.sample_count}
        if self.task == "segmentation":
            out["mean_iou"] = self.mean_iou
            out["pixel_acc"] = self.pixel_acc
            for cls, iou in sorted((self.per_class_iou or {}).items()):
                out[f"iou_class_{cls}"] = iou
        elif self.task == "depth":
            for key in ("abs_rel", "sq_rel", "rmse", "rmse_log", "delta_1", "delta_2", "delta_3"):
                out[key] = getattr(self, key)
        elif self.task == "flow":
            out["aepe"] = self.aepe
            out["f1_outlier_rate"] = self.f1_outlier_rate
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @staticmethod
    def from_json(obj: dict) -> "MetricReport":
        rep = MetricReport(task=obj["task"], sample_count=obj.get("sample_count", 0))
        per_class = {}
        for key, value in obj.items():
            if key.startswith("iou_class_"):
                per_class[int(key.rsplit("_", 1)[1])] = value
            elif hasattr(rep, key) and key not in ("task", "sample_count"):
                setattr(rep, key, value)
        if per_class:
            rep.per_class_iou = per_class
        return rep

    def primary_value(self) -> float:
        """Headline metric for comparisons (higher is better for seg only)."""
        if self.task == "segmentation":
            return self.mean_iou
        if self.task == "depth":
            return self.abs_rel
        return self.aepe


# ---------------------------------------------------------------------------
# segmentation


class SegAccumulator:
    def __init__(self, num_classes, ignore=255):
        self.num_classes = num_classes
        self.ignore = ignore
        self.confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
        self.samples = 0

    def update(self, pred, target):
        pred = np.asarray(pred).ravel()
        target = np.asarray(target).ravel()
        if pred.shape != target.shape:
            raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
        keep = target != self.ignore
        pred, target = pred[keep], target[keep]
        if ((pred < 0) | (pred >= self.num_classes)).any():
            raise ValueError("prediction contains invalid class indices")
        if ((target < 0) | (target >= self.num_classes)).any():
            raise ValueError("target contains invalid class indices")
        idx = target * self.num_classes + pred
        self.confusion += np.bincount(idx, minlength=self.num_classes**2).reshape(
            self.num_classes, self.num_classes
        )
        self.samples += 1

    def merge(self, other):
        self.confusion += other.confusion
        self.samples += other.samples

    def report(self) -> MetricReport:
        cm = self.confusion
        tp = np.diag(cm).astype(np.float64)
        fn = cm.sum(axis=1) - tp
        fp = cm.sum(axis=0) - tp
        present = cm.sum(axis=1) > 0  # classes present in the targets
        per_class = {}
        ious = []
        for c in range(self.num_classes):
            if not present[c]:
                per_class[c] = None
                continue
            denom = tp[c] + fp[c] + fn[c]
            iou = float(tp[c] / denom) if denom else 0.0
            per_class[c] = iou
            ious.append(iou)
        total = cm.sum()
        return MetricReport(
            task="segmentation",
            sample_count=self.samples,
            per_class_iou=per_class,
            mean_iou=float(np.mean(ious)) if ious else 0.0,
            pixel_acc=float(tp.sum() / total) if total else 0.0,
        )


# ---------------------------------------------------------------------------
# depth


class DepthAccumulator:
    _STATS = ("abs_rel", "sq_rel", "sq_err", "sq_log_err", "d1", "d2", "d3")

    def __init__(self):
        self.sums = {name: KahanSum() for name in self._STATS}
        self.n_valid = 0
        self.samples = 0

    def update(self, pred, target, valid=None):
        pred = np.asarray(pred, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        valid = np.ones(target.shape, bool) if valid is None else np.asarray(valid, bool)
        if pred.shape != target.shape or valid.shape != target.shape:
            raise ValueError("pred/target/mask shapes disagree")
        p, t = pred[valid], target[valid]
        if (t <= 0).any():
            raise ValueError("non-positive target depth inside the valid mask")
        if (p <= 0).any():
            raise ValueError("non-positive predicted depth inside the valid mask")
        ratio = np.maximum(p / t, t / p)
        self.sums["abs_rel"].add(np.sum(np.abs(p - t) / t))
        self.sums["sq_rel"].add(np.sum((p - t) ** 2 / t))
        self.sums["sq_err"].add(np.sum((p - t) ** 2))
        self.sums["sq_log_err"].add(np.sum((np.log(p) - np.log(t)) ** 2))
        self.sums["d1"].add(np.sum(ratio < DELTA_BASE))
        self.sums["d2"].add(np.sum(ratio < DELTA_BASE**2))
        self.sums["d3"].add(np.sum(ratio < DELTA_BASE**3))
        self.n_valid += int(valid.sum())
        self.samples += 1

    def merge(self, other):
        for name in self._STATS:
            self.sums[name].merge(other.sums[name])
        self.n_valid += other.n_valid
        self.samples += other.samples

    def report(self) -> MetricReport:
        n = max(self.n_valid, 1)
        s = {name: k.total for name, k in self.sums.items()}
        return MetricReport(
            task="depth",
            sample_count=self.samples,
            abs_rel=s["abs_rel"] / n,
            sq_rel=s["sq_rel"] / n,
            rmse=float(np.sqrt(s["sq_err"] / n)),
            rmse_log=float(np.sqrt(s["sq_log_err"] / n)),
            delta_1=s["d1"] / n,
            delta_2=s["d2"] / n,
            delta_3=s["d3"] / n,
        )


# ---------------------------------------------------------------------------
# optical flow


class FlowAccumulator:
    def __init__(self, outlier_epe_px=3.0, outlier_rel=0.05):
        self.outlier_epe_px = outlier_epe_px
        self.outlier_rel = outlier_rel
        self.epe_sum = KahanSum()
        self.outliers = 0
        self.n_valid = 0
        self.samples = 0

    def update(self, pred, target, valid=None):
        pred = np.asarray(pred, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        if pred.shape != target.shape or pred.shape[-1] != 2:
            raise ValueError("flow fields must share an HxWx2 shape")
        valid = np.ones(target.shape[:-1], bool) if valid is None else np.asarray(valid, bool)
        epe = np.sqrt(((pred - target) ** 2).sum(axis=-1))[valid]
        mag = np.sqrt((target**2).sum(axis=-1))[valid]
        if epe.size == 0:
            raise ValueError("empty valid mask")
        self.epe_sum.add(epe.sum())
        outlier = (epe > self.outlier_epe_px) & (epe > self.outlier_rel * mag)
        self.outliers += int(outlier.sum())
        self.n_valid += int(valid.sum())
        self.samples += 1

    def merge(self, other):
        self.epe_sum.merge(other.epe_sum)
        self.outliers += other.outliers
        self.n_valid += other.n_valid
        self.samples += other.samples

    def report(self) -> MetricReport:
        n = max(self.n_valid, 1)
        return MetricReport(
            task="flow",
            sample_count=self.samples,
            aepe=self.epe_sum.total / n,
            f1_outlier_rate=self.outliers / n,
        )


# ---------------------------------------------------------------------------
# one-shot wrappers


def seg_metrics(preds, targets, num_classes, ignore=255) -> MetricReport:
    acc = SegAccumulator(num_classes, ignore)
    for p, t in zip(preds, targets):
        acc.update(p, t)
    return acc.report()


def depth_metrics(preds, targets, masks=None) -> MetricReport:
    acc = DepthAccumulator()
    masks = [None] * len(preds) if masks is None else masks
    for p, t, m in zip(preds, targets, masks):
        acc.update(p, t, m)
    return acc.report()


def flow_metrics(preds, targets, masks=None, outlier_epe_px=3.0, outlier_rel=0.05) -> MetricReport:
    acc = FlowAccumulator(outlier_epe_px, outlier_rel)
    masks = [None] * len(preds) if masks is None else masks
    for p, t, m in zip(preds, targets, masks):
        acc.update(p, t, m)
    return acc.report()
