"""Shared value types: images, task kinds, targets, predictions, loss weights.

All values are immutable after construction (arrays are copied and marked
read-only) and therefore safe to share across workers.  Constructors only
coerce dtype/shape; semantic invariants are checked by ``validate_pair`` and
friends, which report violations instead of raising so that corrupt inputs
can be diagnosed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

IGNORE_LABEL = 255


def _readonly(arr):
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# task kinds


@dataclass(frozen=True)
class Segmentation:
    num_classes: int

    name = "segmentation"

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("segmentation needs at least 2 classes")


@dataclass(frozen=True)
class Depth:
    name = "depth"


@dataclass(frozen=True)
class Flow:
    name = "flow"


TaskKind = Union[Segmentation, Depth, Flow]


def task_kind_from_name(name, num_classes=4):
    name = name.lower()
    if name in ("seg", "segmentation"):
        return Segmentation(num_classes)
    if name == "depth":
        return Depth()
    if name == "flow":
        return Flow()
    raise ValueError(f"unknown task kind: {name!r}")


# ---------------------------------------------------------------------------
# rasters


@dataclass(frozen=True)
class ImageGrid:
    """H x W x C real-valued raster with values in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValueError(f"ImageGrid values must be HxWxC, got shape {v.shape}")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def channels(self):
        return self.values.shape[2]


def quantize_unit(arr):
    """Snap [-1, 1] floats onto the 8-bit lattice used by the PNG codec."""
    u = np.clip(np.round((np.asarray(arr, dtype=np.float64) + 1.0) * 127.5), 0, 255)
    return (u.astype(np.float32) / 127.5 - 1.0).astype(np.float32)


@dataclass(frozen=True)
class SegTarget:
    classes: np.ndarray  # H x W integer class indices, IGNORE_LABEL = unlabeled
    ignore: int = IGNORE_LABEL

    def __post_init__(self):
        c = np.asarray(self.classes)
        if c.ndim != 2:
            raise ValueError(f"class map must be HxW, got shape {c.shape}")
        object.__setattr__(self, "classes", _readonly(c.astype(np.int32)))

    @property
    def spatial(self):
        return self.classes.shape


@dataclass(frozen=True)
class DepthTarget:
    depth: np.ndarray  # H x W metric depths, > 0 where valid
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float32)
        if d.ndim != 2:
            raise ValueError(f"depth map must be HxW, got shape {d.shape}")
        v = np.ones(d.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        object.__setattr__(self, "depth", _readonly(d))
        object.__setattr__(self, "valid", _readonly(v))

    @property
    def spatial(self):
        return self.depth.shape


@dataclass(frozen=True)
class FlowTarget:
    flow: np.ndarray  # H x W x 2 displacement in pixels
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        f = np.asarray(self.flow, dtype=np.float32)
        if f.ndim != 3 or f.shape[2] != 2:
            raise ValueError(f"flow field must be HxWx2, got shape {f.shape}")
        v = np.ones(f.shape[:2], bool) if self.valid is None else np.asarray(self.valid, bool)
        object.__setattr__(self, "flow", _readonly(f))
        object.__setattr__(self, "valid", _readonly(v))

    @property
    def spatial(self):
        return self.flow.shape[:2]


TaskTarget = Union[SegTarget, DepthTarget, FlowTarget]


@dataclass(frozen=True)
class SegProbs:
    """Per-pixel class probabilities, H x W x C."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float32)
        if p.ndim != 3:
            raise ValueError(f"probability grid must be HxWxC, got shape {p.shape}")
        object.__setattr__(self, "probs", _readonly(p))

    @property
    def spatial(self):
        return self.probs.shape[:2]

    def class_map(self):
        return self.probs.argmax(axis=2).astype(np.int32)


@dataclass(frozen=True)
class DepthPred:
    depth: np.ndarray  # H x W

    def __post_init__(self):
        object.__setattr__(self, "depth", _readonly(np.asarray(self.depth, np.float32)))

    @property
    def spatial(self):
        return self.depth.shape


@dataclass(frozen=True)
class FlowPred:
    flow: np.ndarray  # H x W x 2

    def __post_init__(self):
        object.__setattr__(self, "flow", _readonly(np.asarray(self.flow, np.float32)))

    @property
    def spatial(self):
        return self.flow.shape[:2]


TaskPrediction = Union[SegProbs, DepthPred, FlowPred]


# ---------------------------------------------------------------------------
# loss weights / optimizer hyperparameters


@dataclass(frozen=True)
class LossWeights:
    lambda_consis: float = 10.0
    lambda_rec: float = 10.0
    lambda_img: float = 0.1
    lambda_feat: float = 0.001
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 1

    def __post_init__(self):
        for name in ("lambda_consis", "lambda_rec", "lambda_img", "lambda_feat", "weight_decay"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.momentum < 1):
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def default_config(kind: TaskKind) -> LossWeights:
    """Published default weights and optimizer settings, identical per task."""
    return LossWeights()


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class CheckResult:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def check_image(image: ImageGrid):
    out = []
    v = image.values
    if not np.all(np.isfinite(v)):
        out.append(Violation("image.nonfinite", "image contains non-finite values"))
    else:
        lo, hi = float(v.min(initial=0.0)), float(v.max(initial=0.0))
        if lo < -1.0 or hi > 1.0:
            out.append(Violation("image.range", f"values outside [-1, 1]: min={lo:.4g} max={hi:.4g}"))
    for dim, size in (("height", image.height), ("width", image.width)):
        if size < 8 or size % 4:
            out.append(Violation(f"image.{dim}", f"{dim} must be >= 8 and divisible by 4, got {size}"))
    return out


def _check_target(target, kind):
    out = []
    if isinstance(kind, Segmentation):
        if not isinstance(target, SegTarget):
            return [Violation("target.kind", f"expected SegTarget for {kind.name}, got {type(target).__name__}")]
        c = target.classes
        bad = (c != target.ignore) & ((c < 0) | (c >= kind.num_classes))
        if bad.any():
            ys, xs = np.nonzero(bad)
            out.append(Violation(
                "target.class_range",
                f"{bad.sum()} class indices outside [0, {kind.num_classes}) "
                f"and != ignore({target.ignore}); first at ({ys[0]}, {xs[0]})",
            ))
    elif isinstance(kind, Depth):
        if not isinstance(target, DepthTarget):
            return [Violation("target.kind", f"expected DepthTarget for {kind.name}, got {type(target).__name__}")]
        if not np.all(np.isfinite(target.depth[target.valid])):
            out.append(Violation("target.nonfinite", "depth contains non-finite values inside the valid mask"))
        bad = target.valid & ~(target.depth > 0)
        if bad.any():
            ys, xs = np.nonzero(bad)
            out.append(Violation(
                "target.positivity",
                f"{bad.sum()} non-positive depths inside the valid mask; first at ({ys[0]}, {xs[0]})",
            ))
    elif isinstance(kind, Flow):
        if not isinstance(target, FlowTarget):
            return [Violation("target.kind", f"expected FlowTarget for {kind.name}, got {type(target).__name__}")]
        if not np.all(np.isfinite(target.flow[target.valid])):
            out.append(Violation("target.nonfinite", "flow contains non-finite values inside the valid mask"))
    else:
        out.append(Violation("kind.unknown", f"unknown task kind {kind!r}"))
    return out


def validate_pair(image: ImageGrid, target: TaskTarget, kind: TaskKind) -> CheckResult:
    """Check shape agreement plus every type invariant; never raises."""
    out = list(check_image(image))
    out.extend(_check_target(target, kind))
    if hasattr(target, "spatial"):
        if tuple(target.spatial) != (image.height, image.width):
            out.append(Violation(
                "shape.mismatch",
                f"target spatial shape {tuple(target.spatial)} != image {( image.height, image.width)}",
            ))
    return CheckResult(tuple(out))
