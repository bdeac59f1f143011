"""Domain-specific task networks, their feature maps, and task losses.

Each ``TaskNet`` is an encoder producing a 64-channel feature map at 1/4
resolution (the representation the feature discriminators align) plus an
upsampling head that decodes class probabilities, positive depths, or raw
flow.  Task losses are per-pixel means over valid support so the loss scale
is resolution-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import (
    Depth,
    DepthPred,
    DepthTarget,
    Flow,
    FlowPred,
    FlowTarget,
    ImageGrid,
    SegProbs,
    SegTarget,
    Segmentation,
    TaskKind,
    check_image,
)
from .nn import Conv2d, Module
from .translation import LOG_EPS, _as_tensor, _mean_log, grid_to_nchw

FEAT_CHANNELS = 64
FEAT_STRIDE = 4


class EmptySupportError(ValueError):
    """Raised when a masked loss has no valid pixels to average over."""


@dataclass(frozen=True)
class FeatureMap:
    """h x w x d grid (h = H/4, w = W/4, d = 64)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValueError(f"feature map must be hxwxd, got shape {v.shape}")
        out = v.copy()
        out.setflags(write=False)
        object.__setattr__(self, "values", out)


def out_channels_for(kind: TaskKind) -> int:
    if isinstance(kind, Segmentation):
        return kind.num_classes
    if isinstance(kind, Depth):
        return 1
    if isinstance(kind, Flow):
        return 2
    raise ValueError(f"unknown task kind {kind!r}")


def in_channels_for(kind: TaskKind) -> int:
    return 6 if isinstance(kind, Flow) else 3


class TaskNet(Module):
    """Strided-conv encoder to 64ch @ 1/4 resolution plus an upsampling head."""

    def __init__(self, kind: TaskKind, domain="S", base=16, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.kind = kind
        self.domain = domain
        cin = in_channels_for(kind)
        cout = out_channels_for(kind)
        wide = 2 * base
        self.enc1 = Conv2d(cin, base, 3, rng, stride=2, dtype=dtype)
        self.enc2 = Conv2d(base, wide, 3, rng, stride=2, dtype=dtype)
        self.enc3 = Conv2d(wide, FEAT_CHANNELS, 3, rng, dtype=dtype)
        self.dec1 = Conv2d(FEAT_CHANNELS, wide, 3, rng, dtype=dtype)
        self.dec2 = Conv2d(wide, base, 3, rng, dtype=dtype)
        self.head = Conv2d(base, cout, 3, rng, dtype=dtype)

    def encode(self, x: Tensor) -> Tensor:
        y = ad.relu(self.enc1.forward(x))
        y = ad.relu(self.enc2.forward(y))
        return ad.relu(self.enc3.forward(y))

    def apply(self, x: Tensor):
        """Returns (prediction tensor, feature tensor); both NCHW."""
        feat = self.encode(x)
        y = ad.relu(self.dec1.forward(feat))
        y = ad.relu(self.dec2.forward(ad.upsample2x(y)))
        y = self.head.forward(ad.upsample2x(y))
        if isinstance(self.kind, Segmentation):
            y = ad.softmax_channels(y)
        elif isinstance(self.kind, Depth):
            y = ad.softplus(y)
        return y, feat


class FeatureDiscriminator(Module):
    """Small strided classifier over feature maps, sigmoid realness output."""

    def __init__(self, domain="S", base=32, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.domain = domain
        self.c1 = Conv2d(FEAT_CHANNELS, base, 3, rng, stride=2, dtype=dtype)
        self.c2 = Conv2d(base, base // 2, 3, rng, dtype=dtype)
        self.head = Conv2d(base // 2, 1, 1, rng, pad=0, dtype=dtype)

    def apply(self, f: Tensor) -> Tensor:
        y = ad.relu(self.c1.forward(f))
        y = ad.relu(self.c2.forward(y))
        return ad.sigmoid(self.head.forward(y))


# ---------------------------------------------------------------------------
# operations


def forward(net: TaskNet, image: ImageGrid, kind: TaskKind = None):
    """Single-image inference returning (TaskPrediction, FeatureMap)."""
    if kind is not None and kind != net.kind:
        raise ValueError(f"task-kind mismatch: net is {net.kind!r}, requested {kind!r}")
    problems = check_image(image)
    if problems:
        raise ValueError("; ".join(v.message for v in problems))
    if image.channels != in_channels_for(net.kind):
        raise ValueError(
            f"expected {in_channels_for(net.kind)} channels for {net.kind!r}, got {image.channels}"
        )
    with ad.no_grad():
        pred_t, feat_t = net.apply(Tensor(grid_to_nchw(image)))
    pred_arr = pred_t.data[0]
    feat = FeatureMap(feat_t.data[0].transpose(1, 2, 0))
    if isinstance(net.kind, Segmentation):
        return SegProbs(pred_arr.transpose(1, 2, 0)), feat
    if isinstance(net.kind, Depth):
        return DepthPred(pred_arr[0]), feat
    return FlowPred(pred_arr.transpose(1, 2, 0)), feat


def seg_cross_entropy(probs: Tensor, classes, num_classes, ignore=255) -> Tensor:
    """Mean per-pixel cross-entropy over non-ignored pixels.

    ``probs`` is an NCHW probability tensor; ``classes`` an (N,H,W) int array.
    """
    classes = np.asarray(classes)
    if classes.ndim == 2:
        classes = classes[None]
    valid = classes != ignore
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptySupportError("all pixels are ignore-labeled")
    safe = np.where(valid, classes, 0)
    onehot = np.zeros((classes.shape[0], num_classes) + classes.shape[1:], dtype=probs.dtype)
    np.put_along_axis(onehot, safe[:, None], 1.0, axis=1)
    onehot *= valid[:, None]
    picked = ad.mul(ad.log(ad.clip(probs, LOG_EPS, 1.0)), Tensor(onehot))
    return ad.mul(ad.sum_all(picked), -1.0 / n_valid)


def masked_l1(pred: Tensor, target, valid) -> Tensor:
    """Mask-weighted mean absolute difference (depth task / consistency form)."""
    mask = np.asarray(valid, dtype=pred.dtype)
    n_valid = float(mask.sum())
    if n_valid == 0:
        raise EmptySupportError("empty valid mask")
    diff = ad.absolute(ad.sub(pred, _as_tensor(np.asarray(target, dtype=pred.dtype))))
    return ad.mul(ad.sum_all(ad.mul(diff, Tensor(mask))), 1.0 / n_valid)


def masked_epe(pred: Tensor, target, valid) -> Tensor:
    """Mask-weighted mean endpoint error; channel axis is 1."""
    mask = np.asarray(valid, dtype=pred.dtype)
    n_valid = float(mask.sum())
    if n_valid == 0:
        raise EmptySupportError("empty valid mask")
    diff = ad.sub(pred, _as_tensor(np.asarray(target, dtype=pred.dtype)))
    norms = ad.sqrt_safe(ad.sum_axis(ad.square(diff), axis=1, keepdims=False))
    return ad.mul(ad.sum_all(ad.mul(norms, Tensor(mask))), 1.0 / n_valid)


def _pred_to_tensor(pred, kind):
    """Coerce a TaskPrediction value (or raw array) to an NCHW tensor."""
    if isinstance(pred, Tensor):
        return pred, True
    if isinstance(pred, SegProbs):
        arr = pred.probs.transpose(2, 0, 1)[None]
    elif isinstance(pred, DepthPred):
        arr = pred.depth[None, None]
    elif isinstance(pred, FlowPred):
        arr = pred.flow.transpose(2, 0, 1)[None]
    else:
        arr = np.asarray(pred)
    return Tensor(np.ascontiguousarray(arr)), False


def task_loss(pred, target, kind: TaskKind):
    """Task-dependent supervised loss.

    Cross-entropy for segmentation, masked mean ell-1 for depth, masked mean
    endpoint error for flow.  Accepts tensors (training path, returns a
    Tensor) or TaskPrediction/TaskTarget values (returns a float).
    """
    t, was_tensor = _pred_to_tensor(pred, kind)
    if isinstance(kind, Segmentation):
        if not isinstance(target, SegTarget):
            raise ValueError(f"expected SegTarget, got {type(target).__name__}")
        out = seg_cross_entropy(t, target.classes, kind.num_classes, target.ignore)
    elif isinstance(kind, Depth):
        if not isinstance(target, DepthTarget):
            raise ValueError(f"expected DepthTarget, got {type(target).__name__}")
        out = masked_l1(t, target.depth[None, None], target.valid[None, None])
    elif isinstance(kind, Flow):
        if not isinstance(target, FlowTarget):
            raise ValueError(f"expected FlowTarget, got {type(target).__name__}")
        out = masked_epe(t, target.flow.transpose(2, 0, 1)[None], target.valid[None])
    else:
        raise ValueError(f"unknown task kind {kind!r}")
    return out if was_tensor else out.item()


def feature_adv_loss(d: FeatureDiscriminator, real_feats, fake_feats) -> Tensor:
    """E[log D(real)] + E[log(1 - D(fake))] over feature maps (same min-max
    contract as the image-level loss; pairing is same-domain features vs the
    ones produced from translated images)."""
    d_real = d.apply(_as_tensor(real_feats))
    d_fake = d.apply(_as_tensor(fake_feats))
    one_minus = ad.sub(Tensor(np.asarray(1.0, dtype=d_fake.dtype)), d_fake)
    return ad.add(_mean_log(d_real), _mean_log(one_minus))


def translated_label(target_s):
    """Label for a translated image: identical to the source label."""
    return target_s
