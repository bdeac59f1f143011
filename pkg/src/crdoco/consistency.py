"""Cross-domain consistency loss between the two task networks.

A target-domain image and its translation into the source domain should get
the same prediction from the respective domain-specific network.  The penalty
is task-dependent: a symmetric cross-entropy (or, optionally, a symmetric KL
divergence) between class probability grids, mean ell-1 between depth maps,
mean endpoint error between flow fields.  All variants are symmetric in their
two arguments; values are per-pixel means so the weight is
resolution-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import Depth, Flow, SegProbs, Segmentation, TaskKind
from .taskmodels import EmptySupportError

SYMMETRIC_CROSS_ENTROPY = "symmetric_cross_entropy"
SYMMETRIC_KL = "symmetric_kl"


@dataclass(frozen=True)
class ConsistencyConfig:
    variant: str = SYMMETRIC_CROSS_ENTROPY
    epsilon: float = 1e-7  # probability floor inside every log
    detach_translation: bool = True  # block gradient into the T->S translator

    def __post_init__(self):
        if self.variant not in (SYMMETRIC_CROSS_ENTROPY, SYMMETRIC_KL):
            raise ValueError(f"unknown consistency variant {self.variant!r}")
        if not (0 < self.epsilon <= 1e-4):
            raise ValueError(f"epsilon must be in (0, 1e-4], got {self.epsilon}")


def _prob_tensor(p):
    if isinstance(p, Tensor):
        return p, True
    if isinstance(p, SegProbs):
        return Tensor(np.ascontiguousarray(p.probs.transpose(2, 0, 1))[None]), False
    arr = np.asarray(p)
    if arr.ndim == 3:  # HxWxC value grid
        arr = arr.transpose(2, 0, 1)[None]
    return Tensor(np.ascontiguousarray(arr)), False


def _check_probs(name, t):
    sums = t.data.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=1e-5):
        raise ValueError(f"{name} is not per-pixel normalized (max |sum-1| = {np.abs(sums - 1).max():.3g})")


def consistency_seg(f_t, f_ts, cfg: ConsistencyConfig = ConsistencyConfig()):
    """Segmentation consistency between two probability grids.

    ``symmetric_cross_entropy`` is the sum of both cross-entropy terms,
    averaged over pixels; note it stays positive for identical non-degenerate
    inputs.  ``symmetric_kl`` subtracts the entropies, i.e.
    KL(f_t || f_ts) + KL(f_ts || f_t), which is 0 iff the inputs match.
    """
    p, p_tensor = _prob_tensor(f_t)
    q, q_tensor = _prob_tensor(f_ts)
    if p.data.shape != q.data.shape:
        raise ValueError(f"shape mismatch: {p.data.shape} vs {q.data.shape}")
    _check_probs("f_t", p)
    _check_probs("f_ts", q)
    n_px = p.data.shape[0] * p.data.shape[2] * p.data.shape[3]
    eps = cfg.epsilon
    log_p = ad.log(ad.clip(p, eps, 1.0))
    log_q = ad.log(ad.clip(q, eps, 1.0))
    if cfg.variant == SYMMETRIC_CROSS_ENTROPY:
        cross = ad.add(ad.mul(q, log_p), ad.mul(p, log_q))
        out = ad.mul(ad.sum_all(cross), -1.0 / n_px)
    else:
        # (p - q) (log p - log q) == KL(p||q) + KL(q||p), manifestly >= 0
        out = ad.mul(ad.sum_all(ad.mul(ad.sub(p, q), ad.sub(log_p, log_q))), 1.0 / n_px)
    return out if (p_tensor or q_tensor) else out.item()


def _grid_tensor(x, channels):
    if isinstance(x, Tensor):
        return x, True
    arr = np.asarray(x)
    if arr.ndim == 2:
        arr = arr[None, None]
    elif arr.ndim == 3:  # HxWxC value grid
        arr = arr.transpose(2, 0, 1)[None]
    if arr.shape[1] != channels:
        raise ValueError(f"expected {channels}-channel grid, got shape {arr.shape}")
    return Tensor(np.ascontiguousarray(arr)), False


def consistency_depth(d_t, d_ts, valid=None):
    """Mask-weighted mean |d_t - d_ts|; zero iff equal on valid support.

    Gradient flows into both inputs (unlike the supervised depth loss, where
    the target is a constant).
    """
    a, a_tensor = _grid_tensor(d_t, 1)
    b, b_tensor = _grid_tensor(d_ts, 1)
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    mask = np.ones_like(a.data) if valid is None else np.broadcast_to(
        np.asarray(valid, dtype=a.dtype), a.data.shape
    )
    n_valid = float(mask.sum())
    if n_valid == 0:
        raise EmptySupportError("empty valid mask")
    diff = ad.absolute(ad.sub(a, b))
    out = ad.mul(ad.sum_all(ad.mul(diff, Tensor(np.asarray(mask, dtype=a.dtype)))), 1.0 / n_valid)
    return out if (a_tensor or b_tensor) else out.item()


def consistency_flow(w_t, w_ts, valid=None):
    """Mask-weighted mean endpoint error between two flow fields."""
    a, a_tensor = _grid_tensor(w_t, 2)
    b, b_tensor = _grid_tensor(w_ts, 2)
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    spatial = (a.data.shape[0],) + a.data.shape[2:]
    mask = np.ones(spatial, dtype=a.dtype) if valid is None else np.broadcast_to(
        np.asarray(valid, dtype=a.dtype), spatial
    )
    n_valid = float(mask.sum())
    if n_valid == 0:
        raise EmptySupportError("empty valid mask")
    norms = ad.sqrt_safe(ad.sum_axis(ad.square(ad.sub(a, b)), axis=1, keepdims=False))
    out = ad.mul(ad.sum_all(ad.mul(norms, Tensor(np.asarray(mask, dtype=a.dtype)))), 1.0 / n_valid)
    return out if (a_tensor or b_tensor) else out.item()


def consistency_pair(pred_t, pred_ts, kind: TaskKind, cfg: ConsistencyConfig):
    """Dispatch the kind-specific consistency between two prediction tensors."""
    if isinstance(kind, Segmentation):
        return consistency_seg(pred_t, pred_ts, cfg)
    if isinstance(kind, Depth):
        return consistency_depth(pred_t, pred_ts)
    if isinstance(kind, Flow):
        return consistency_flow(pred_t, pred_ts)
    raise ValueError(f"unknown task kind {kind!r}")


def consistency_loss(batch_t, models, kind: TaskKind, cfg: ConsistencyConfig = ConsistencyConfig()):
    """Full consistency term on a batch of target-domain images.

    Translates the batch into the source domain, runs both task networks, and
    compares their predictions.  Gradient always reaches both task networks;
    it reaches the T->S translator only when ``detach_translation`` is false.
    """
    xt = batch_t if isinstance(batch_t, Tensor) else Tensor(np.asarray(batch_t))
    i_ts = models.g_ts.apply(xt)
    if cfg.detach_translation:
        i_ts = i_ts.detach()
    pred_ts, _ = models.f_s.apply(i_ts)
    pred_t, _ = models.f_t.apply(xt)
    return consistency_pair(pred_t, pred_ts, kind, cfg)
