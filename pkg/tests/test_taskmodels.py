"""Task network contracts, task losses, feature-level adversarial loss."""

import numpy as np
import pytest

from crdoco.autodiff import Tensor
from crdoco.core import (
    Depth,
    DepthTarget,
    Flow,
    FlowTarget,
    ImageGrid,
    SegTarget,
    Segmentation,
    quantize_unit,
)
from crdoco.taskmodels import (
    EmptySupportError,
    FeatureDiscriminator,
    TaskNet,
    feature_adv_loss,
    forward,
    task_loss,
    translated_label,
)

from conftest import central_diff, max_rel_err
from stubs import AffineDiscriminator, ConstDiscriminator, TinyTaskNet


def rand_image(rng, h=64, w=64, c=3):
    return ImageGrid(quantize_unit(rng.uniform(-1, 1, (h, w, c))))


def test_forward_seg_normalized(rng):
    net = TaskNet(Segmentation(4), base=8, rng=rng)
    pred, feat = forward(net, rand_image(rng))
    sums = pred.probs.sum(axis=2)
    assert np.abs(sums - 1.0).max() <= 1e-5


def test_forward_feature_shape(rng):
    net = TaskNet(Segmentation(4), base=8, rng=rng)
    _, feat = forward(net, rand_image(rng))
    assert feat.values.shape == (16, 16, 64)


def test_forward_zero_head_constant_depth(rng):
    net = TaskNet(Depth(), base=8, rng=rng)
    net.head.w.data = np.zeros_like(net.head.w.data)
    net.head.b.data = np.zeros_like(net.head.b.data)
    pred, _ = forward(net, rand_image(rng))
    assert np.allclose(pred.depth, pred.depth.flat[0])
    assert np.all(pred.depth > 0)


def test_forward_kind_mismatch(rng):
    net = TaskNet(Segmentation(4), base=8, rng=rng)
    with pytest.raises(ValueError, match="task-kind mismatch"):
        forward(net, rand_image(rng), kind=Depth())


def test_forward_deterministic(rng):
    net = TaskNet(Flow(), base=8, rng=rng)
    img = rand_image(rng, c=6)
    a, fa = forward(net, img)
    b, fb = forward(net, img)
    assert np.array_equal(a.flow, b.flow) and np.array_equal(fa.values, fb.values)


def test_task_loss_onehot_correct(rng):
    classes = rng.integers(0, 4, (8, 8))
    probs = np.zeros((8, 8, 4), np.float32)
    np.put_along_axis(probs, classes[:, :, None], 1.0, axis=2)
    from crdoco.core import SegProbs

    loss = task_loss(SegProbs(probs), SegTarget(classes), Segmentation(4))
    assert loss <= 1e-6


def test_task_loss_uniform_is_log_c(rng):
    from crdoco.core import SegProbs

    classes = rng.integers(0, 4, (8, 8))
    probs = np.full((8, 8, 4), 0.25, np.float32)
    loss = task_loss(SegProbs(probs), SegTarget(classes), Segmentation(4))
    assert abs(loss - np.log(4.0)) < 1e-6


def test_task_loss_seg_matches_naive_oracle(rng):
    from crdoco.core import SegProbs

    logits = rng.standard_normal((6, 6, 5))
    probs = np.exp(logits) / np.exp(logits).sum(axis=2, keepdims=True)
    classes = rng.integers(0, 5, (6, 6))
    classes[0, :3] = 255
    loss = task_loss(SegProbs(probs), SegTarget(classes), Segmentation(5))

    total, n = 0.0, 0
    for i in range(6):
        for j in range(6):
            if classes[i, j] == 255:
                continue
            total += -np.log(max(float(probs[i, j, classes[i, j]]), 1e-7))
            n += 1
    assert abs(loss - total / n) < 1e-6


def test_task_loss_depth_l1(rng):
    from crdoco.core import DepthPred

    target = rng.uniform(1, 4, (8, 8)).astype(np.float32)
    valid = rng.random((8, 8)) > 0.3
    pred = target + rng.standard_normal((8, 8)).astype(np.float32) * 0.2
    loss = task_loss(DepthPred(np.abs(pred)), DepthTarget(target, valid), Depth())
    want = np.abs(np.abs(pred) - target)[valid].mean()
    assert abs(loss - want) < 1e-6


def test_task_loss_flow_three_four_five():
    from crdoco.core import FlowPred

    flow_pred = np.zeros((8, 8, 2), np.float32)
    flow_pred[3, 3] = (3.0, 4.0)
    target = np.zeros((8, 8, 2), np.float32)
    valid = np.zeros((8, 8), bool)
    valid[3, 3] = True
    loss = task_loss(FlowPred(flow_pred), FlowTarget(target, valid), Flow())
    assert abs(loss - 5.0) < 1e-6


def test_task_loss_ignore_mask_property(rng):
    from crdoco.core import SegProbs

    classes = rng.integers(0, 4, (8, 8))
    classes[:4] = 255
    logits = rng.standard_normal((8, 8, 4))
    probs = (np.exp(logits) / np.exp(logits).sum(axis=2, keepdims=True)).astype(np.float64)
    base = task_loss(SegProbs(probs), SegTarget(classes), Segmentation(4))
    tampered = probs.copy()
    tampered[:4] = 0.25  # only ignored rows change
    after = task_loss(SegProbs(tampered), SegTarget(classes), Segmentation(4))
    assert base == after


def test_task_loss_empty_support():
    from crdoco.core import SegProbs

    probs = np.full((4, 4, 2), 0.5, np.float32)
    classes = np.full((4, 4), 255)
    with pytest.raises(EmptySupportError):
        task_loss(SegProbs(probs), SegTarget(classes), Segmentation(2))
    depth = np.ones((4, 4), np.float32)
    with pytest.raises(EmptySupportError):
        task_loss(
            __import__("crdoco.core", fromlist=["DepthPred"]).DepthPred(depth),
            DepthTarget(depth, np.zeros((4, 4), bool)),
            Depth(),
        )


def test_feature_adv_loss_half():
    f = Tensor(np.zeros((1, 4, 4, 4)))
    loss = feature_adv_loss(ConstDiscriminator(0.5), f, f)
    assert abs(loss.item() - 2 * np.log(0.5)) < 1e-9


def test_feature_adv_loss_stubbed():
    f = Tensor(np.zeros((1, 4, 4, 4)))
    loss = feature_adv_loss(ConstDiscriminator(0.6), f, f)
    assert abs(loss.item() - (np.log(0.6) + np.log(0.4))) < 1e-9


def test_feature_adv_loss_optimal_limit():
    f = Tensor(np.zeros((1, 4, 4, 4)))
    vals = [
        feature_adv_loss(ConstDiscriminator(None, split=(1 - e, e)), f, f).item()
        for e in (1e-2, 1e-4, 1e-6)
    ]
    assert vals[0] < vals[1] < vals[2] < 1e-3


def test_translated_label_identity(rng):
    y = SegTarget(rng.integers(0, 4, (8, 8)))
    assert translated_label(y) is y
    d = DepthTarget(rng.uniform(1, 2, (8, 8)).astype(np.float32))
    assert translated_label(d) is d


@pytest.mark.parametrize("kind", [Segmentation(3), Depth(), Flow()])
def test_task_loss_gradients(kind, rng):
    """Analytic gradients through a tiny task net vs central differences."""
    cin = 6 if isinstance(kind, Flow) else 3
    net = TinyTaskNet(kind, cin=cin, rng=rng)
    x = Tensor(rng.uniform(-1, 1, (1, cin, 8, 8)))
    if isinstance(kind, Segmentation):
        target = SegTarget(rng.integers(0, 3, (8, 8)))
    elif isinstance(kind, Depth):
        target = DepthTarget(rng.uniform(0.5, 3.0, (8, 8)).astype(np.float32))
    else:
        target = FlowTarget(rng.standard_normal((8, 8, 2)).astype(np.float32))
    params = list(net.parameters())
    assert sum(p.data.size for p in params) <= 100

    pred, _ = net.apply(x)
    loss = task_loss(pred, target, kind)
    loss.backward()
    # the feature branch does not feed the task loss, so its grads stay None
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    def f():
        p, _ = net.apply(x)
        return task_loss(p, target, kind).item()

    numeric = central_diff(f, [p.data for p in params], eps=1e-4)
    for a, n in zip(analytic, numeric):
        assert max_rel_err(a, n) < 1e-4


def test_feature_adv_gradients(rng):
    d = AffineDiscriminator(scale=0.4, shift=0.1)
    real = Tensor(rng.standard_normal((1, 4, 4, 4)))
    fake = Tensor(rng.standard_normal((1, 4, 4, 4)))
    loss = feature_adv_loss(d, real, fake)
    loss.backward()
    analytic = [d.scale.grad.copy(), d.shift.grad.copy()]

    def f():
        return feature_adv_loss(d, real, fake).item()

    numeric = central_diff(f, [d.scale.data, d.shift.data], eps=1e-4)
    for a, n in zip(analytic, numeric):
        assert max_rel_err(a, n) < 1e-4


def test_feature_discriminator_range(rng):
    d = FeatureDiscriminator(rng=rng)
    f = Tensor(rng.standard_normal((1, 64, 16, 16)).astype(np.float32))
    out = d.apply(f).data
    assert np.all(out > 0) and np.all(out < 1)
