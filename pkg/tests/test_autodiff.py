"""Gradient checks for every autodiff op used by the networks and losses."""

import numpy as np
import pytest

from crdoco import autodiff as ad
from crdoco.autodiff import Tensor

from conftest import central_diff, max_rel_err


def check_op(build, arrays, tol=1e-6):
    """build(tensors) -> scalar Tensor; compares backward vs central diffs."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]

    out = build(tensors)
    out.backward()
    analytic = [t.grad for t in tensors]

    def f():
        fresh = [Tensor(a, requires_grad=False) for a in arrays]
        return build(fresh).item()

    numeric = central_diff(f, arrays)
    for a, n in zip(analytic, numeric):
        assert a is not None
        assert max_rel_err(a, n, floor=1e-4) < tol, (a, n)


def test_add_mul_broadcast(rng):
    a = rng.standard_normal((2, 3, 4, 4))
    b = rng.standard_normal((1, 3, 1, 1))
    check_op(lambda ts: ad.mean_all(ad.mul(ad.add(ts[0], ts[1]), ts[0])), [a, b])


def test_div(rng):
    a = rng.standard_normal((3, 5))
    b = rng.standard_normal((3, 5)) + 3.0
    check_op(lambda ts: ad.mean_all(ad.div(ts[0], ts[1])), [a, b])


def test_square_abs_log(rng):
    a = rng.standard_normal((4, 4)) + 3.0
    check_op(lambda ts: ad.sum_all(ad.log(ad.square(ts[0]))), [a])
    b = rng.standard_normal((4, 4)) + 0.1  # keep away from |x|=0 kink
    b[np.abs(b) < 0.05] = 0.5
    check_op(lambda ts: ad.sum_all(ad.absolute(ts[0])), [b])


def test_sqrt_safe(rng):
    a = rng.random((4, 4)) + 0.5
    check_op(lambda ts: ad.sum_all(ad.sqrt_safe(ts[0])), [a])
    z = Tensor(np.zeros((2, 2)), requires_grad=True)
    out = ad.sum_all(ad.sqrt_safe(z))
    out.backward()
    assert np.all(z.grad == 0.0)


def test_clip_gradient_masked(rng):
    a = np.linspace(-2, 2, 9)
    t = Tensor(a, requires_grad=True)
    ad.sum_all(ad.clip(t, -1.0, 1.0)).backward()
    np.testing.assert_array_equal(t.grad, (np.abs(a) < 1.0).astype(float))


@pytest.mark.parametrize(
    "op",
    [ad.relu, ad.tanh, ad.sigmoid, ad.softplus, lambda x: ad.leaky_relu(x, 0.2)],
)
def test_activations(op, rng):
    a = rng.standard_normal((3, 6)) + 0.05
    a[np.abs(a) < 0.02] = 0.3  # avoid relu kink for finite differences
    check_op(lambda ts: ad.mean_all(op(ts[0])), [a])


def test_softmax_channels(rng):
    a = rng.standard_normal((2, 4, 3, 3))
    proj = rng.standard_normal((2, 4, 3, 3))
    check_op(lambda ts: ad.sum_all(ad.mul(ad.softmax_channels(ts[0]), proj)), [a])
    p = ad.softmax_channels(Tensor(a)).data
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_reductions_and_concat(rng):
    a = rng.standard_normal((2, 3, 2, 2))
    b = rng.standard_normal((1, 3, 2, 2))
    check_op(
        lambda ts: ad.mean_all(ad.square(ad.concat0([ts[0], ts[1]]))), [a, b]
    )
    check_op(lambda ts: ad.sum_all(ad.sum_axis(ts[0], 1)), [a])


def test_upsample2x(rng):
    a = rng.standard_normal((1, 2, 3, 3))
    proj = rng.standard_normal((1, 2, 6, 6))
    check_op(lambda ts: ad.sum_all(ad.mul(ad.upsample2x(ts[0]), proj)), [a])


def test_conv2d(rng):
    x = rng.standard_normal((2, 3, 6, 6))
    w = 0.4 * rng.standard_normal((4, 3, 3, 3))
    b = 0.1 * rng.standard_normal(4)
    proj = rng.standard_normal((2, 4, 3, 3))

    def build(ts):
        out = ad.conv2d(ts[0], ts[1], ts[2], stride=2, pad=1)
        return ad.sum_all(ad.mul(out, proj))

    check_op(build, [x, w, b])


def test_instance_norm(rng):
    x = rng.standard_normal((2, 3, 4, 4))
    gamma = 1.0 + 0.2 * rng.standard_normal(3)
    beta = 0.1 * rng.standard_normal(3)
    proj = rng.standard_normal((2, 3, 4, 4))

    def build(ts):
        out = ad.instance_norm(ts[0], ts[1], ts[2])
        return ad.sum_all(ad.mul(out, proj))

    check_op(build, [x, gamma, beta], tol=1e-4)


def test_fanout_accumulates(rng):
    a = rng.standard_normal((3, 3))
    t = Tensor(a, requires_grad=True)
    out = ad.sum_all(ad.add(ad.square(t), ad.mul(t, 3.0)))
    out.backward()
    np.testing.assert_allclose(t.grad, 2 * a + 3.0)


def test_detach_blocks_gradient(rng):
    t = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
    out = ad.sum_all(ad.mul(t.detach(), 2.0))
    assert out.requires_grad is False
    out2 = ad.sum_all(ad.add(ad.mul(t.detach(), 2.0), t))
    out2.backward()
    np.testing.assert_allclose(t.grad, np.ones((3, 3)))


def test_no_grad_builds_no_graph(rng):
    t = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
    with ad.no_grad():
        out = ad.mean_all(ad.square(t))
    assert out.requires_grad is False and out._parents == ()


def test_dtype_preserved(rng):
    t = Tensor(rng.standard_normal((2, 2)).astype(np.float32), requires_grad=True)
    out = ad.mean_all(ad.tanh(ad.square(t)))
    assert out.dtype == np.float32
    out.backward()
    assert t.grad.dtype == np.float32
