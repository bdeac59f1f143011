"""Translator contracts, reconstruction loss, image-level adversarial loss."""

import numpy as np
import pytest

from crdoco import autodiff as ad
from crdoco.autodiff import Tensor
from crdoco.core import ImageGrid, quantize_unit
from crdoco.nn import SGD
from crdoco.translation import (
    IdentityTranslator,
    ImageDiscriminator,
    TranslatorNet,
    generator_adv_loss,
    grid_to_nchw,
    image_adv_loss,
    reconstruction_loss,
    translate,
)

from conftest import central_diff, max_rel_err
from stubs import AffineDiscriminator, AffineTranslator, ConstDiscriminator, FnTranslator


def rand_image(rng, h=64, w=64, c=3):
    return ImageGrid(quantize_unit(rng.uniform(-1, 1, (h, w, c))))


def test_identity_translator_is_exact(rng):
    img = rand_image(rng)
    out = translate(IdentityTranslator(), img)
    np.testing.assert_allclose(out.values, img.values, atol=1e-6)


def test_translator_shape_and_range(rng):
    net = TranslatorNet(channels=3, base=8, rng=rng)
    img = rand_image(rng)
    out = translate(net, img)
    assert out.values.shape == (64, 64, 3)
    assert out.values.min() >= -1.0 and out.values.max() <= 1.0


def test_translator_deterministic(rng):
    net = TranslatorNet(channels=3, base=8, rng=rng)
    img = rand_image(rng)
    a = translate(net, img)
    b = translate(net, img)
    assert np.array_equal(a.values, b.values)


def test_translator_rejects_bad_shape(rng):
    img = ImageGrid(quantize_unit(rng.uniform(-1, 1, (30, 30, 3))))
    with pytest.raises(ValueError, match="divisible"):
        translate(TranslatorNet(rng=rng), img)


def test_translator_param_count(rng):
    # compact by design: ~100k parameters at the default width
    net = TranslatorNet(channels=3, base=16, rng=rng)
    assert 5e4 < net.param_count() < 2e5


def test_reconstruction_zero_at_identity(rng):
    xs = rng.uniform(-1, 1, (2, 3, 8, 8))
    xt = rng.uniform(-1, 1, (2, 3, 8, 8))
    loss = reconstruction_loss(IdentityTranslator(), IdentityTranslator(), xs, xt)
    assert loss.item() == 0.0


def test_reconstruction_constant_offset(rng):
    # source round trip adds 0.1 everywhere, target round trip is identity
    xs = rng.uniform(-1.0, 0.0, (1, 3, 4, 4))
    xt = rng.uniform(0.5, 1.0, (1, 3, 4, 4))
    g_st = FnTranslator(lambda x: np.where(x < 0.25, x + 7.0, x))
    g_ts = FnTranslator(lambda y: np.where(y > 5.0, y - 7.0 + 0.1, y))
    loss = reconstruction_loss(g_st, g_ts, xs, xt)
    assert abs(loss.item() - 0.1) < 1e-7


def test_reconstruction_matches_elementwise_oracle(rng):
    xs = rng.uniform(-1, 1, (2, 3, 4, 4))
    xt = rng.uniform(-1, 1, (2, 3, 4, 4))
    g_st = FnTranslator(lambda x: np.tanh(1.3 * x + 0.2))
    g_ts = FnTranslator(lambda x: np.tanh(0.7 * x - 0.1))
    loss = reconstruction_loss(g_st, g_ts, xs, xt).item()

    def naive(batch, f, g):
        total = 0.0
        n = 0
        for sample in batch:
            for c in range(sample.shape[0]):
                for i in range(sample.shape[1]):
                    for j in range(sample.shape[2]):
                        v = sample[c, i, j]
                        total += abs(g(f(v)) - v)
                        n += 1
        return total / n

    f_st = lambda v: np.tanh(1.3 * v + 0.2)
    f_ts = lambda v: np.tanh(0.7 * v - 0.1)
    want = naive(xs, f_st, f_ts) + naive(xt, f_ts, f_st)
    assert abs(loss - want) < 1e-6


def test_reconstruction_rejects_empty():
    with pytest.raises(ValueError, match="nonempty"):
        reconstruction_loss(
            IdentityTranslator(), IdentityTranslator(),
            np.zeros((0, 3, 4, 4)), np.zeros((1, 3, 4, 4)),
        )


def test_image_adv_loss_half():
    x = Tensor(np.zeros((1, 3, 8, 8)))
    loss = image_adv_loss(ConstDiscriminator(0.5), x, x)
    assert abs(loss.item() - 2 * np.log(0.5)) < 1e-9


def test_image_adv_loss_stubbed_values():
    x = Tensor(np.zeros((1, 3, 8, 8)))
    loss = image_adv_loss(ConstDiscriminator(None, split=(0.8, 0.3)), x, x)
    assert abs(loss.item() - (np.log(0.8) + np.log(0.7))) < 1e-9


def test_image_adv_loss_optimal_limit():
    x = Tensor(np.zeros((1, 3, 8, 8)))
    prev = -10.0
    for eps in (1e-2, 1e-4, 1e-6):
        val = image_adv_loss(ConstDiscriminator(None, split=(1 - eps, eps)), x, x).item()
        assert val > prev
        prev = val
    assert abs(prev) < 1e-3  # approaches the supremum 0


def test_image_adv_loss_matches_formula_oracle(rng):
    real = Tensor(rng.uniform(-1, 1, (2, 3, 4, 4)))
    fake = Tensor(rng.uniform(-1, 1, (2, 3, 4, 4)))
    d = AffineDiscriminator(scale=0.8, shift=-0.1)
    loss = image_adv_loss(d, real, fake).item()

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    vals_r = [np.log(sig(0.8 * v - 0.1)) for v in real.data.ravel()]
    vals_f = [np.log(1.0 - sig(0.8 * v - 0.1)) for v in fake.data.ravel()]
    want = np.mean(vals_r) + np.mean(vals_f)
    assert abs(loss - want) < 1e-12


def test_reconstruction_gradient_four_parameter_stub(rng):
    """Analytic gradient of the cycle loss vs central differences (1e-4 step)."""
    xs = rng.uniform(-0.8, 0.8, (1, 3, 8, 8))
    xt = rng.uniform(-0.8, 0.8, (1, 3, 8, 8))
    g_st = AffineTranslator(0.9, 0.05)
    g_ts = AffineTranslator(1.1, -0.02)
    params = [g_st.scale, g_st.shift, g_ts.scale, g_ts.shift]

    loss = reconstruction_loss(g_st, g_ts, xs, xt)
    loss.backward()
    analytic = [p.grad.copy() for p in params]

    def f():
        return reconstruction_loss(g_st, g_ts, xs, xt).item()

    numeric = central_diff(f, [p.data for p in params], eps=1e-4)
    for a, n in zip(analytic, numeric):
        assert max_rel_err(a, n) < 1e-4


def test_adversarial_sign_contract(rng):
    """One ascent step helps the discriminator; one descent step helps the
    generator-side term (small fixed learning rate, frozen batch)."""
    real = Tensor(rng.uniform(-1, 1, (1, 3, 8, 8)))
    latent = Tensor(rng.uniform(-1, 1, (1, 3, 8, 8)))
    for seed in range(5):
        srng = np.random.default_rng(seed)
        d = AffineDiscriminator(scale=srng.normal(0.5, 0.2), shift=srng.normal(0, 0.2))
        g = AffineTranslator(srng.normal(1.0, 0.2), srng.normal(0, 0.1))

        before = image_adv_loss(d, real, g.apply(latent).detach())
        before.backward()
        for p in [d.scale, d.shift]:  # ascent
            p.data = p.data + 1e-3 * p.grad
            p.grad = None
        after = image_adv_loss(d, real, g.apply(latent).detach())
        assert after.item() >= before.item() - 1e-12

        gen_before = generator_adv_loss(d, g.apply(latent))
        gen_before.backward()
        for p in [g.scale, g.shift]:  # descent on the generator-side term
            p.data = p.data - 1e-3 * p.grad
            p.grad = None
        gen_after = generator_adv_loss(d, g.apply(latent))
        assert gen_after.item() <= gen_before.item() + 1e-12


def test_discriminator_output_in_open_interval(rng):
    d = ImageDiscriminator(channels=3, base=4, rng=rng)
    x = Tensor(rng.uniform(-1, 1, (1, 3, 32, 32)).astype(np.float32))
    out = d.apply(x).data
    assert np.all(out > 0.0) and np.all(out < 1.0)


def test_grid_tensor_round_trip(rng):
    img = rand_image(rng)
    arr = grid_to_nchw(img)
    assert arr.shape == (1, 3, 64, 64)
    np.testing.assert_array_equal(arr[0].transpose(1, 2, 0), img.values)
