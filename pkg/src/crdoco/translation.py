"""Bidirectional image translation and image-level adversarial machinery.

``TranslatorNet`` maps images between the two domains through a compact
encoder / residual-core / decoder with a saturating tanh output, so results
always satisfy the [-1, 1] image contract.  ``ImageDiscriminator`` scores
patch realness with four residual conv+relu blocks and a sigmoid head.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import ImageGrid, check_image
from .nn import Conv2d, InstanceNorm2d, Module

LOG_EPS = 1e-7  # floor inside every discriminator log


class _ResBlock(Module):
    def __init__(self, ch, rng, dtype):
        super().__init__()
        self.c1 = Conv2d(ch, ch, 3, rng, dtype=dtype)
        self.n1 = InstanceNorm2d(ch, dtype=dtype)
        self.c2 = Conv2d(ch, ch, 3, rng, dtype=dtype)
        self.n2 = InstanceNorm2d(ch, dtype=dtype)

    def forward(self, x):
        y = ad.relu(self.n1.forward(self.c1.forward(x)))
        y = self.n2.forward(self.c2.forward(y))
        return ad.add(x, y)


class TranslatorNet(Module):
    """Encoder (2 strided convs), 4 residual blocks, decoder (2 upsamples), tanh."""

    def __init__(self, channels=3, base=16, n_res=4, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        wide = 2 * base
        self.stem = Conv2d(channels, base, 3, rng, dtype=dtype)
        self.stem_n = InstanceNorm2d(base, dtype=dtype)
        self.down1 = Conv2d(base, wide, 3, rng, stride=2, dtype=dtype)
        self.down1_n = InstanceNorm2d(wide, dtype=dtype)
        self.down2 = Conv2d(wide, wide, 3, rng, stride=2, dtype=dtype)
        self.down2_n = InstanceNorm2d(wide, dtype=dtype)
        for i in range(n_res):
            setattr(self, f"res{i}", _ResBlock(wide, rng, dtype))
        self.n_res = n_res
        self.up1 = Conv2d(wide, base, 3, rng, dtype=dtype)
        self.up1_n = InstanceNorm2d(base, dtype=dtype)
        self.up2 = Conv2d(base, base, 3, rng, dtype=dtype)
        self.up2_n = InstanceNorm2d(base, dtype=dtype)
        self.out = Conv2d(base, channels, 3, rng, dtype=dtype)

    def apply(self, x: Tensor) -> Tensor:
        y = ad.relu(self.stem_n.forward(self.stem.forward(x)))
        y = ad.relu(self.down1_n.forward(self.down1.forward(y)))
        y = ad.relu(self.down2_n.forward(self.down2.forward(y)))
        for i in range(self.n_res):
            y = getattr(self, f"res{i}").forward(y)
        y = ad.relu(self.up1_n.forward(self.up1.forward(ad.upsample2x(y))))
        y = ad.relu(self.up2_n.forward(self.up2.forward(ad.upsample2x(y))))
        return ad.tanh(self.out.forward(y))


class IdentityTranslator(Module):
    """Test-only translator that is exactly the identity function."""

    def __init__(self, channels=3):
        super().__init__()
        self.channels = channels

    def apply(self, x: Tensor) -> Tensor:
        return x


class ImageDiscriminator(Module):
    """Patch realness map in (0, 1): strided stem, four conv+relu residual blocks."""

    def __init__(self, channels=3, base=16, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        wide = 2 * base
        self.stem = Conv2d(channels, base, 3, rng, stride=2, dtype=dtype)
        self.blk1 = Conv2d(base, base, 3, rng, dtype=dtype)
        self.blk2 = Conv2d(base, base, 3, rng, dtype=dtype)
        self.down = Conv2d(base, wide, 3, rng, stride=2, dtype=dtype)
        self.blk3 = Conv2d(wide, wide, 3, rng, dtype=dtype)
        self.blk4 = Conv2d(wide, wide, 3, rng, dtype=dtype)
        self.head = Conv2d(wide, 1, 1, rng, pad=0, dtype=dtype)

    def apply(self, x: Tensor) -> Tensor:
        y = ad.relu(self.stem.forward(x))
        y = ad.add(y, ad.relu(self.blk1.forward(y)))
        y = ad.add(y, ad.relu(self.blk2.forward(y)))
        y = ad.relu(self.down.forward(y))
        y = ad.add(y, ad.relu(self.blk3.forward(y)))
        y = ad.add(y, ad.relu(self.blk4.forward(y)))
        return ad.sigmoid(self.head.forward(y))


# ---------------------------------------------------------------------------
# operations


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def grid_to_nchw(grid: ImageGrid):
    return np.ascontiguousarray(grid.values.transpose(2, 0, 1))[None]


def nchw_to_grid(arr) -> ImageGrid:
    return ImageGrid(np.asarray(arr)[0].transpose(1, 2, 0))


def translate(net, image: ImageGrid) -> ImageGrid:
    """Run a translator on one image; output keeps shape and the [-1,1] range."""
    problems = check_image(image)
    if problems:
        raise ValueError("; ".join(v.message for v in problems))
    with ad.no_grad():
        out = net.apply(Tensor(grid_to_nchw(image)))
    return nchw_to_grid(out.data)


def reconstruction_loss(g_st, g_ts, batch_s, batch_t) -> Tensor:
    """Mean |round-trip - original| over pixels/channels, source plus target side."""
    xs, xt = _as_tensor(batch_s), _as_tensor(batch_t)
    if xs.data.size == 0 or xt.data.size == 0:
        raise ValueError("reconstruction_loss needs nonempty batches")
    cyc_s = g_ts.apply(g_st.apply(xs))
    cyc_t = g_st.apply(g_ts.apply(xt))
    term_s = ad.mean_all(ad.absolute(ad.sub(cyc_s, xs)))
    term_t = ad.mean_all(ad.absolute(ad.sub(cyc_t, xt)))
    return ad.add(term_s, term_t)


def _mean_log(t: Tensor) -> Tensor:
    return ad.mean_all(ad.log(ad.clip(t, LOG_EPS, 1.0)))


def image_adv_loss(d, real, fake) -> Tensor:
    """E[log D(real)] + E[log(1 - D(fake))], averaged over the realness map.

    The discriminator ascends this; the translator descends its fake-side
    term (see ``generator_adv_loss`` for the non-saturating surrogate).
    """
    d_real = d.apply(_as_tensor(real))
    d_fake = d.apply(_as_tensor(fake))
    one_minus = ad.sub(Tensor(np.asarray(1.0, dtype=d_fake.dtype)), d_fake)
    return ad.add(_mean_log(d_real), _mean_log(one_minus))


def discriminator_loss(d, real, fake, mode="vanilla") -> Tensor:
    """Loss the discriminator *descends* in its ascent phase."""
    if mode == "vanilla":
        return ad.mul(image_adv_loss(d, real, fake), -1.0)
    if mode == "lsgan":
        d_real = d.apply(_as_tensor(real))
        d_fake = d.apply(_as_tensor(fake))
        one = Tensor(np.asarray(1.0, dtype=d_real.dtype))
        return ad.add(
            ad.mean_all(ad.square(ad.sub(d_real, one))),
            ad.mean_all(ad.square(d_fake)),
        )
    raise ValueError(f"unknown gan mode: {mode!r}")


def generator_adv_loss(d, fake, mode="vanilla") -> Tensor:
    """Generator-side adversarial term (to minimize).

    ``vanilla`` uses the non-saturating form -E[log D(fake)]; ``lsgan`` uses
    E[(D(fake) - 1)^2].
    """
    d_fake = d.apply(_as_tensor(fake))
    if mode == "vanilla":
        return ad.mul(_mean_log(d_fake), -1.0)
    if mode == "lsgan":
        one = Tensor(np.asarray(1.0, dtype=d_fake.dtype))
        return ad.mean_all(ad.square(ad.sub(d_fake, one)))
    raise ValueError(f"unknown gan mode: {mode!r}")
