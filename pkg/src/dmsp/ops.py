"""Linear forward operators with exact adjoints, and degradation synthesis.

All convolutions use periodic (circular) boundaries, so every operator here
is a finite-dimensional linear map with an exact, cheaply computable adjoint.
The composite degradation is ``A = mask . downsample . convolve``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeMismatchError
from .image import as_image, as_kernel, check_finite

__all__ = [
    "convolve",
    "adjoint_convolve",
    "downsample",
    "upsample_adjoint",
    "apply_mask",
    "bayer_mask",
    "DegradationOp",
    "degrade",
]


def _kernel_spectrum(k, shape):
    """FFT of the kernel embedded at the origin of an ``shape`` grid.

    Tap (i, j) of a kernel with center (ch, cw) lands at periodic offset
    (i - ch, j - cw), so a centered delta kernel maps to the identity.
    """
    kh, kw = k.shape
    h, w = shape
    if kh > h or kw > w:
        raise ShapeMismatchError("kernel larger than image", (h, w), (kh, kw))
    pad = np.zeros(shape, dtype=np.float64)
    pad[:kh, :kw] = k
    pad = np.roll(pad, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return np.fft.fft2(pad)


def convolve(x, k):
    """Periodic convolution of each channel of ``x`` with kernel ``k``."""
    x = as_image(x)
    k = as_kernel(k)
    kf = _kernel_spectrum(k, x.shape[-2:])
    out = np.fft.ifft2(kf * np.fft.fft2(x, axes=(-2, -1)), axes=(-2, -1)).real
    return check_finite(out, "convolve output")


def adjoint_convolve(y, k):
    """Adjoint of :func:`convolve`: periodic correlation with ``k``."""
    y = as_image(y)
    k = as_kernel(k)
    kf = _kernel_spectrum(k, y.shape[-2:])
    out = np.fft.ifft2(np.conj(kf) * np.fft.fft2(y, axes=(-2, -1)), axes=(-2, -1)).real
    return check_finite(out, "adjoint_convolve output")


def downsample(x, s):
    """Keep every ``s``-th sample starting at offset (0, 0)."""
    x = as_image(x)
    s = int(s)
    if s < 1:
        raise ValueError(f"scale must be >= 1, got {s}")
    h, w = x.shape[-2:]
    if h % s or w % s:
        raise ShapeMismatchError(f"downsample by {s} needs divisible dims", (h, w), (h % s, w % s))
    return x[:, ::s, ::s].copy()


def upsample_adjoint(y, s):
    """Exact adjoint of :func:`downsample`: scatter samples, zero-fill elsewhere."""
    y = as_image(y)
    s = int(s)
    if s < 1:
        raise ValueError(f"scale must be >= 1, got {s}")
    c, h, w = y.shape
    out = np.zeros((c, h * s, w * s), dtype=np.float64)
    out[:, ::s, ::s] = y
    return out


def apply_mask(x, mask):
    """Elementwise product with a {0,1} mask; self-adjoint and idempotent."""
    x = as_image(x)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim == 2:
        mask = mask[np.newaxis]
    if mask.shape != x.shape:
        raise ShapeMismatchError("mask", x.shape, mask.shape)
    return x * mask


_BAYER_LAYOUT = {
    # channel index of the sample at (row, col) within the repeating 2x2 cell
    "RGGB": ((0, 1), (1, 2)),
    "BGGR": ((2, 1), (1, 0)),
    "GRBG": ((1, 0), (2, 1)),
    "GBRG": ((1, 2), (0, 1)),
}


def bayer_mask(height, width, pattern="RGGB"):
    """Binary (3, H, W) mask selecting one RGB channel per pixel."""
    pattern = pattern.upper()
    if pattern not in _BAYER_LAYOUT:
        raise ValueError(f"unknown Bayer pattern {pattern!r}; use one of {sorted(_BAYER_LAYOUT)}")
    layout = _BAYER_LAYOUT[pattern]
    mask = np.zeros((3, height, width), dtype=np.float64)
    for dy in range(2):
        for dx in range(2):
            mask[layout[dy][dx], dy::2, dx::2] = 1.0
    return mask


@dataclass(frozen=True)
class DegradationOp:
    """Composite forward operator ``mask . downsample(scale) . convolve(kernel)``.

    ``mask`` (if any) has the shape of the operator output. ``n_observed``
    counts actual observation samples (mask ones, or the full downsampled
    grid), ``n_latent`` counts latent-image samples; these are the N and M
    of the adaptive data-term weight.
    """

    kernel: np.ndarray
    scale: int = 1
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kernel", as_kernel(self.kernel))
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=np.float64)
            if m.ndim == 2:
                m = m[np.newaxis]
            if not np.all((m == 0.0) | (m == 1.0)):
                raise ValueError("mask values must be 0 or 1")
            object.__setattr__(self, "mask", m)

    def with_kernel(self, kernel):
        return DegradationOp(kernel=kernel, scale=self.scale, mask=self.mask)

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if h % self.scale or w % self.scale:
            raise ShapeMismatchError(
                f"downsample by {self.scale} needs divisible dims", (h, w), in_shape[-2:]
            )
        return (c, h // self.scale, w // self.scale)

    def apply(self, x):
        y = convolve(x, self.kernel)
        if self.scale > 1:
            y = downsample(y, self.scale)
        if self.mask is not None:
            y = apply_mask(y, self.mask)
        return y

    def adjoint(self, y):
        v = as_image(y)
        if self.mask is not None:
            v = apply_mask(v, self.mask)
        if self.scale > 1:
            v = upsample_adjoint(v, self.scale)
        return adjoint_convolve(v, self.kernel)

    def n_observed(self, in_shape):
        if self.mask is not None:
            return int(self.mask.sum())
        return int(np.prod(self.out_shape(in_shape)))

    def n_latent(self, in_shape):
        return int(np.prod(in_shape))


def degrade(x, op, sigma_n, rng):
    """Apply the forward operator and add i.i.d. Gaussian noise of std ``sigma_n``.

    Bit-deterministic for a fixed ``rng`` state; ``sigma_n=0`` draws nothing.
    """
    if sigma_n < 0:
        raise ValueError(f"sigma_n must be >= 0, got {sigma_n}")
    y = op.apply(x)
    if sigma_n > 0:
        y = y + sigma_n * rng.standard_normal(y.shape)
    return y
