"""Data-term gradients for fixed-noise (NB) and noise-adaptive (NA)
restoration, the closed-form noise-variance estimate, and the kernel
gradient used in blind deconvolution.

All gradients here point in the descent direction of the negated
restoration objective, i.e. they equal the gradient of the data misfit:
subtracting them (times a step size) increases the objective.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ExactFitError, ShapeMismatchError
from .image import as_image
from .ops import DegradationOp

__all__ = ["DataTermConfig", "grad_nb", "lambda_na", "grad_na", "estimate_sigma_n", "kernel_grad"]


@dataclass(frozen=True)
class DataTermConfig:
    """kind "nb" needs a positive sigma_n; "na" weighs the misfit adaptively.

    ``sigma`` is the prior smoothing level entering the adaptive weight's
    kernel-norm term.
    """

    kind: str
    op: DegradationOp
    sigma: float = 0.0
    sigma_n: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("nb", "na"):
            raise ValueError(f"unknown data-term kind {self.kind!r}")
        if self.kind == "nb":
            if self.sigma_n is None or self.sigma_n <= 0:
                raise ValueError("nb data term requires sigma_n > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def _residual(x, y, op):
    x = as_image(x)
    y = as_image(y)
    ax = op.apply(x)
    if ax.shape != y.shape:
        raise ShapeMismatchError("observation", ax.shape, y.shape)
    return x, y, ax - y


def grad_nb(x, y, cfg):
    """(1/sigma_n^2) A^T (A x - y)."""
    if cfg.kind != "nb":
        raise ValueError("grad_nb requires an nb config")
    x, y, resid = _residual(x, y, cfg.op)
    return cfg.op.adjoint(resid) / cfg.sigma_n**2


def _na_denominator(x, y, k, cfg):
    x, y, resid = _residual(x, y, cfg.op.with_kernel(k) if k is not None else cfg.op)
    m = cfg.op.n_latent(x.shape)
    kern = cfg.op.kernel if k is None else np.asarray(k, dtype=np.float64)
    return x, y, resid, float(np.sum(resid**2) + m * cfg.sigma**2 * np.sum(kern**2))


def lambda_na(x, y, k, cfg):
    """Adaptive data weight N / (|y - A x|^2 + M sigma^2 |k|^2)."""
    if cfg.kind != "na":
        raise ValueError("lambda_na requires an na config")
    x, y, _, denom = _na_denominator(x, y, k, cfg)
    # FFT round-trips leave ~1e-16-per-sample residue, so an exact fit never
    # yields a literal zero; guard against denominators at roundoff scale
    if denom <= 1e-24 * max(1.0, float(np.sum(y**2))):
        raise ExactFitError(
            "adaptive weight undefined: exact data fit with sigma = 0 (residual and "
            "kernel term both vanish)"
        )
    return cfg.op.n_observed(x.shape) / denom


def grad_na(x, y, cfg):
    """lambda^t A^T (A x - y) with the weight evaluated at the current x."""
    lam = lambda_na(x, y, None, cfg)
    _, _, resid = _residual(x, y, cfg.op)
    return lam * cfg.op.adjoint(resid)


def estimate_sigma_n(x, y, k, cfg):
    """Closed-form noise std: sqrt((|y - A x|^2 + M sigma^2 |k|^2) / N)."""
    x, y, _, denom = _na_denominator(x, y, k, cfg)
    n = cfg.op.n_observed(x.shape)
    if n <= 0:
        raise ValueError("no observed samples")
    return float(np.sqrt(denom / n))


def _correlate_crop(x, resid_img, kshape):
    """Adjoint of k -> k * x at ``resid_img``: periodic cross-correlation of x
    with the residual, restricted to the kernel support (summed over channels).
    """
    xf = np.fft.fft2(x, axes=(-2, -1))
    rf = np.fft.fft2(resid_img, axes=(-2, -1))
    corr = np.fft.ifft2(np.conj(xf) * rf, axes=(-2, -1)).real.sum(axis=0)
    kh, kw = kshape
    rows = (np.arange(kh) - kh // 2) % x.shape[-2]
    cols = (np.arange(kw) - kw // 2) % x.shape[-1]
    return corr[np.ix_(rows, cols)]


def kernel_grad(x, y, k, cfg):
    """lambda^t (X^T (A x - y) + M sigma^2 k), cropped to the kernel support.

    X^T is the adjoint of the image-as-operator acting on the kernel; the
    residual is backprojected through mask and downsampling first.
    """
    if cfg.kind != "na":
        raise ValueError("kernel_grad requires an na config (blind runs are noise-adaptive)")
    k = np.asarray(k, dtype=np.float64)
    lam = lambda_na(x, y, k, cfg)
    op = cfg.op.with_kernel(k)
    x, y, resid = _residual(x, y, op)
    back = resid
    if op.mask is not None:
        back = back * op.mask
    if op.scale > 1:
        from .ops import upsample_adjoint

        back = upsample_adjoint(back, op.scale)
    m = op.n_latent(x.shape)
    return lam * (_correlate_crop(x, back, k.shape) + m * cfg.sigma**2 * k)
