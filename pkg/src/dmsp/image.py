"""Image and kernel containers plus quality metrics.

Images are plain numpy arrays in planar channel-major order ``(C, H, W)``,
stored as float64 with a nominal intensity range of [0, 1] (operators are
scale-agnostic; metrics take an explicit peak). Kernels are 2-D float64
arrays with odd height and width so the center tap is well-defined.
"""

import numpy as np

from .errors import InvalidKernelError, NonFiniteError, ShapeMismatchError

__all__ = [
    "as_image",
    "as_kernel",
    "check_finite",
    "psnr",
    "ssd_error_ratio",
]


def as_image(data, channels=None):
    """Coerce ``data`` to a float64 planar image of shape (C, H, W).

    2-D input becomes a single-channel image. Raises on non-finite samples.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3:
        raise ShapeMismatchError("image", ("C", "H", "W"), x.shape)
    if channels is not None and x.shape[0] != channels:
        raise ShapeMismatchError("image channels", (channels, "H", "W"), x.shape)
    check_finite(x, "image")
    return x


def as_kernel(taps):
    """Coerce ``taps`` to a 2-D float64 kernel with odd dimensions."""
    k = np.asarray(taps, dtype=np.float64)
    if k.ndim != 2:
        raise InvalidKernelError(f"kernel must be 2-D, got shape {k.shape}")
    if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise InvalidKernelError(f"kernel dimensions must be odd, got {k.shape}")
    check_finite(k, "kernel")
    return k


def check_finite(arr, what="array"):
    """Raise NonFiniteError (a ValueError) if ``arr`` holds NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains non-finite samples")
    return arr


def _crop_border(x, border):
    if border == 0:
        return x
    h, w = x.shape[-2:]
    if 2 * border >= min(h, w):
        raise ValueError(f"border {border} too large for image of size {h}x{w}")
    return x[..., border:h - border, border:w - border]


def psnr(a, b, peak=1.0, border=0):
    """Peak signal-to-noise ratio in dB over the border-cropped region.

    Returns ``inf`` when the two images agree exactly on that region.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError("psnr operands", a.shape, b.shape)
    a = _crop_border(a, border)
    b = _crop_border(b, border)
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(peak * peak / mse)


def ssd_error_ratio(restored, oracle_restored, truth):
    """Sum-of-squared-differences of ``restored`` relative to a reference run.

    The reference is conventionally the non-blind restoration computed with
    the ground-truth kernel; ratios near 1 mean the blind result is as good.
    """
    restored = np.asarray(restored, dtype=np.float64)
    oracle_restored = np.asarray(oracle_restored, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if restored.shape != truth.shape:
        raise ShapeMismatchError("ssd_error_ratio restored vs truth", truth.shape, restored.shape)
    if oracle_restored.shape != truth.shape:
        raise ShapeMismatchError(
            "ssd_error_ratio reference vs truth", truth.shape, oracle_restored.shape
        )
    denom = np.sum((oracle_restored - truth) ** 2)
    if denom == 0.0:
        raise ZeroDivisionError("reference restoration matches the truth exactly")
    return float(np.sum((restored - truth) ** 2) / denom)
