"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

The CNN forward pass dominates runtime of CNN-prior restorations (it runs
once or twice per gradient-descent iteration), so its periodic convolution
is JIT-compiled when numba is available. Set ``DMSP_NUMBA=0`` to force the
vectorized numpy path; ``benchmarks/bench_conv.py`` compares the two.

Both paths consume the same wrap-padded input and produce identical results
up to summation order.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = ["NUMBA_AVAILABLE", "numba_enabled", "backend_name", "conv2d_periodic"]

try:
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False
    prange = range

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


def numba_enabled():
    """True when the JIT path is active (numba importable and not disabled)."""
    return NUMBA_AVAILABLE and os.environ.get("DMSP_NUMBA", "1") != "0"


def backend_name():
    return "numba" if numba_enabled() else "numpy"


def _pad_wrap(x, kh, kw):
    return np.pad(x, ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)), mode="wrap")


@njit(cache=True, parallel=True)
def _conv2d_padded_numba(xp, w, b):
    # parallel only over independent output channels; each element keeps a
    # fixed serial accumulation order, so results are bit-reproducible
    c_out, c_in, kh, kw = w.shape
    h = xp.shape[1] - (kh - 1)
    wd = xp.shape[2] - (kw - 1)
    out = np.empty((c_out, h, wd))
    for o in prange(c_out):
        acc = np.full((h, wd), b[o])
        for i in range(c_in):
            for dy in range(kh):
                for dx in range(kw):
                    coef = w[o, i, dy, dx]
                    for y in range(h):
                        row = xp[i, y + dy]
                        for x in range(wd):
                            acc[y, x] += coef * row[x + dx]
        out[o] = acc
    return out


def _conv2d_padded_numpy(xp, w, b):
    c_out, c_in, kh, kw = w.shape
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (c_in, H, W, kh, kw)
    out = np.einsum("oikl,ihwkl->ohw", w, win, optimize=True)
    return out + b[:, None, None]


def conv2d_periodic(x, w, b, force_backend=None):
    """Sliding correlation of (C_in, H, W) ``x`` with taps (C_out, C_in, kh, kw).

    Periodic boundaries, same output size. ``force_backend`` ("numba" or
    "numpy") overrides the environment selection; used by the benchmark.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    kh, kw = w.shape[2], w.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv taps must have odd dims for same padding, got {(kh, kw)}")
    if x.shape[0] != w.shape[1]:
        raise ValueError(f"input has {x.shape[0]} channels, taps expect {w.shape[1]}")
    xp = _pad_wrap(x, kh, kw)
    backend = force_backend or backend_name()
    if backend == "numba" and NUMBA_AVAILABLE:
        return _conv2d_padded_numba(xp, w, b)
    return _conv2d_padded_numpy(xp, w, b)
