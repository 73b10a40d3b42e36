import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def dot_test(forward, adjoint, in_shape, out_shape, rng, n=100, tol=1e-9):
    """Adjoint identity <Ax, y> == <x, A^T y> on ``n`` random instances.

    Tolerance is relative to the natural scale of both inner products.
    """
    for _ in range(n):
        x = rng.standard_normal(in_shape)
        y = rng.standard_normal(out_shape)
        ax = forward(x)
        aty = adjoint(y)
        lhs = float(np.vdot(ax, y))
        rhs = float(np.vdot(x, aty))
        scale = (
            np.linalg.norm(ax.ravel()) * np.linalg.norm(y.ravel())
            + np.linalg.norm(x.ravel()) * np.linalg.norm(aty.ravel())
        )
        assert abs(lhs - rhs) <= tol * max(scale, 1e-30), (lhs, rhs, scale)


def conv_brute_force(x, k):
    """Direct sliding-window periodic convolution; spatial-domain oracle."""
    c, h, w = x.shape
    kh, kw = k.shape
    cy, cx = kh // 2, kw // 2
    out = np.zeros_like(x)
    for ch in range(c):
        for yy in range(h):
            for xx in range(w):
                acc = 0.0
                for i in range(kh):
                    for j in range(kw):
                        acc += k[i, j] * x[ch, (yy - (i - cy)) % h, (xx - (j - cx)) % w]
                out[ch, yy, xx] = acc
    return out


def random_kernel(rng, kh=3, kw=3, normalized=False):
    k = rng.standard_normal((kh, kw))
    if normalized:
        k = np.abs(k)
        k /= k.sum()
    return k


def random_spectrum(rng, shape, lo=0.1, hi=1.1):
    """Random positive per-frequency variances with the S[-f]=S[f] symmetry."""
    from dmsp.oracle import hermitian_spectrum

    return hermitian_spectrum(lo + (hi - lo) * rng.random(shape))


def radial_spectrum(shape, amplitude=1.0, corner=4.0, floor=0.05):
    from dmsp.oracle import radial_spectrum as _radial

    return _radial(shape, amplitude=amplitude, corner=corner, floor=floor)


def gaussian_psf(size, std):
    ax = np.arange(size) - size // 2
    g = np.exp(-0.5 * (ax / std) ** 2)
    k = np.outer(g, g)
    return k / k.sum()
