"""Self-contained identity suites behind `restore verify`.

Each suite returns (name, passed, detail); all three rest on closed-form
oracles, so they need no trained weights and finish in seconds.
"""

import numpy as np

from .denoisers import GaussianOracleDenoiser, GmmOracleDenoiser
from .ops import DegradationOp, adjoint_convolve, apply_mask, bayer_mask, convolve, downsample, upsample_adjoint
from .oracle import (
    GaussianSmoothedDensity,
    GmmSmoothedDensity,
    finite_diff_grad,
    gaussian_prior_bound,
    hermitian_spectrum,
)

__all__ = ["run_all", "mean_shift_identity_suite", "adjoint_suite", "jensen_suite"]


def _spectrum(rng, shape, lo=0.1, hi=1.1):
    return hermitian_spectrum(lo + (hi - lo) * rng.random(shape))


def mean_shift_identity_suite(seed=0, points=1000):
    """Denoiser residual / sigma^2 vs analytic and finite-difference score."""
    rng = np.random.default_rng(seed)
    shape = (1, 8, 8)
    sigma = 0.35
    mu = rng.random(shape)
    spec = _spectrum(rng, shape[-2:])
    gauss_den = GaussianOracleDenoiser(mu, spec, sigma)
    gauss_dens = GaussianSmoothedDensity(mu, spec, sigma)
    gmm_den = GmmOracleDenoiser([0.4, 0.6], [-1.0, 0.8], [0.3, 0.5], sigma)
    gmm_dens = GmmSmoothedDensity([0.4, 0.6], [-1.0, 0.8], [0.3, 0.5], sigma)

    worst_analytic = 0.0
    n_images = max(1, points // int(np.prod(shape)))
    for _ in range(n_images + 1):
        x = rng.standard_normal(shape)
        for den, dens in ((gauss_den, gauss_dens), (gmm_den, gmm_dens)):
            lhs = (den.denoise(x) - x) / sigma**2
            worst_analytic = max(worst_analytic, float(np.abs(lhs - dens.grad_log_p(x)).max()))

    worst_fd = 0.0
    fd_coords = 0
    while fd_coords < points:
        x = rng.standard_normal(shape)
        for den, dens in ((gauss_den, gauss_dens), (gmm_den, gmm_dens)):
            lhs = (den.denoise(x) - x) / sigma**2
            fd = finite_diff_grad(dens.log_p, x, step=1e-5)
            worst_fd = max(worst_fd, float(np.abs(lhs - fd).max()))
        fd_coords += int(np.prod(shape))

    ok = worst_analytic <= 1e-10 and worst_fd <= 1e-4
    return (
        "mean-shift identity",
        ok,
        f"max |residual/s^2 - score| analytic {worst_analytic:.2e} (tol 1e-10), "
        f"finite-diff {worst_fd:.2e} (tol 1e-4)",
    )


def _dot_gap(forward, adjoint, in_shape, out_shape, rng):
    x = rng.standard_normal(in_shape)
    y = rng.standard_normal(out_shape)
    ax, aty = forward(x), adjoint(y)
    lhs = float(np.vdot(ax, y))
    rhs = float(np.vdot(x, aty))
    scale = (
        np.linalg.norm(ax.ravel()) * np.linalg.norm(y.ravel())
        + np.linalg.norm(x.ravel()) * np.linalg.norm(aty.ravel())
    )
    return abs(lhs - rhs) / max(scale, 1e-30)


def adjoint_suite(seed=0, instances=100):
    """Dot-product test for every operator and the composite, 1e-9 relative."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    mask = bayer_mask(8, 8)
    for _ in range(instances):
        k = rng.standard_normal((5, 5))
        op = DegradationOp(kernel=rng.random((3, 3)) + 0.1, scale=2, mask=(rng.random((1, 8, 8)) > 0.3).astype(float))
        cases = (
            (lambda v: convolve(v, k), lambda v: adjoint_convolve(v, k), (1, 16, 16), (1, 16, 16)),
            (lambda v: downsample(v, 2), lambda v: upsample_adjoint(v, 2), (1, 16, 16), (1, 8, 8)),
            (lambda v: apply_mask(v, mask), lambda v: apply_mask(v, mask), (3, 8, 8), (3, 8, 8)),
            (op.apply, op.adjoint, (1, 16, 16), (1, 8, 8)),
        )
        for fwd, adj, in_s, out_s in cases:
            worst = max(worst, _dot_gap(fwd, adj, in_s, out_s, rng))
    ok = worst <= 1e-9
    return ("adjoint suite", ok, f"worst relative dot-product gap {worst:.2e} (tol 1e-9)")


def jensen_suite(seed=0, points=1000):
    """Sampled lower bound never exceeds the smoothed log-density."""
    rng = np.random.default_rng(seed)
    shape = (1, 8, 8)
    mu = rng.random(shape)
    spec = _spectrum(rng, shape[-2:])
    sigma = 0.4
    s1 = s2 = sigma / np.sqrt(2.0)
    full = GaussianSmoothedDensity(mu, spec, sigma)
    inner = GaussianSmoothedDensity(mu, spec, s1)
    violations = 0
    worst_gap = -np.inf
    for _ in range(points):
        x = mu + 0.8 * rng.standard_normal(shape)
        gap = gaussian_prior_bound(inner, x, s2) - full.log_p(x)
        worst_gap = max(worst_gap, gap)
        if gap > 1e-9:
            violations += 1
    ok = violations == 0
    return (
        "jensen ordering",
        ok,
        f"{violations}/{points} violations, max(bound - log p') = {worst_gap:.3e}",
    )


def run_all(seed=0):
    return [mean_shift_identity_suite(seed), adjoint_suite(seed), jensen_suite(seed)]
