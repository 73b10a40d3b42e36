"""Analytic ground truth: smoothed log-densities, finite differences, and a
closed-form restoration solver.

These routines are written independently of the denoisers (log-density and
score here, posterior means there) so the mean-shift identity tests compare
two genuinely different computations of the same quantity.
"""

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ShapeMismatchError
from .image import as_image

__all__ = [
    "GaussianSmoothedDensity",
    "GmmSmoothedDensity",
    "finite_diff_grad",
    "gaussian_map_oracle",
    "gaussian_prior_bound",
    "gmm_denoise_quadrature",
    "hermitian_spectrum",
    "radial_spectrum",
    "check_spectrum",
]


def hermitian_spectrum(spec):
    """Symmetrize a per-frequency variance map so it describes a real field."""
    spec = np.asarray(spec, dtype=np.float64)
    flipped = np.roll(spec[::-1, ::-1], (1, 1), axis=(0, 1))
    return 0.5 * (spec + flipped)


def radial_spectrum(shape, amplitude=1.0, corner=4.0, floor=0.05):
    """Smoothly decaying isotropic spectrum; symmetric by construction."""
    fy = np.fft.fftfreq(shape[0])[:, None] * shape[0]
    fx = np.fft.fftfreq(shape[1])[None, :] * shape[1]
    r2 = fy**2 + fx**2
    return floor + amplitude / (1.0 + r2 / corner**2)


def check_spectrum(spec):
    """Validate positivity and the S[-f] = S[f] symmetry of a spectrum."""
    spec = np.asarray(spec, dtype=np.float64)
    if spec.ndim != 2:
        raise ValueError(f"spectrum must be 2-D, got shape {spec.shape}")
    if np.any(spec <= 0):
        raise ValueError("spectrum entries must be positive")
    flipped = np.roll(spec[::-1, ::-1], (1, 1), axis=(0, 1))
    if not np.allclose(spec, flipped, rtol=1e-9, atol=0.0):
        raise ValueError(
            "spectrum must satisfy S[-f] = S[f]; use hermitian_spectrum() to symmetrize"
        )
    return spec


class GaussianSmoothedDensity:
    """log N(mu, Sigma + sigma^2 I) for circulant Sigma with spectrum S.

    With numpy's unnormalized DFT, the quadratic form is
    (1/HW) sum_f |F(x-mu)_f|^2 / (S_f + sigma^2) per channel, and the
    log-determinant is sum_f log(S_f + sigma^2) per channel.
    """

    def __init__(self, mu, spectrum, sigma=0.0):
        self.mu = as_image(mu)
        self.spectrum = check_spectrum(spectrum)
        if self.spectrum.shape != self.mu.shape[-2:]:
            raise ShapeMismatchError("spectrum", self.mu.shape[-2:], self.spectrum.shape)
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.sigma = float(sigma)
        self._var = self.spectrum + self.sigma**2

    def with_sigma(self, sigma):
        return GaussianSmoothedDensity(self.mu, self.spectrum, sigma)

    def log_p(self, x):
        x = as_image(x)
        if x.shape != self.mu.shape:
            raise ShapeMismatchError("density argument", self.mu.shape, x.shape)
        c, h, w = x.shape
        d = np.fft.fft2(x - self.mu, axes=(-2, -1))
        quad = np.sum(np.abs(d) ** 2 / self._var) / (h * w)
        logdet = c * np.sum(np.log(self._var))
        return float(-0.5 * (quad + logdet + c * h * w * np.log(2.0 * np.pi)))

    def grad_log_p(self, x):
        x = as_image(x)
        if x.shape != self.mu.shape:
            raise ShapeMismatchError("density argument", self.mu.shape, x.shape)
        d = np.fft.fft2(x - self.mu, axes=(-2, -1))
        return -np.fft.ifft2(d / self._var, axes=(-2, -1)).real

    def apply_precision(self, v):
        """(Sigma + sigma^2 I)^{-1} v, channelwise."""
        return np.fft.ifft2(np.fft.fft2(v, axes=(-2, -1)) / self._var, axes=(-2, -1)).real

    def sample(self, rng):
        """Draw one field from N(mu, Sigma + sigma^2 I)."""
        c, h, w = self.mu.shape
        white = rng.standard_normal((c, h, w))
        shaped = np.fft.ifft2(
            np.sqrt(self._var) * np.fft.fft2(white, axes=(-2, -1)), axes=(-2, -1)
        ).real
        return self.mu + shaped


class GmmSmoothedDensity:
    """Per-sample i.i.d. mixture: components N(m_i, v_i + sigma^2)."""

    def __init__(self, weights, means, variances, sigma=0.0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("mixture variances must be positive")
        self.sigma = float(sigma)
        self._var = self.variances + self.sigma**2

    def with_sigma(self, sigma):
        return GmmSmoothedDensity(self.weights, self.means, self.variances, sigma)

    def _log_comp(self, flat):
        return (
            np.log(self.weights)[None, :]
            - 0.5 * np.log(2.0 * np.pi * self._var)[None, :]
            - 0.5 * (flat - self.means[None, :]) ** 2 / self._var[None, :]
        )

    def log_p(self, x):
        flat = as_image(x).reshape(-1, 1)
        lc = self._log_comp(flat)
        m = lc.max(axis=1, keepdims=True)
        return float(np.sum(m + np.log(np.exp(lc - m).sum(axis=1, keepdims=True))))

    def grad_log_p(self, x):
        x = as_image(x)
        flat = x.reshape(-1, 1)
        lc = self._log_comp(flat)
        lc -= lc.max(axis=1, keepdims=True)
        resp = np.exp(lc)
        resp /= resp.sum(axis=1, keepdims=True)
        score = (resp * (self.means[None, :] - flat) / self._var[None, :]).sum(axis=1)
        return score.reshape(x.shape)


def gmm_denoise_quadrature(weights, means, variances, sigma, x, span=8.0):
    """Posterior mean of a pointwise mixture by adaptive quadrature over the noise.

    Independent route to the closed-form mixture denoiser: evaluates the
    ratio of integrals E[p(t - eta) eta] / E[p(t - eta)] per sample. Slow;
    for validation only.
    """
    from scipy.integrate import quad

    weights = np.asarray(weights, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)

    def p(t):
        return float(
            np.sum(weights * np.exp(-0.5 * (t - means) ** 2 / variances)
                   / np.sqrt(2.0 * np.pi * variances))
        )

    def g(eta):
        return np.exp(-0.5 * eta**2 / sigma**2) / np.sqrt(2.0 * np.pi * sigma**2)

    out = np.empty(x.size)
    flat = x.ravel()
    lim = span * sigma
    for i, t in enumerate(flat):
        num = quad(lambda e: g(e) * p(t - e) * e, -lim, lim, limit=200)[0]
        den = quad(lambda e: g(e) * p(t - e), -lim, lim, limit=200)[0]
        out[i] = t - num / den
    return out.reshape(x.shape)


def finite_diff_grad(f, x, step=1e-5):
    """Central finite differences of a scalar field, per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + step
        fp = f(x)
        flat_x[i] = orig - step
        fm = f(x)
        flat_x[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"objective non-finite near coordinate {i}")
        flat_g[i] = (fp - fm) / (2.0 * step)
    return grad


def gaussian_prior_bound(density, x, sigma2):
    """Closed-form lower bound: E_eta2[log p'_{sigma1}(x + eta2)].

    ``density`` is the sigma1-smoothed Gaussian; the Gaussian expectation of
    its quadratic form shifts the log-density by -sigma2^2/2 * tr(precision).
    """
    c = density.mu.shape[0]
    trace = c * np.sum(1.0 / density._var)
    return density.log_p(x) - 0.5 * sigma2**2 * trace


def gaussian_map_oracle(y, op, sigma_n, denoiser, maxiter=10000, residual_tol=1e-10):
    """Maximizer of the Gaussian restoration objective.

    Solves (A^T A / sigma_n^2 + P) x = A^T y / sigma_n^2 + P mu with
    P = (Sigma + sigma^2 I)^{-1} from ``denoiser``'s prior. Direct
    per-frequency solve when A is a pure convolution; conjugate gradient to
    an absolute normal-equation residual of ``residual_tol`` otherwise.
    """
    y = as_image(y)
    mu = denoiser.mu
    prec_var = denoiser.spectrum + denoiser.sigma**2
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    inv_sn2 = 1.0 / sigma_n**2

    if op.scale == 1 and op.mask is None:
        from .ops import _kernel_spectrum

        kf = _kernel_spectrum(op.kernel, y.shape[-2:])
        yf = np.fft.fft2(y, axes=(-2, -1))
        muf = np.fft.fft2(mu, axes=(-2, -1))
        denom = np.abs(kf) ** 2 * inv_sn2 + 1.0 / prec_var
        num = np.conj(kf) * yf * inv_sn2 + muf / prec_var
        return np.fft.ifft2(num / denom, axes=(-2, -1)).real

    in_shape = mu.shape

    def system(v):
        x = v.reshape(in_shape)
        ata = op.adjoint(op.apply(x)) * inv_sn2
        px = np.fft.ifft2(np.fft.fft2(x, axes=(-2, -1)) / prec_var, axes=(-2, -1)).real
        return (ata + px).ravel()

    rhs = (
        op.adjoint(y) * inv_sn2
        + np.fft.ifft2(np.fft.fft2(mu, axes=(-2, -1)) / prec_var, axes=(-2, -1)).real
    ).ravel()
    n = rhs.size
    lin = LinearOperator((n, n), matvec=system, dtype=np.float64)
    sol, info = cg(lin, rhs, rtol=0.0, atol=residual_tol, maxiter=maxiter)
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not reach residual {residual_tol} (info={info})")
    return sol.reshape(in_shape)
