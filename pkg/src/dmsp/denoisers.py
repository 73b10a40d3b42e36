"""Denoisers backing the mean-shift prior.

Two analytic oracles (Gaussian process with circulant covariance, pointwise
Gaussian mixture) compute the exact posterior mean under Gaussian noise,
which is what an ideal denoising autoencoder converges to — they serve as
ground truth for every identity test. The CNN engine runs the small
residual network whose weights ship in the DMSP format.
"""

import numpy as np

from .errors import LayerShapeError, ShapeMismatchError
from .image import as_image, check_finite
from .kernels import conv2d_periodic

__all__ = [
    "Denoiser",
    "GaussianOracleDenoiser",
    "GmmOracleDenoiser",
    "CnnDenoiser",
    "cnn_infer",
]


class Denoiser:
    """Interface: ``denoise(x) -> x_hat`` plus the training noise level."""

    sigma_train = None

    def denoise(self, x):
        raise NotImplementedError


class GaussianOracleDenoiser(Denoiser):
    """Exact posterior-mean denoiser for a stationary Gaussian prior.

    The prior is N(mu, Sigma) with circulant Sigma given by its per-frequency
    variances ``spectrum`` (shape (H, W), applied to each channel). Under
    noise of std ``sigma`` the posterior mean is a per-frequency Wiener
    filter, mu + S/(S + sigma^2) (x - mu).
    """

    def __init__(self, mu, spectrum, sigma):
        from .oracle import check_spectrum

        self.mu = as_image(mu)
        self.spectrum = check_spectrum(spectrum)
        if self.spectrum.shape != self.mu.shape[-2:]:
            raise ShapeMismatchError("spectrum", self.mu.shape[-2:], self.spectrum.shape)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.sigma_train = float(sigma)
        self._gain = self.spectrum / (self.spectrum + self.sigma**2)

    def at_sigma(self, sigma):
        """Same prior, different noise level."""
        return GaussianOracleDenoiser(self.mu, self.spectrum, sigma)

    def denoise(self, x):
        x = as_image(x)
        if x.shape != self.mu.shape:
            raise ShapeMismatchError("denoiser input", self.mu.shape, x.shape)
        d = np.fft.fft2(x - self.mu, axes=(-2, -1))
        return self.mu + np.fft.ifft2(self._gain * d, axes=(-2, -1)).real


class GmmOracleDenoiser(Denoiser):
    """Exact posterior-mean denoiser for an i.i.d. per-sample Gaussian mixture."""

    def __init__(self, weights, means, variances, sigma):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        if not (self.weights.shape == self.means.shape == self.variances.shape):
            raise ValueError("weights, means, variances must have equal length")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("mixture variances must be positive")
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.sigma_train = float(sigma)

    def at_sigma(self, sigma):
        return GmmOracleDenoiser(self.weights, self.means, self.variances, sigma)

    def denoise(self, x):
        x = as_image(x)
        flat = x.reshape(-1, 1)
        var_t = (self.variances + self.sigma**2)[None, :]
        log_resp = (
            np.log(self.weights)[None, :]
            - 0.5 * np.log(2.0 * np.pi * var_t)
            - 0.5 * (flat - self.means[None, :]) ** 2 / var_t
        )
        log_resp -= log_resp.max(axis=1, keepdims=True)
        resp = np.exp(log_resp)
        resp /= resp.sum(axis=1, keepdims=True)
        shrink = self.variances[None, :] / var_t
        post_mean = self.means[None, :] + shrink * (flat - self.means[None, :])
        return (resp * post_mean).sum(axis=1).reshape(x.shape)


def cnn_infer(w, x):
    """Forward pass of the residual CNN: conv/ReLU stack, output = x - residual.

    Periodic boundaries, same padding. Raises :class:`LayerShapeError` naming
    the offending layer on channel mismatch.
    """
    x = as_image(x)
    if not w.layers:
        raise LayerShapeError(0, "network has no layers")
    if w.channels != x.shape[0]:
        raise LayerShapeError(0, f"expects {w.channels} channels, image has {x.shape[0]}")
    act = x
    last = len(w.layers) - 1
    for i, layer in enumerate(w.layers):
        if layer.in_channels != act.shape[0]:
            raise LayerShapeError(i, f"expects {layer.in_channels} channels, got {act.shape[0]}")
        act = conv2d_periodic(act, layer.weights, layer.biases)
        if i != last:
            act = np.maximum(act, 0.0)
    out = x - act
    return check_finite(out, "cnn output")


class CnnDenoiser(Denoiser):
    """Runs :func:`cnn_infer` with loaded weights."""

    def __init__(self, weights):
        self.weights = weights
        self.sigma_train = float(weights.sigma_train)

    def denoise(self, x):
        return cnn_infer(self.weights, x)
