"""Gradient of the image likelihood: the mean-shift direction scaled by the
smoothing variance, in deterministic and single-sample stochastic form.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SigmaMismatchError
from .image import as_image

__all__ = ["PriorConfig", "prior_grad_deterministic", "prior_grad_stochastic", "SIGMA_TOL"]

# denoiser training level must match the configured smoothing this closely
SIGMA_TOL = 1e-6


@dataclass(frozen=True)
class PriorConfig:
    """Smoothing split sigma1^2 + sigma2^2 = sigma^2.

    Deterministic mode evaluates the denoiser in place (sigma2 = 0);
    stochastic mode perturbs the iterate with sigma2 noise first, defaulting
    to the balanced split sigma1 = sigma2 = sigma/sqrt(2). ``weight`` scales
    the returned gradient (used by decay schedules).
    """

    sigma: float
    mode: str = "stochastic"
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None
    weight: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown prior mode {self.mode!r}")
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if self.mode == "deterministic":
            if self.sigma2 not in (None, 0.0):
                raise ValueError("deterministic mode forces sigma2 = 0")
            object.__setattr__(self, "sigma1", self.sigma)
            object.__setattr__(self, "sigma2", 0.0)
        else:
            if self.sigma1 is None and self.sigma2 is None:
                object.__setattr__(self, "sigma1", self.sigma / np.sqrt(2.0))
                object.__setattr__(self, "sigma2", self.sigma / np.sqrt(2.0))
            elif self.sigma1 is None:
                object.__setattr__(self, "sigma1", float(np.sqrt(self.sigma**2 - self.sigma2**2)))
            elif self.sigma2 is None:
                object.__setattr__(self, "sigma2", float(np.sqrt(self.sigma**2 - self.sigma1**2)))
        split = self.sigma1**2 + self.sigma2**2
        if abs(split - self.sigma**2) > 1e-12 * max(1.0, self.sigma**2):
            raise ValueError(
                f"sigma1^2 + sigma2^2 = {split} inconsistent with sigma^2 = {self.sigma**2}"
            )

    def reweighted(self, weight):
        return PriorConfig(
            sigma=self.sigma, mode=self.mode, sigma1=self.sigma1,
            sigma2=self.sigma2 if self.mode == "stochastic" else None, weight=weight,
        )


def _check_sigma(denoiser, required):
    st = denoiser.sigma_train
    if st is None or abs(st - required) > SIGMA_TOL * max(1.0, abs(required)):
        raise SigmaMismatchError(st, required, SIGMA_TOL)


def prior_grad_deterministic(x, denoiser, cfg):
    """(1/sigma^2) (r(x) - x); consumes no randomness."""
    x = as_image(x)
    _check_sigma(denoiser, cfg.sigma)
    return cfg.weight / cfg.sigma**2 * (denoiser.denoise(x) - x)


def prior_grad_stochastic(x, denoiser, cfg, rng):
    """Single-sample bound gradient: (1/sigma1^2) (r_{sigma1}(x + eta2) - x).

    eta2 ~ N(0, sigma2^2 I) is drawn once per call; for the balanced split
    the prefactor equals 2/sigma^2. Deterministic given the rng state.
    """
    if cfg.mode != "stochastic":
        raise ValueError("prior config is not in stochastic mode")
    x = as_image(x)
    _check_sigma(denoiser, cfg.sigma1)
    eta2 = cfg.sigma2 * rng.standard_normal(x.shape) if cfg.sigma2 > 0 else 0.0
    return cfg.weight / cfg.sigma1**2 * (denoiser.denoise(x + eta2) - x)
