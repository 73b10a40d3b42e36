"""Momentum gradient descent over the image and, in blind mode, the kernel.

One iteration evaluates all gradients at the pre-step iterate (the adaptive
weight included), applies the image step, then the kernel step. All
stochasticity flows through the caller-owned rng, so a fixed seed fixes the
whole trajectory.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data_terms import DataTermConfig, estimate_sigma_n, grad_na, grad_nb, kernel_grad, lambda_na
from .errors import DivergenceError, InvalidKernelError
from .image import as_image, as_kernel
from .ops import DegradationOp, convolve
from .prior import PriorConfig, prior_grad_deterministic, prior_grad_stochastic

__all__ = [
    "Schedule",
    "OptimizerState",
    "RestorationProblem",
    "step_image",
    "project_kernel",
    "step_kernel",
    "run",
    "default_blind_kernel",
    "bilinear_upsample",
    "bilinear_demosaic",
]


@dataclass(frozen=True)
class Schedule:
    """Step sizes, momenta, and per-iteration overrides.

    ``prior_weights`` (len == iterations) scales the prior gradient per
    iteration; ``sigma_n_phases`` is a list of (n_iterations, sigma_n) pairs
    consumed in order by fixed-noise runs; ``clip`` bounds the iterate after
    each step (the CLI uses (-0.25, 1.25) for unit-range images).
    """

    iterations: int
    alpha: float = 0.1
    mu: float = 0.9
    alpha_k: float = 0.005
    mu_k: float = 0.995
    prior_weights: Optional[tuple] = None
    sigma_n_phases: Optional[tuple] = None
    clip: Optional[tuple] = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not (self.alpha > 0 and self.alpha_k > 0):
            raise ValueError("step sizes must be positive")
        if not (0 <= self.mu < 1 and 0 <= self.mu_k < 1):
            raise ValueError("momenta must lie in [0, 1)")
        if self.prior_weights is not None:
            w = tuple(float(v) for v in self.prior_weights)
            if len(w) != self.iterations:
                raise ValueError("prior_weights must have one entry per iteration")
            object.__setattr__(self, "prior_weights", w)
        if self.sigma_n_phases is not None:
            phases = tuple((int(n), float(s)) for n, s in self.sigma_n_phases)
            if sum(n for n, _ in phases) != self.iterations:
                raise ValueError("sigma_n_phases must cover exactly `iterations` steps")
            object.__setattr__(self, "sigma_n_phases", phases)

    def sigma_n_at(self, t, default):
        """Noise level for 1-based iteration ``t``."""
        if self.sigma_n_phases is None:
            return default
        done = 0
        for n, s in self.sigma_n_phases:
            done += n
            if t <= done:
                return s
        return self.sigma_n_phases[-1][1]

    def prior_weight_at(self, t, default):
        if self.prior_weights is None:
            return default
        return self.prior_weights[t - 1]


@dataclass
class OptimizerState:
    x: np.ndarray
    k: np.ndarray
    u_bar: np.ndarray = None
    v_bar: np.ndarray = None
    t: int = 0
    rng: np.random.Generator = None
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.x = as_image(self.x).copy()
        self.k = as_kernel(self.k).copy()
        if self.u_bar is None:
            self.u_bar = np.zeros_like(self.x)
        if self.v_bar is None:
            self.v_bar = np.zeros_like(self.k)


def step_image(state, data_grad, prior_grad, sched):
    """u = data_grad - prior_grad; u_bar = mu u_bar - alpha u; x += u_bar."""
    u = data_grad - prior_grad
    if not np.all(np.isfinite(u)):
        raise DivergenceError(state.t + 1, last_state=state)
    u_bar = sched.mu * state.u_bar - sched.alpha * u
    # a finite gradient can still overflow the running step at extreme alpha
    if not np.all(np.isfinite(u_bar)):
        raise DivergenceError(state.t + 1, last_state=state)
    state.u_bar = u_bar
    state.x = state.x + state.u_bar
    if sched.clip is not None:
        np.clip(state.x, sched.clip[0], sched.clip[1], out=state.x)
    state.t += 1
    return state


def project_kernel(k):
    """Clip taps at zero and renormalize to unit mass."""
    k = np.maximum(np.asarray(k, dtype=np.float64), 0.0)
    total = k.sum()
    if total <= 0.0:
        raise InvalidKernelError("kernel projection failed: no positive tap")
    return k / total


def step_kernel(state, k_grad, sched):
    """v_bar = mu_k v_bar - alpha_k v; k += v_bar; then project."""
    if not np.all(np.isfinite(k_grad)):
        raise DivergenceError(state.t, last_state=state)
    state.v_bar = sched.mu_k * state.v_bar - sched.alpha_k * k_grad
    state.k = project_kernel(state.k + state.v_bar)
    return state


@dataclass
class RestorationProblem:
    """Everything one restoration run needs besides the schedule and rng."""

    y: np.ndarray
    op: DegradationOp
    denoiser: object
    prior: PriorConfig
    data_kind: str = "nb"  # "nb" | "na"
    sigma_n: Optional[float] = None
    blind: bool = False
    x0: Optional[np.ndarray] = None
    k0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = as_image(self.y)
        if self.data_kind not in ("nb", "na"):
            raise ValueError(f"unknown data term {self.data_kind!r}")
        if self.data_kind == "nb" and (self.sigma_n is None or self.sigma_n <= 0):
            raise ValueError("nb problems require sigma_n > 0")
        if self.blind and self.data_kind != "na":
            raise ValueError("blind runs use the noise-adaptive data term")

    def initial_x(self):
        if self.x0 is not None:
            return as_image(self.x0)
        return self.op.adjoint(self.y)

    def initial_k(self):
        if self.k0 is not None:
            return as_kernel(self.k0)
        return self.op.kernel


def _prior_gradient(x, problem, weight, rng):
    cfg = problem.prior.reweighted(weight)
    if cfg.mode == "deterministic":
        return prior_grad_deterministic(x, problem.denoiser, cfg)
    return prior_grad_stochastic(x, problem.denoiser, cfg, rng)


def run(problem, sched, rng):
    """Execute ``sched.iterations`` momentum steps; returns (x, k, trace).

    Deterministic given (problem, schedule, seed); raises
    :class:`DivergenceError` carrying the last finite state.
    """
    state = OptimizerState(
        x=problem.initial_x(), k=problem.initial_k(), rng=rng, trace=[]
    )
    y = problem.y
    for t in range(1, sched.iterations + 1):
        op_t = problem.op.with_kernel(state.k) if problem.blind else problem.op
        sigma_n_t = sched.sigma_n_at(t, problem.sigma_n)
        weight_t = sched.prior_weight_at(t, problem.prior.weight)

        if problem.data_kind == "nb":
            cfg = DataTermConfig(
                kind="nb", op=op_t, sigma=problem.prior.sigma, sigma_n=sigma_n_t
            )
            lam = 1.0 / sigma_n_t**2
            data_grad = grad_nb(state.x, y, cfg)
        else:
            cfg = DataTermConfig(kind="na", op=op_t, sigma=problem.prior.sigma)
            lam = lambda_na(state.x, y, state.k, cfg)
            data_grad = grad_na(state.x, y, cfg)

        p_grad = _prior_gradient(state.x, problem, weight_t, state.rng)
        k_grad = kernel_grad(state.x, y, state.k, cfg) if problem.blind else None
        sigma_est = estimate_sigma_n(state.x, y, state.k, cfg)

        state = step_image(state, data_grad, p_grad, sched)
        if problem.blind:
            state = step_kernel(state, k_grad, sched)

        state.trace.append(
            {
                "t": t,
                "lambda": float(lam),
                "data_grad_norm": float(np.linalg.norm(data_grad.ravel())),
                "prior_grad_norm": float(np.linalg.norm(p_grad.ravel())),
                "step_norm": float(np.linalg.norm(state.u_bar.ravel())),
                "sigma_n_estimate": float(sigma_est),
            }
        )
    return state.x, state.k, state.trace


def default_blind_kernel(kh, kw):
    """Centered Gaussian init with std = quarter kernel width."""
    std = max(kw, 1) / 4.0
    yy = np.arange(kh) - kh // 2
    xx = np.arange(kw) - kw // 2
    g = np.exp(-0.5 * ((yy[:, None] / std) ** 2 + (xx[None, :] / std) ** 2))
    return g / g.sum()


def bilinear_upsample(y, s):
    """Bilinear interpolation by integer factor ``s`` on the periodic grid."""
    y = as_image(y)
    if s == 1:
        return y.copy()
    c, h, w = y.shape
    out_h, out_w = h * s, w * s
    # sample positions map the coarse grid to offsets (0, s, 2s, ...) to stay
    # aligned with the point-sampling downsample
    pos_y = np.arange(out_h) / s
    pos_x = np.arange(out_w) / s
    y0 = np.floor(pos_y).astype(int)
    x0 = np.floor(pos_x).astype(int)
    fy = (pos_y - y0)[None, :, None]
    fx = (pos_x - x0)[None, None, :]
    y1 = (y0 + 1) % h
    x1 = (x0 + 1) % w
    top = y[:, y0][:, :, x0] * (1 - fx) + y[:, y0][:, :, x1] * fx
    bot = y[:, y1][:, :, x0] * (1 - fx) + y[:, y1][:, :, x1] * fx
    return top * (1 - fy) + bot * fy


def bilinear_demosaic(mosaic, mask):
    """Fill unobserved samples by normalized convolution with a bilinear stencil.

    Observed samples pass through unchanged.
    """
    mosaic = as_image(mosaic)
    stencil = np.array([[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]])
    out = np.empty_like(mosaic)
    for c in range(mosaic.shape[0]):
        num = convolve(mosaic[c][None] * mask[c][None], stencil)
        den = convolve(mask[c][None], stencil)
        interp = (num / np.maximum(den, 1e-12))[0]
        out[c] = mask[c] * mosaic[c] + (1.0 - mask[c]) * interp
    return out
