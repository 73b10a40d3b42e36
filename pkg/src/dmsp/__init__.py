"""Bayes-risk image restoration with a denoiser mean-shift prior."""

from .data_terms import DataTermConfig, estimate_sigma_n, grad_na, grad_nb, kernel_grad, lambda_na
from .denoisers import CnnDenoiser, Denoiser, GaussianOracleDenoiser, GmmOracleDenoiser, cnn_infer
from .image import psnr, ssd_error_ratio
from .ops import (
    DegradationOp,
    adjoint_convolve,
    apply_mask,
    bayer_mask,
    convolve,
    degrade,
    downsample,
    upsample_adjoint,
)
from .optimizer import (
    OptimizerState,
    RestorationProblem,
    Schedule,
    project_kernel,
    run,
    step_image,
    step_kernel,
)
from .prior import PriorConfig, prior_grad_deterministic, prior_grad_stochastic
from .weights import CnnWeights, ConvLayer, load_weights, save_weights

__version__ = "0.1.0"
