"""Command-line surface: restore deblur | sr | demosaic | verify.

Every command validates its flag combination before touching input files,
runs the restoration deterministically for a given --seed, writes the
restored image (plus the estimated kernel in blind mode and an optional
per-iteration trace), and prints a metrics JSON object to stdout.

Exit codes: 0 success, 1 invariant/divergence failure, 2 usage error.
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .denoisers import CnnDenoiser, GaussianOracleDenoiser, GmmOracleDenoiser
from .errors import DmspError
from .fileio import read_image, read_kernel, write_image, write_kernel
from .image import psnr
from .ops import DegradationOp, bayer_mask
from .optimizer import (
    RestorationProblem,
    Schedule,
    bilinear_demosaic,
    bilinear_upsample,
    default_blind_kernel,
    run,
)
from .oracle import radial_spectrum
from .prior import PriorConfig
from .weights import load_weights

log = logging.getLogger("dmsp")

CLIP_RANGE = (-0.25, 1.25)
SR_SIGMA_N_FLOOR = 1e-4
SR_SIGMA_N_DEFAULT = 0.05
DEMOSAIC_PHASES = (2.5 / 255.0, 1.0 / 255.0)
DEFAULT_BLIND_KERNEL_SIZE = 7


class UsageError(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="restore",
        description="Image restoration with a denoiser mean-shift prior.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, tasks_with_kernel=True):
        p.add_argument("--input", nargs="+", required=True, help="input image(s) (.png/.pfm)")
        p.add_argument("--output", required=True, help="output image path, or directory with --jobs")
        p.add_argument("--weights", help="DMSP weight file for the CNN denoiser")
        p.add_argument("--oracle", help="JSON file describing an analytic oracle denoiser")
        p.add_argument("--reference", help="ground-truth image; adds PSNR to the metrics")
        p.add_argument("--iterations", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--alpha-k", dest="alpha_k", type=float)
        p.add_argument("--mu-k", dest="mu_k", type=float)
        p.add_argument("--prior-weight", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", help="write one JSON line per iteration here")
        p.add_argument("--jobs", type=int, default=1, help="process multiple inputs concurrently")

    deblur = sub.add_parser("deblur", help="non-blind, noise-blind, or fully blind deblurring")
    add_common(deblur)
    deblur.add_argument("--kernel", help="blur kernel text file (init kernel in blind mode)")
    deblur.add_argument("--blind", action="store_true", help="estimate the kernel too")
    deblur.add_argument("--noise-adaptive", action="store_true", help="unknown noise level")
    deblur.add_argument("--sigma-n", dest="sigma_n", type=float, help="known noise std in [0,1] units")

    sr = sub.add_parser("sr", help="single-image super-resolution")
    add_common(sr)
    sr.add_argument("--scale", type=int, required=True, help="integer upsampling factor (1-5)")
    sr.add_argument("--sigma-n", dest="sigma_n", type=float, help="data-term noise std (rough weight)")

    demosaic = sub.add_parser("demosaic", help="Bayer demosaicing")
    add_common(demosaic)
    demosaic.add_argument("--pattern", default="RGGB", help="RGGB | BGGR | GRBG | GBRG")
    demosaic.add_argument("--sigma-n", dest="sigma_n", type=float, help="override the two-phase schedule")

    verify = sub.add_parser("verify", help="run the analytic identity suites")
    verify.add_argument("--seed", type=int, default=0)

    return parser


def _rescale_01(z):
    """Affinely map into [0, 1]; a no-op when the values already fit."""
    lo, hi = float(z.min()), float(z.max())
    if 0.0 <= lo and hi <= 1.0:
        return z
    if hi <= lo:
        return np.full_like(z, 0.5)
    return (z - lo) / (hi - lo)


def _load_denoiser(args, latent_shape):
    if args.weights:
        with open(args.weights, "rb") as fh:
            return CnnDenoiser(load_weights(fh.read()))
    with open(args.oracle) as fh:
        spec = json.load(fh)
    sigma = float(spec["sigma"])
    if spec["type"] == "gaussian":
        mean = float(spec.get("mean", 0.5))
        sdesc = spec.get("spectrum", {"kind": "flat", "value": 0.1})
        if sdesc["kind"] == "flat":
            spectrum = np.full(latent_shape[-2:], float(sdesc["value"]))
        elif sdesc["kind"] == "radial":
            spectrum = radial_spectrum(
                latent_shape[-2:],
                amplitude=float(sdesc.get("amplitude", 1.0)),
                corner=float(sdesc.get("corner", 4.0)),
                floor=float(sdesc.get("floor", 0.05)),
            )
        else:
            raise UsageError(f"unknown spectrum kind {sdesc['kind']!r}")
        return GaussianOracleDenoiser(np.full(latent_shape, mean), spectrum, sigma)
    if spec["type"] == "gmm":
        return GmmOracleDenoiser(spec["weights"], spec["means"], spec["variances"], sigma)
    raise UsageError(f"unknown oracle type {spec['type']!r}")


def _make_prior(denoiser, weight):
    """Stochastic sampled-bound prior for trained CNNs, deterministic for oracles.

    A trained DAE only behaves on inputs carrying noise near its training
    level, so its iterates are perturbed first (sigma1 = sigma_train, total
    smoothing sigma_train * sqrt(2)). Analytic oracles are exact at any
    input, so they run in place at sigma = sigma_train.
    """
    sigma1 = float(denoiser.sigma_train)
    if sigma1 <= 0:
        raise UsageError("denoiser declares a non-positive training noise level")
    if isinstance(denoiser, CnnDenoiser):
        return PriorConfig(
            sigma=sigma1 * math.sqrt(2.0), mode="stochastic", sigma1=sigma1, weight=weight
        )
    return PriorConfig(sigma=sigma1, mode="deterministic", weight=weight)


def _schedule(args, defaults, **extra):
    fields = dict(defaults)
    for name in ("iterations", "alpha", "mu", "alpha_k", "mu_k"):
        val = getattr(args, name, None)
        if val is not None:
            fields[name] = val
    fields.update(extra)
    return Schedule(clip=CLIP_RANGE, **fields)


def _validate_common(args):
    if not args.weights and not args.oracle:
        raise UsageError("a denoiser is required: pass --weights or --oracle")
    if args.weights and args.oracle:
        raise UsageError("--weights and --oracle are mutually exclusive")
    if len(args.input) > 1 and not os.path.isdir(args.output):
        raise UsageError("--output must be a directory when multiple inputs are given")
    for path in args.input:
        if not os.path.exists(path):
            raise UsageError(f"input file not found: {path}")
    for attr in ("weights", "oracle", "reference"):
        path = getattr(args, attr, None)
        if path and not os.path.exists(path):
            raise UsageError(f"{attr} file not found: {path}")


def _output_path(args, input_path):
    if len(args.input) == 1 and not os.path.isdir(args.output):
        return args.output
    stem = os.path.splitext(os.path.basename(input_path))[0]
    return os.path.join(args.output, f"{stem}_restored.png")


def _emit(metrics):
    print(json.dumps(metrics, sort_keys=True))


def _run_problem(args, problem, sched):
    """Run the optimizer; on divergence, still write the partial trace."""
    from .errors import DivergenceError

    try:
        return run(problem, sched, np.random.default_rng(args.seed))
    except DivergenceError as exc:
        if args.trace and exc.last_state is not None:
            with open(args.trace, "w") as fh:
                for entry in exc.last_state.trace:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
            log.error("diverged at iteration %d; partial trace at %s", exc.t, args.trace)
        raise


def _finish(args, input_path, out_path, x, kernel, trace, started, task, extra=None):
    write_image(out_path, np.clip(x, 0.0, 1.0))
    metrics = {
        "schema": 1,
        "task": task,
        "input": input_path,
        "output": out_path,
        "iterations": len(trace),
        "sigma_n_estimate": trace[-1]["sigma_n_estimate"] if trace else None,
        "runtime": time.perf_counter() - started,
    }
    if extra:
        metrics.update(extra)
    if args.reference:
        ref = read_image(args.reference)
        border = math.ceil(max(kernel.shape) / 2)
        metrics["psnr"] = psnr(np.clip(x, 0.0, 1.0), ref, peak=1.0, border=border)
    if args.trace:
        with open(args.trace, "w") as fh:
            for entry in trace:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        metrics["trace"] = args.trace
    _emit(metrics)


def _deblur_one(args, input_path):
    started = time.perf_counter()
    y = read_image(input_path)
    if args.kernel:
        kernel = read_kernel(args.kernel)
    else:
        kernel = default_blind_kernel(DEFAULT_BLIND_KERNEL_SIZE, DEFAULT_BLIND_KERNEL_SIZE)
    denoiser = _load_denoiser(args, y.shape)
    prior = _make_prior(denoiser, args.prior_weight)
    op = DegradationOp(kernel=kernel)
    noise_adaptive = args.noise_adaptive or args.blind
    if args.blind:
        defaults = dict(iterations=1000, alpha=0.3, mu=0.7, alpha_k=0.005, mu_k=0.995)
    else:
        defaults = dict(iterations=300, alpha=0.1, mu=0.9)
    sched = _schedule(args, defaults)
    problem = RestorationProblem(
        y=y,
        op=op,
        denoiser=denoiser,
        prior=prior,
        data_kind="na" if noise_adaptive else "nb",
        sigma_n=None if noise_adaptive else args.sigma_n,
        blind=args.blind,
        x0=_rescale_01(op.adjoint(y)),
        k0=kernel,
    )
    x, k_est, trace = _run_problem(args, problem, sched)
    out_path = _output_path(args, input_path)
    extra = {}
    if args.blind:
        kernel_path = os.path.splitext(out_path)[0] + "_kernel.txt"
        write_kernel(kernel_path, k_est)
        extra["kernel"] = kernel_path
    _finish(args, input_path, out_path, x, k_est, trace, started, "deblur", extra)


def cmd_deblur(args):
    _validate_common(args)
    if args.blind and args.sigma_n is not None:
        raise UsageError("blind deblurring is noise-adaptive; drop --sigma-n")
    if args.noise_adaptive and args.sigma_n is not None:
        raise UsageError("--noise-adaptive and --sigma-n are mutually exclusive")
    if not args.blind and not args.noise_adaptive and args.sigma_n is None:
        raise UsageError("choose a noise mode: --sigma-n <std> or --noise-adaptive")
    if not args.blind and not args.kernel:
        raise UsageError("non-blind deblurring needs --kernel (or pass --blind)")
    if args.kernel and not os.path.exists(args.kernel):
        raise UsageError(f"kernel file not found: {args.kernel}")
    _run_jobs(args, _deblur_one)


def sr_kernel(scale):
    """Anti-alias Gaussian: std 0.5*scale, truncated at 4 std, normalized.

    Scale 1 involves no resampling, hence no anti-alias filter.
    """
    if scale == 1:
        return np.array([[1.0]])
    std = 0.5 * scale
    half = int(math.ceil(4.0 * std))
    ax = np.arange(-half, half + 1)
    g = np.exp(-0.5 * (ax / std) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def _sr_one(args, input_path):
    started = time.perf_counter()
    y = read_image(input_path)
    kernel = sr_kernel(args.scale)
    latent_shape = (y.shape[0], y.shape[1] * args.scale, y.shape[2] * args.scale)
    denoiser = _load_denoiser(args, latent_shape)
    prior = _make_prior(denoiser, args.prior_weight)
    op = DegradationOp(kernel=kernel, scale=args.scale)
    sigma_n = max(args.sigma_n if args.sigma_n is not None else SR_SIGMA_N_DEFAULT, SR_SIGMA_N_FLOOR)
    defaults = dict(iterations=300, alpha=2.0 * sigma_n**2, mu=0.9)
    iterations = args.iterations if args.iterations is not None else defaults["iterations"]
    weights = tuple(np.linspace(1.0, 0.0, iterations)) if iterations else ()
    sched = _schedule(args, defaults, iterations=iterations, prior_weights=weights)
    problem = RestorationProblem(
        y=y,
        op=op,
        denoiser=denoiser,
        prior=prior,
        data_kind="nb",
        sigma_n=sigma_n,
        x0=bilinear_upsample(y, args.scale),
    )
    x, k, trace = _run_problem(args, problem, sched)
    _finish(args, input_path, _output_path(args, input_path), x, k, trace, started, "sr",
            {"scale": args.scale})


def cmd_sr(args):
    _validate_common(args)
    if args.scale < 1 or args.scale > 5:
        raise UsageError("--scale must be an integer in 1..5")
    _run_jobs(args, _sr_one)


def _demosaic_one(args, input_path):
    started = time.perf_counter()
    raw = read_image(input_path)
    h, w = raw.shape[-2:]
    mask = bayer_mask(h, w, args.pattern)
    if raw.shape[0] == 1:
        y = mask * raw  # scalar sensor plane scattered into RGB via the mask
    elif raw.shape[0] == 3:
        y = mask * raw
    else:
        raise UsageError(f"demosaic expects 1 or 3 channels, got {raw.shape[0]}")
    delta = np.array([[1.0]])
    denoiser = _load_denoiser(args, y.shape)
    prior = _make_prior(denoiser, args.prior_weight)
    op = DegradationOp(kernel=delta, mask=mask)
    iterations = args.iterations if args.iterations is not None else 300
    if args.sigma_n is not None:
        phases = ((iterations, max(args.sigma_n, SR_SIGMA_N_FLOOR)),)
    else:
        first = iterations // 2
        phases = ((first, DEMOSAIC_PHASES[0]), (iterations - first, DEMOSAIC_PHASES[1]))
    sigma_min = min(s for _, s in phases)
    defaults = dict(iterations=iterations, alpha=1.9 * sigma_min**2, mu=0.9)
    sched = _schedule(args, defaults, iterations=iterations, sigma_n_phases=phases)
    problem = RestorationProblem(
        y=y,
        op=op,
        denoiser=denoiser,
        prior=prior,
        data_kind="nb",
        sigma_n=phases[0][1],
        x0=bilinear_demosaic(y, mask),
    )
    x, k, trace = _run_problem(args, problem, sched)
    _finish(args, input_path, _output_path(args, input_path), x, k, trace, started, "demosaic",
            {"pattern": args.pattern.upper()})


def cmd_demosaic(args):
    _validate_common(args)
    if args.pattern.upper() not in ("RGGB", "BGGR", "GRBG", "GBRG"):
        raise UsageError(f"unknown Bayer pattern {args.pattern!r}")
    _run_jobs(args, _demosaic_one)


def cmd_verify(args):
    from .verify import run_all

    results = run_all(seed=args.seed)
    all_ok = True
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        all_ok = all_ok and ok
    if not all_ok:
        failing = ", ".join(name for name, ok, _ in results if not ok)
        print(f"failed: {failing}", file=sys.stderr)
        return 1
    return 0


def _run_jobs(args, one):
    if args.jobs > 1 and len(args.input) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(lambda p: one(args, p), args.input))
    else:
        for path in args.input:
            one(args, path)


def main(argv=None):
    level = os.environ.get("RESTORE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "deblur": cmd_deblur,
        "sr": cmd_sr,
        "demosaic": cmd_demosaic,
        "verify": cmd_verify,
    }
    try:
        rc = handlers[args.command](args)
        return 0 if rc is None else rc
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DmspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
