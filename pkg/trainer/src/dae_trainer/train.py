"""Training loop: minimize E[|clean - model(clean + noise)|^2] over corpus
patches, export DMSP weights, and report held-out denoising quality.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import add_noise, load_corpus, sample_patches
from .format import read_weights, write_weights
from .model import ResidualDenoiser


@dataclass
class TrainConfig:
    corpus_dir: str
    output_path: str
    sigma_train: float
    patch_size: int = 40
    patches_per_epoch: int = 512
    epochs: int = 10
    batch_size: int = 16
    depth: int = 5
    hidden: int = 32
    learning_rate: float = 1e-3
    holdout: int = 3
    seed: int = 0
    report_path: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma_train <= 0:
            raise ValueError("sigma_train must be positive")
        if self.patch_size < 8:
            raise ValueError("patch_size too small")


def _holdout_mse(model, images, cfg, rng):
    """MSE of the denoised output vs identity (noisy) on held-out patches."""
    patches = sample_patches(images, cfg.patch_size, 64, rng)
    noisy = add_noise(patches, cfg.sigma_train, rng)
    with torch.no_grad():
        den = model(torch.from_numpy(noisy).float()).numpy()
    return float(np.mean((noisy - patches) ** 2)), float(np.mean((den - patches) ** 2))


def train(cfg):
    """Run the residual-objective training; returns (model, report dict).

    The data pipeline (patch positions and noise draws) is fully determined
    by cfg.seed; noise is redrawn at every step.
    """
    images = load_corpus(cfg.corpus_dir)
    if cfg.holdout >= len(images):
        raise ValueError("holdout leaves no training images")
    train_images = images[: len(images) - cfg.holdout] if cfg.holdout else images
    held_images = images[len(images) - cfg.holdout :] if cfg.holdout else images

    channels = images[0].shape[0]
    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    model = ResidualDenoiser(channels=channels, depth=cfg.depth, hidden=cfg.hidden)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    steps = 0
    last_loss = float("nan")
    for _ in range(cfg.epochs):
        remaining = cfg.patches_per_epoch
        while remaining > 0:
            n = min(cfg.batch_size, remaining)
            remaining -= n
            clean = sample_patches(train_images, cfg.patch_size, n, rng)
            noisy = add_noise(clean, cfg.sigma_train, rng)
            clean_t = torch.from_numpy(clean).float()
            noisy_t = torch.from_numpy(noisy).float()
            optimizer.zero_grad()
            loss = torch.mean((clean_t - model(noisy_t)) ** 2)
            loss.backward()
            optimizer.step()
            steps += 1
            last_loss = float(loss.detach())

    write_weights(cfg.output_path, model.export_layers(), cfg.sigma_train)
    # verify the exported file through the independent parser
    layers, sigma_back = read_weights(cfg.output_path)
    if sigma_back != cfg.sigma_train or len(layers) != cfg.depth:
        raise RuntimeError("exported weight file failed verification")
    for (taps, bias), conv in zip(layers, model.convs):
        if not np.array_equal(taps, conv.weight.detach().numpy().astype("float32")):
            raise RuntimeError("exported taps do not round-trip")
        if not np.array_equal(bias, conv.bias.detach().numpy().astype("float32")):
            raise RuntimeError("exported biases do not round-trip")

    mse_noisy, mse_denoised = _holdout_mse(model, held_images, cfg, rng)
    report = {
        "sigma_train": cfg.sigma_train,
        "depth": cfg.depth,
        "hidden": cfg.hidden,
        "patch_size": cfg.patch_size,
        "steps": steps,
        "final_batch_loss": last_loss,
        "holdout_mse_noisy": mse_noisy,
        "holdout_mse_denoised": mse_denoised,
        "holdout_mse_reduction": 1.0 - mse_denoised / mse_noisy,
        "weights": cfg.output_path,
    }
    if cfg.report_path:
        with open(cfg.report_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    return model, report


def export_fixture(model, image, path):
    """Write an (input, output) forward-pass pair for cross-engine parity tests."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[np.newaxis]
    with torch.no_grad():
        out = model(torch.from_numpy(image[np.newaxis]).float()).numpy()[0]
    np.savez(path, input=image, output=out.astype(np.float64))
    return out
