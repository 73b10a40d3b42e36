"""Corpus loading and seed-deterministic patch/noise sampling."""

import os

import cv2
import numpy as np

IMAGE_EXTENSIONS = (".png",)


def load_corpus(directory):
    """Read every PNG in ``directory`` as planar (C, H, W) float64 in [0, 1]."""
    paths = sorted(
        os.path.join(directory, name)
        for name in os.listdir(directory)
        if name.lower().endswith(IMAGE_EXTENSIONS)
    )
    images = []
    for path in paths:
        arr = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise IOError(f"cannot read {path}")
        scale = 65535.0 if arr.dtype == np.uint16 else 255.0
        data = arr.astype(np.float64) / scale
        if data.ndim == 2:
            data = data[np.newaxis]
        else:
            data = np.transpose(data[:, :, ::-1], (2, 0, 1))
        images.append(data)
    if len(images) < 10:
        raise ValueError(f"corpus needs >= 10 images, found {len(images)} in {directory}")
    return images


def sample_patches(images, patch, count, rng):
    """Random crops, stacked (count, C, patch, patch); draws are rng-ordered."""
    channels = images[0].shape[0]
    out = np.empty((count, channels, patch, patch))
    for i in range(count):
        img = images[rng.integers(len(images))]
        c, h, w = img.shape
        if c != channels:
            raise ValueError("corpus mixes channel counts")
        if h < patch or w < patch:
            raise ValueError(f"image {img.shape} smaller than patch {patch}")
        y = rng.integers(h - patch + 1)
        x = rng.integers(w - patch + 1)
        out[i] = img[:, y : y + patch, x : x + patch]
    return out


def add_noise(patches, sigma, rng):
    """Fresh Gaussian noise per call; never cached or reused across steps."""
    return patches + sigma * rng.standard_normal(patches.shape)
