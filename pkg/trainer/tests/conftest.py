import os

import cv2
import numpy as np
import pytest


def smooth_field(shape, rng, corner=6.0):
    """Low-pass-filtered white noise, normalized into [0.1, 0.9]."""
    h, w = shape
    white = np.fft.fft2(rng.standard_normal((h, w)))
    fy = np.fft.fftfreq(h)[:, None] * h
    fx = np.fft.fftfreq(w)[None, :] * w
    gain = 1.0 / (1.0 + (fy**2 + fx**2) / corner**2)
    field = np.fft.ifft2(white * gain).real
    lo, hi = field.min(), field.max()
    return 0.1 + 0.8 * (field - lo) / (hi - lo)


def write_corpus(directory, count=16, size=96, seed=0):
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        img = smooth_field((size, size), rng)
        cv2.imwrite(os.path.join(directory, f"img_{i:03d}.png"), np.rint(img * 255).astype(np.uint8))
    return directory


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    return write_corpus(str(tmp_path_factory.mktemp("corpus")))
