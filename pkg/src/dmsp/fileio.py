"""Image and kernel file I/O.

PNG (8/16-bit, gray or RGB) maps sample values linearly to [0, 1]; PFM
carries raw 32-bit floats for lossless round-trips of real-valued data.
Kernels use a plain-text grid: first line "h w", then h rows of w reals.
"""

import os

import cv2
import numpy as np

from .image import as_image, as_kernel

__all__ = ["read_image", "write_image", "read_kernel", "write_kernel"]


def _from_cv(arr):
    """cv2 layout (H, W[, BGR]) to planar (C, H, W) float64 in [0, 1]."""
    if arr is None:
        raise FileNotFoundError("cv2 could not read image")
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"unsupported PNG sample type {arr.dtype}")
    data = arr.astype(np.float64) / scale
    if data.ndim == 2:
        return data[np.newaxis]
    if data.shape[2] == 3:
        return np.transpose(data[:, :, ::-1], (2, 0, 1))  # BGR -> RGB, planar
    raise ValueError(f"unsupported channel count {data.shape[2]}")


def _read_png(path):
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise FileNotFoundError(f"cannot read PNG {path}")
    return _from_cv(arr)


def _write_png(path, img, bit_depth=8):
    img = as_image(img)
    if bit_depth == 8:
        peak, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        peak, dtype = 65535.0, np.uint16
    else:
        raise ValueError("bit_depth must be 8 or 16")
    q = np.rint(np.clip(img, 0.0, 1.0) * peak).astype(dtype)
    if q.shape[0] == 1:
        out = q[0]
    elif q.shape[0] == 3:
        out = np.transpose(q, (1, 2, 0))[:, :, ::-1]  # planar RGB -> HWC BGR
    else:
        raise ValueError(f"PNG supports 1 or 3 channels, got {q.shape[0]}")
    if not cv2.imwrite(str(path), out):
        raise IOError(f"cv2 failed to write {path}")


def _read_pfm(path):
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"not a PFM file: header {header!r}")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        count = width * height * channels
        raw = np.frombuffer(fh.read(4 * count), dtype=dtype)
        if raw.size != count:
            raise ValueError("truncated PFM payload")
    data = raw.reshape(height, width, channels).astype(np.float64)
    data = data[::-1]  # PFM rows run bottom to top
    return np.transpose(data, (2, 0, 1)).copy()


def _write_pfm(path, img):
    img = as_image(img)
    c = img.shape[0]
    if c not in (1, 3):
        raise ValueError(f"PFM supports 1 or 3 channels, got {c}")
    with open(path, "wb") as fh:
        fh.write(b"PF\n" if c == 3 else b"Pf\n")
        fh.write(f"{img.shape[2]} {img.shape[1]}\n".encode())
        fh.write(b"-1.0\n")
        hwc = np.transpose(img, (1, 2, 0))[::-1]
        fh.write(hwc.astype("<f4").tobytes(order="C"))


def read_image(path):
    """Load a PNG or PFM image as planar float64 (C, H, W)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        return _read_png(path)
    if ext == ".pfm":
        return _read_pfm(path)
    raise ValueError(f"unsupported image format {ext!r} (use .png or .pfm)")


def write_image(path, img, bit_depth=8):
    """Write PNG (quantized, clipped to [0,1]) or PFM (raw floats) by extension."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        _write_png(path, img, bit_depth=bit_depth)
    elif ext == ".pfm":
        _write_pfm(path, img)
    else:
        raise ValueError(f"unsupported image format {ext!r} (use .png or .pfm)")


def read_kernel(path):
    """Parse the text grid format: "h w" then h rows of w reals."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError("kernel file too short")
    h, w = int(tokens[0]), int(tokens[1])
    vals = tokens[2:]
    if len(vals) != h * w:
        raise ValueError(f"kernel file declares {h}x{w} but carries {len(vals)} taps")
    return as_kernel(np.array([float(v) for v in vals]).reshape(h, w))


def write_kernel(path, k):
    k = as_kernel(k)
    with open(path, "w") as fh:
        fh.write(f"{k.shape[0]} {k.shape[1]}\n")
        for row in k:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
