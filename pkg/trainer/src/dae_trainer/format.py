"""Writer and independent reader for the DMSP weight format.

Layout (little-endian): magic "DMSP", u32 version = 1, f64 training noise
std, u32 layer count; per layer u32 out/in/kh/kw, float32 taps in
(out, in, row, col) order, float32 biases. The reader here exists so every
exported file is verified without touching the consuming engine's parser.
"""

import struct

import numpy as np

MAGIC = b"DMSP"
VERSION = 1


def write_weights(path, layers, sigma_train):
    """``layers`` is a list of (taps[out,in,kh,kw] float32, bias[out] float32)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<d", float(sigma_train)))
        fh.write(struct.pack("<I", len(layers)))
        for taps, bias in layers:
            taps = np.ascontiguousarray(taps, dtype="<f4")
            bias = np.ascontiguousarray(bias, dtype="<f4")
            if taps.ndim != 4 or bias.shape != (taps.shape[0],):
                raise ValueError(f"bad layer shapes {taps.shape} / {bias.shape}")
            fh.write(struct.pack("<4I", *taps.shape))
            fh.write(taps.tobytes(order="C"))
            fh.write(bias.tobytes(order="C"))


def read_weights(path):
    """Parse a DMSP file; returns (layers, sigma_train). Raises on malformed input."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}")
    off = 4
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    (sigma_train,) = struct.unpack_from("<d", data, off)
    off += 8
    (n_layers,) = struct.unpack_from("<I", data, off)
    off += 4
    layers = []
    for i in range(n_layers):
        out_c, in_c, kh, kw = struct.unpack_from("<4I", data, off)
        off += 16
        n = out_c * in_c * kh * kw
        if off + 4 * (n + out_c) > len(data):
            raise ValueError(f"truncated at layer {i}")
        taps = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(out_c, in_c, kh, kw)
        off += 4 * n
        bias = np.frombuffer(data, dtype="<f4", count=out_c, offset=off)
        off += 4 * out_c
        layers.append((taps.copy(), bias.copy()))
    if off != len(data):
        raise ValueError("trailing bytes")
    return layers, sigma_train
