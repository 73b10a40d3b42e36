"""Portable binary format for the residual-CNN denoiser weights.

Layout (little-endian):
  magic "DMSP" | u32 version=1 | f64 sigma_train | u32 n_layers
  per layer: u32 out, in, kh, kw | f32 taps (out-major, in, row, col) | f32 bias[out]

Weights are held in float32 so a save/load round-trip is bit-exact.
"""

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagicError, LayerShapeError, TruncatedWeightsError, WeightFormatError

__all__ = ["ConvLayer", "CnnWeights", "save_weights", "load_weights", "random_weights"]

MAGIC = b"DMSP"
VERSION = 1


@dataclass
class ConvLayer:
    weights: np.ndarray  # (out, in, kh, kw) float32
    biases: np.ndarray  # (out,) float32

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float32)
        self.biases = np.ascontiguousarray(self.biases, dtype=np.float32)
        if self.weights.ndim != 4:
            raise LayerShapeError(-1, f"taps must be 4-D, got shape {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise LayerShapeError(
                -1, f"bias shape {self.biases.shape} does not match {self.weights.shape[0]} outputs"
            )

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]


@dataclass
class CnnWeights:
    layers: list = field(default_factory=list)
    sigma_train: float = 0.0

    def __post_init__(self):
        for i in range(1, len(self.layers)):
            prev, cur = self.layers[i - 1], self.layers[i]
            if cur.in_channels != prev.out_channels:
                raise LayerShapeError(
                    i,
                    f"expects {cur.in_channels} input channels but layer {i - 1} "
                    f"produces {prev.out_channels}",
                )
        if self.layers and self.layers[0].in_channels != self.layers[-1].out_channels:
            raise LayerShapeError(
                len(self.layers) - 1,
                "residual output requires last out-channels == first in-channels",
            )

    @property
    def channels(self):
        return self.layers[0].in_channels if self.layers else 0

    def __eq__(self, other):
        if not isinstance(other, CnnWeights):
            return NotImplemented
        if self.sigma_train != other.sigma_train or len(self.layers) != len(other.layers):
            return False
        return all(
            np.array_equal(a.weights, b.weights) and np.array_equal(a.biases, b.biases)
            for a, b in zip(self.layers, other.layers)
        )


def save_weights(w):
    """Serialize to the DMSP byte format."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<d", float(w.sigma_train)))
    buf.write(struct.pack("<I", len(w.layers)))
    for layer in w.layers:
        out_c, in_c, kh, kw = layer.weights.shape
        buf.write(struct.pack("<4I", out_c, in_c, kh, kw))
        buf.write(layer.weights.astype("<f4").tobytes(order="C"))
        buf.write(layer.biases.astype("<f4").tobytes(order="C"))
    return buf.getvalue()


def _read_exact(buf, n, what):
    data = buf.read(n)
    if len(data) != n:
        raise TruncatedWeightsError(f"file ends inside {what} ({len(data)}/{n} bytes)")
    return data


def load_weights(data):
    """Parse bytes in the DMSP format back into :class:`CnnWeights`."""
    buf = io.BytesIO(data)
    magic = buf.read(4)
    if magic != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, got {magic!r}")
    (version,) = struct.unpack("<I", _read_exact(buf, 4, "version"))
    if version != VERSION:
        raise WeightFormatError(f"unsupported format version {version}")
    (sigma_train,) = struct.unpack("<d", _read_exact(buf, 8, "sigma_train"))
    (n_layers,) = struct.unpack("<I", _read_exact(buf, 4, "layer count"))
    layers = []
    for i in range(n_layers):
        out_c, in_c, kh, kw = struct.unpack("<4I", _read_exact(buf, 16, f"layer {i} header"))
        n_taps = out_c * in_c * kh * kw
        taps = np.frombuffer(
            _read_exact(buf, 4 * n_taps, f"layer {i} taps"), dtype="<f4"
        ).reshape(out_c, in_c, kh, kw)
        biases = np.frombuffer(_read_exact(buf, 4 * out_c, f"layer {i} biases"), dtype="<f4")
        layers.append(ConvLayer(weights=taps.copy(), biases=biases.copy()))
    trailing = buf.read(1)
    if trailing:
        raise WeightFormatError("trailing bytes after declared payload")
    return CnnWeights(layers=layers, sigma_train=sigma_train)


def random_weights(rng, channels=1, depth=5, hidden=32, taps=3, sigma_train=0.1, scale=0.1):
    """Randomly initialized residual-CNN weights (testing and init)."""
    dims = [channels] + [hidden] * (depth - 1) + [channels]
    layers = []
    for i in range(depth):
        fan_in = dims[i] * taps * taps
        w = rng.standard_normal((dims[i + 1], dims[i], taps, taps)) * scale / np.sqrt(fan_in)
        layers.append(ConvLayer(weights=w, biases=np.zeros(dims[i + 1])))
    return CnnWeights(layers=layers, sigma_train=sigma_train)
