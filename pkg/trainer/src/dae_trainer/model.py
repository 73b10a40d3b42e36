"""Residual denoising CNN matching the consuming engine's architecture:
3x3 convolutions with circular padding, ReLU between layers, and the final
output formed as input minus the predicted noise.
"""

import torch
import torch.nn as nn


class ResidualDenoiser(nn.Module):
    def __init__(self, channels=1, depth=5, hidden=32, taps=3):
        super().__init__()
        if depth < 1:
            raise ValueError("depth must be >= 1")
        pad = taps // 2
        dims = [channels] + [hidden] * (depth - 1) + [channels]
        self.convs = nn.ModuleList(
            nn.Conv2d(dims[i], dims[i + 1], taps, padding=pad, padding_mode="circular")
            for i in range(depth)
        )

    def predict_noise(self, x):
        h = x
        for i, conv in enumerate(self.convs):
            h = conv(h)
            if i != len(self.convs) - 1:
                h = torch.relu(h)
        return h

    def forward(self, x):
        return x - self.predict_noise(x)

    def export_layers(self):
        """Weight/bias pairs as float32 numpy arrays in (out, in, kh, kw) order."""
        return [
            (
                conv.weight.detach().cpu().numpy().astype("float32"),
                conv.bias.detach().cpu().numpy().astype("float32"),
            )
            for conv in self.convs
        ]
