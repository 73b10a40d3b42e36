"""Exception types raised across the package.

Every error that a caller may want to branch on gets its own class; all
inherit from :class:`DmspError` so CLI code can catch the whole family.
"""


class DmspError(Exception):
    """Base class for all package errors."""


class NonFiniteError(DmspError, ValueError):
    """An operation produced (or received) NaN/Inf samples."""


class ShapeMismatchError(DmspError):
    """Two arrays (or an array and an operator) disagree on shape."""

    def __init__(self, what, expected, actual):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{what}: expected shape {self.expected}, got {self.actual}")


class InvalidKernelError(DmspError):
    """Kernel violates its invariants (even dims, empty support, ...)."""


class SigmaMismatchError(DmspError):
    """Denoiser training noise level is inconsistent with the prior config."""

    def __init__(self, sigma_train, sigma_required, tol):
        self.sigma_train = sigma_train
        self.sigma_required = sigma_required
        super().__init__(
            f"denoiser trained at sigma={sigma_train!r} but the prior requires "
            f"sigma={sigma_required!r} (tolerance {tol})"
        )


class ExactFitError(DmspError):
    """Noise-adaptive weight is undefined: residual and kernel term are both zero."""


class DivergenceError(DmspError):
    """Optimization produced non-finite values.

    Carries the iteration index and the last finite state for diagnosis.
    """

    def __init__(self, t, last_state=None):
        self.t = t
        self.last_state = last_state
        super().__init__(f"non-finite update at iteration {t}")


class WeightFormatError(DmspError):
    """Weight file cannot be parsed."""


class BadMagicError(WeightFormatError):
    """Weight file does not start with the expected magic bytes."""


class TruncatedWeightsError(WeightFormatError):
    """Weight file ends before the declared payload."""


class LayerShapeError(WeightFormatError):
    """Adjacent layers (or layer vs. image) are channel-incompatible."""

    def __init__(self, layer_index, message):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: {message}")
