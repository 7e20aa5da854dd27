"""Exception types shared across the package.

The CLI maps these onto process exit codes, so each family gets its own class.
"""


class GnnQaoaError(Exception):
    """Base class for every error raised deliberately by this package."""


class ConfigError(GnnQaoaError, ValueError):
    """Malformed experiment configuration or missing referenced artefact."""


class ResourceCapError(GnnQaoaError, ValueError):
    """A problem exceeds a hard size cap (oracle enumeration, statevector width)."""


class NumericalError(GnnQaoaError, ArithmeticError):
    """A computation produced NaN/inf or otherwise diverged."""


class GraphGenerationError(GnnQaoaError, RuntimeError):
    """Random graph sampling failed after the retry budget."""


class ShapeError(GnnQaoaError, ValueError):
    """Incompatible tensor shapes in the autodiff engine."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        joined = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {joined}")


class BackwardError(GnnQaoaError, RuntimeError):
    """Misuse of the reverse pass (non-scalar loss, repeated backward)."""
