"""Exception taxonomy shared by every module.

All domain failures derive from FagstyleError so the CLI can map them to
exit code 1 with a machine-readable payload; programming errors (TypeError
etc.) are deliberately left outside the hierarchy.
"""


class FagstyleError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "error"

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self)}


class ShapeError(FagstyleError):
    """Tensor shapes or element counts incompatible with the operation."""

    code = "shape"


class FormatError(FagstyleError):
    """Malformed TNSR stream: bad magic, dtype code, or payload length."""

    code = "format"


class ValidationError(FagstyleError):
    """Values violate ingestion invariants (NaN/Inf, empty dims, bad rank)."""

    code = "validation"


class ConfigError(FagstyleError):
    """Invalid configuration value (patch count, temperature, step size...)."""

    code = "config"


class ScheduleError(FagstyleError):
    """Diffusion schedule inconsistency."""

    code = "schedule"


class DegenerateInputError(FagstyleError):
    """Input collapses under centering: no direction left to normalize."""

    code = "degenerate-input"


class DegenerateGeodesicError(FagstyleError):
    """Antipodal pre-shapes: the connecting great circle is not unique."""

    code = "degenerate-geodesic"

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index

    def payload(self) -> dict:
        out = super().payload()
        if self.index is not None:
            out["index"] = self.index
        return out


class DegenerateDirectionError(FagstyleError):
    """A direction vector (patch delta or text delta) has ~zero magnitude."""

    code = "degenerate-direction"

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index

    def payload(self) -> dict:
        out = super().payload()
        if self.index is not None:
            out["index"] = self.index
        return out


class DegenerateFeatureError(FagstyleError):
    """A per-position feature vector has ~zero norm; cosine undefined."""

    code = "degenerate-feature"
