"""
Exception hierarchy shared by every meshcast subpackage.

Each error carries the process exit code the command-line tool reports
when the error escapes to the top level.
"""

from typing import Any, Dict, Optional


class MeshCastError(Exception):
    """Base class for all meshcast failures."""

    exit_code = 1
    kind = "error"

    def to_dict(self) -> Dict[str, Any]:
        """Render the error the way tool-server responses report failures."""
        return {"error": self.kind, "message": str(self)}


class ConfigError(MeshCastError):
    """Invalid configuration, command-line flags, or model hyperparameters."""

    exit_code = 2
    kind = "config error"


class ShapeError(ConfigError):
    """Tensor extents that violate an operation's contract."""

    kind = "shape error"


class TapeError(ConfigError):
    """Misuse of the differentiation tape (detached loss, repeated backward)."""

    kind = "tape error"


class DataError(MeshCastError):
    """Unreadable, malformed or inconsistent input data."""

    exit_code = 3
    kind = "data error"


class NiftiError(DataError):
    kind = "nifti error"


class NiftiMagicError(NiftiError):
    """Header size or magic string does not identify a NIfTI-1 file."""


class NiftiDatatypeError(NiftiError):
    """Voxel datatype code outside the supported set."""


class NiftiTruncatedError(NiftiError):
    """File ends before the declared voxel payload."""


class PreprocessingError(DataError):
    kind = "preprocessing error"


class GeometryError(DataError):
    kind = "geometry error"


class SplitError(DataError):
    kind = "split error"


class NumericalDivergenceError(MeshCastError):
    """Training produced a non-finite loss.

    Attributes:
        last_finite_state: parameter arrays keyed by path from the last
            step whose loss was finite, or None if the first step diverged
        checkpoint_path: where that state was written, if anywhere
    """

    exit_code = 4
    kind = "numerical divergence"

    def __init__(
        self,
        message: str,
        last_finite_state: Optional[Dict[str, Any]] = None,
        checkpoint_path: Optional[str] = None,
    ):
        super().__init__(message)
        self.last_finite_state = last_finite_state
        self.checkpoint_path = checkpoint_path

    def to_dict(self) -> Dict[str, Any]:
        result = super().to_dict()
        if self.checkpoint_path:
            result["checkpoint"] = self.checkpoint_path
        return result
