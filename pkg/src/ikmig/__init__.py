"""Intensity-only Kirchhoff migration.

Simulates array data for weak point scatterers under the single-scattering
approximation, discards the phases, recovers the measurable projection of
the scattered field with a closed-form least-squares step, and migrates the
result into an image.  Includes a stochastic-illumination mode, conditioning
and geometry diagnostics, and a command line front end.
"""

__version__ = "0.1.0"

from .errors import (
    DataFormatError,
    IkmigError,
    NumericError,
    SceneParseError,
    SceneValidationError,
    SingularityError,
)

__all__ = [
    "__version__",
    "IkmigError",
    "SceneParseError",
    "SceneValidationError",
    "SingularityError",
    "NumericError",
    "DataFormatError",
]
