"""Exception types shared across the package."""


class HwaveError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(HwaveError):
    """Invalid parameters, manifests, or domain-type invariant violations."""


class GridResolutionError(HwaveError):
    """A grid is too small or too coarse for the requested computation."""


class SymmetryError(HwaveError):
    """Reality/radiality symmetry violated beyond tolerance."""


class AdmissibilityError(ValidationError):
    """Exponent combination outside the admissible range of an estimate."""
