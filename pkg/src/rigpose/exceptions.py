"""Exception types raised across the package."""


class RigposeError(Exception):
    """Base class for all package-specific errors."""


class NearPiRotation(RigposeError):
    """Rotation too close to 180 deg for the 3-parameter encoding."""


class DegenerateInput(RigposeError):
    """Input correspondences carry no independent information."""


class MissingAnglePrior(RigposeError):
    """A rotation-angle prior is required but was not supplied."""


class UnsupportedSize(RigposeError):
    """Polynomial-matrix operation not defined for this shape."""


class NoRootsFound(RigposeError):
    """No seed of the root finder converged below the residual tolerance."""


class ModeMismatch(RigposeError):
    """Correspondence pair type contradicts the requested solver mode."""


class NormalizationFailure(RigposeError):
    """Null vector cannot be scaled to homogeneous form (point at infinity)."""


class PointAtInfinity(RigposeError):
    """Homography maps the point to infinity."""


class DegenerateQuad(RigposeError):
    """Four support corners are (near-)collinear; no homography fit."""


class InvalidSpread(RigposeError):
    """Point-spread parameter must be positive."""


class ZeroTranslation(RigposeError):
    """Translation direction undefined for (near-)zero translation."""


class InsufficientCorrespondences(RigposeError):
    """Fewer correspondences than the minimal sample size."""


class AllSamplesFailed(RigposeError):
    """Every RANSAC sample failed to produce a model."""
