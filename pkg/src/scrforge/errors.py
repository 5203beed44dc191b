"""Exception hierarchy. Every domain error maps to CLI exit code 1."""


class ScrforgeError(Exception):
    """Base class for all domain errors raised by this package."""


# geometry
class BehindCamera(ScrforgeError):
    """Point has non-positive camera-space depth and cannot be projected."""


class NonPositiveDepth(ScrforgeError):
    """Unprojection requires strictly positive depth."""


# pointcloud
class ParseError(ScrforgeError):
    """Malformed PLY header or truncated payload."""


class MissingProperty(ScrforgeError):
    """PLY vertex element lacks a required position or color property."""


class LengthMismatch(ScrforgeError):
    """Parallel input lists have different lengths."""


class EmptyIndex(ScrforgeError):
    """Spatial index contains no points."""


class EmptyCloud(ScrforgeError):
    """Operation requires a non-empty point cloud."""


# renderer
class SamplingExhausted(ScrforgeError):
    """A camera pose could not reach the validity threshold within the retry budget."""


# histmatch
class EmptyPool(ScrforgeError):
    """No counted pixels in the image pool."""


# pnp
class DegenerateGeometry(ScrforgeError):
    """Collinear world points or duplicate pixels in a minimal P3P set."""


class NoRealSolution(ScrforgeError):
    """The P3P quartic has no admissible real root."""


class TooFewCorrespondences(ScrforgeError):
    """PnP-RANSAC needs at least 4 correspondences."""


# registration
class TooFewPoints(ScrforgeError):
    """Rigid alignment needs at least 3 point pairs."""


class DegenerateConfiguration(ScrforgeError):
    """Centered source points have rank < 2; rotation is not determined."""


class NoCorrespondences(ScrforgeError):
    """No point pair within the maximum correspondence distance."""


# eval
class EmptyList(ScrforgeError):
    """Aggregate statistics require a non-empty error list."""


# manifest / config
class ManifestError(ScrforgeError):
    """Invalid dataset manifest record or missing referenced file."""


class ConfigError(ScrforgeError):
    """Invalid or unknown key in a pipeline configuration file."""
