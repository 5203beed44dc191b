"""Exception hierarchy for the training component."""


class TrainerError(Exception):
    """Base class for domain errors raised by this package."""


class NonFiniteScore(TrainerError):
    """Discriminator scores contain NaN or infinity."""


class ShapeMismatch(TrainerError):
    """Query/positive feature stacks disagree in layer count or shape."""


class AllInvalid(TrainerError):
    """A label grid has no valid cell to regress against."""


class EmptyManifest(TrainerError):
    """A dataset manifest contributes no usable frames."""


class FormatError(TrainerError):
    """Malformed SCM1 file or manifest record."""
