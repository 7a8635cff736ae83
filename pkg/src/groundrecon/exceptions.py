"""Exception hierarchy shared by every module."""


class GroundReconError(Exception):
    """Base class for all errors raised by groundrecon."""

    code = "error"


class DomainError(GroundReconError, ValueError):
    """An argument lies outside the domain of an operation."""

    code = "domain"


class DegenerateError(GroundReconError, ValueError):
    """A geometric configuration is degenerate (zenith rays, vertical look-at, ...)."""

    code = "degenerate"


class NormalizationStateError(GroundReconError):
    """Fields were normalized twice or denormalized while raw."""

    code = "state"


class FormatError(GroundReconError, ValueError):
    """Malformed file contents."""

    code = "format"

    def __init__(self, msg, offset=None):
        if offset is not None:
            msg = f"{msg} (at byte offset {offset})"
        super().__init__(msg)
        self.offset = offset


class SceneError(GroundReconError, ValueError):
    """A scene cannot be rendered as described."""

    code = "scene"


class ReconstructionError(GroundReconError):
    """Too many pixels failed to reconstruct."""

    code = "numeric"

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class AlignmentError(GroundReconError, ValueError):
    """Least-squares alignment is rank deficient."""

    code = "numeric"


class EstimationError(GroundReconError):
    """Camera estimation had no usable pixels."""

    code = "numeric"
