"""Exception hierarchy shared across the toolkit.

``DataError`` subclasses map to CLI exit code 3 (malformed or inconsistent
inputs), ``NumericalError`` subclasses to exit code 4 (degenerate geometry or
failed numerical preconditions).
"""


class EpialignError(Exception):
    """Base class for all toolkit errors."""


class DataError(EpialignError):
    """Malformed, missing, or inconsistent input data."""


class NumericalError(EpialignError):
    """Degenerate geometry or a failed numerical precondition."""


# -- data errors --------------------------------------------------------------

class ParseError(DataError):
    """A file failed structural validation; message carries the location."""


class VersionMismatch(DataError):
    """A file declares an unsupported format version."""


class RotationInvalid(DataError):
    """A rotation matrix is not orthonormal with determinant +1."""


class FrameMismatch(DataError):
    """Two rigs being compared do not share the same frame ids."""


class InsufficientFrames(DataError):
    """An operation needs more camera frames than were provided."""


class InsufficientCorrespondences(DataError):
    """Too few correspondences survive to run the alignment."""


class EmptyResiduals(DataError):
    """No finite residuals to build a histogram from."""


class EmptySequence(DataError):
    """An error sequence required to be non-empty was empty."""


class EmptyCloud(DataError):
    """A point cloud required to be non-empty was empty."""


class MissingConfidence(DataError):
    """Confidence-based weights requested but no confidences are present."""


class MissingDepthMap(DataError):
    """A frame referenced by a correspondence has no depth map."""


class IoError(DataError):
    """Writing an output file failed."""


# -- numerical errors ----------------------------------------------------------

class DegenerateRotation6D(NumericalError):
    """A 6D rotation encoding cannot be orthonormalized."""


class DegenerateBaseline(NumericalError):
    """Camera centers coincide; epipolar geometry is undefined."""


class DegenerateEpipolarLine(NumericalError):
    """An epipolar line has a vanishing image-plane normal."""


class InvalidDepth(NumericalError):
    """A depth value is non-positive or non-finite."""


class ZeroTotalWeight(NumericalError):
    """All correspondence weights vanish; the loss is undefined."""


class NoCovisibility(NumericalError):
    """No scene point is visible in at least two cameras."""
