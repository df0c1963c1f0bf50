"""Adapter error types."""


class AdapterError(Exception):
    """Base class for export failures."""


class ShapeMismatch(AdapterError):
    """A prediction tensor does not match the shape the manifest declares."""


class NonRotationExtrinsic(AdapterError):
    """An extrinsic rotation block is not close to a proper rotation."""


class ManifestError(AdapterError):
    """The manifest file is malformed."""
