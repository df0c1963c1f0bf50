"""Export upstream 3D-model predictions into epialign interchange files."""

from .errors import AdapterError, ManifestError, NonRotationExtrinsic, ShapeMismatch
from .export import AdapterManifest, ExportResult, FrameSpec, PredictionSet, export
from .fixtures import make_fixture

__version__ = "0.1.0"
