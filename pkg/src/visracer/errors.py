"""Exception hierarchy shared across the package."""


class VisracerError(Exception):
    """Base class for all package errors."""


# --- track construction / geometric queries ---

class DegenerateSpec(VisracerError):
    """Track spec cannot produce a valid closed circuit."""


class SelfIntersectingEdges(VisracerError):
    """Track edges would overlap (curvature too high or track folds onto itself)."""


class OffTrack(VisracerError):
    """Query pose is too far outside the track edges."""


class OffTrackTooFar(OffTrack):
    """Position is beyond the projection search radius."""


# --- simulation ---

class NonFiniteState(VisracerError):
    """Vehicle state became non-finite."""


class BaselineStuck(VisracerError):
    """Baseline driver made no progress for too long during collection."""


# --- tensors / networks ---

class ShapeMismatch(VisracerError):
    """Tensor shape does not match what the layer or op expects."""


class IndivisibleShape(ShapeMismatch):
    """space-to-depth block size does not divide the spatial dims."""


class DimensionMismatch(ShapeMismatch):
    """Vector length differs from the declared observation layout."""


class EmptyDataset(VisracerError):
    """Operation requires at least one (or two) samples."""


class NonFiniteLoss(VisracerError):
    """Training loss became NaN or infinite."""


class NonFiniteObservation(VisracerError):
    """Policy input contains NaN or infinite entries."""


# --- persistence / harness ---

class ConfigInvalid(VisracerError):
    """Experiment configuration failed validation."""


class ArtifactMissing(VisracerError):
    """A referenced artifact file does not exist."""


class VersionMismatch(VisracerError):
    """Artifact file has an unsupported format version."""


class CorruptFile(VisracerError):
    """Artifact file failed its checksum or structural checks."""
