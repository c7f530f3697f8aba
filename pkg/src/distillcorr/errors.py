"""Exception types shared across the package.

Everything raised on purpose derives from DistillCorrError so callers can
catch one base class at the CLI / service boundary.
"""


class DistillCorrError(Exception):
    """Base class for all errors raised by distillcorr."""


class ZeroDescriptor(DistillCorrError):
    """A feature location has (near-)zero norm and cannot be normalized."""


class OutOfBounds(DistillCorrError):
    """A point lies outside the physical extent of its image."""


class BackendUnavailable(DistillCorrError):
    """A feature backend cannot be loaded (missing weights, unknown id)."""


class ShapeMismatch(DistillCorrError):
    """Arrays disagree in shape where equal shapes are required."""


class GridMismatch(ShapeMismatch):
    """Feature maps disagree in spatial grid."""


class NotNormalized(DistillCorrError):
    """An operation requires per-location L2-normalized feature maps."""


class InvalidTimestep(DistillCorrError):
    """Requested diffusion timestep is outside the backend schedule."""


class EmptyList(DistillCorrError):
    """An aggregate operation received no inputs."""


class IOFailure(DistillCorrError):
    """The feature cache store cannot be read or written."""


class UnsupportedBackbone(DistillCorrError):
    """LoRA injection target has no identifiable query/value projections."""


class HeadAlreadyPresent(DistillCorrError):
    """attach_head called on a model that already carries a head."""


class NonPositiveTau(DistillCorrError):
    """Softmax temperature must be strictly positive."""


class EvenKernel(DistillCorrError):
    """Gaussian target kernel size must be odd."""


class OutOfGrid(DistillCorrError):
    """A correspondence point lies outside the feature grid."""


class EmptyCorrespondences(DistillCorrError):
    """A correspondence map with zero points was passed to a loss."""


class InvalidDepth(DistillCorrError):
    """Back-projection requested at a pixel with invalid (<= 0) depth."""


class BehindCamera(DistillCorrError):
    """Projection requested for a world point behind the camera plane."""


class InsufficientOverlap(DistillCorrError):
    """A frame pair has too few mutually visible pixels to sample from."""


class EmptyDataset(DistillCorrError):
    """An index build or sampling strategy received an empty dataset."""


class UnknownId(DistillCorrError):
    """Queried image id is not present in the embedding index."""


class StrategyUnavailable(DistillCorrError):
    """A pair-sampling strategy's requirements are not met."""


class NonInvolutionMap(DistillCorrError):
    """A flip label map must be its own inverse."""


class MissingBBox(DistillCorrError):
    """PCK with bbox reference needs a bounding box for every pair."""


class LengthMismatch(DistillCorrError):
    """Prediction and ground-truth lists differ in length."""


class DegenerateFeatures(DistillCorrError):
    """All descriptors identical; clustering is undefined."""


class ConfigInvalid(DistillCorrError):
    """A run configuration failed validation."""
