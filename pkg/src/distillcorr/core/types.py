"""Core value types: images, keypoints, feature maps, similarity maps.

Coordinate convention (used everywhere in this package): a keypoint
coordinate is an index coordinate, i.e. x = i means the center of pixel
column i, whose continuous position is i + 0.5 in an image whose pixel i
spans [i, i+1). The physical extent of an image along x is therefore
[-0.5, width - 0.5). Mapping between resolutions and between image and
feature grid goes through the continuous position (affine scale, half-pixel
aligned).

All types are immutable values after construction and safe for concurrent
reads.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import ShapeMismatch


def _as_float32(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float32)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """RGB image with pixel values in [0, 1]."""

    pixels: np.ndarray  # H x W x 3, float32 in [0, 1]
    identifier: str
    category: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_float32(self.pixels))
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ShapeMismatch(f"expected HxWx3 pixels, got {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ShapeMismatch("image must be at least 1x1")
        if not np.all(np.isfinite(p)):
            raise ValueError("image pixels must be finite")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("image pixels must lie in [0, 1]")

    @property
    def size(self) -> tuple[int, int]:
        """(height, width) in pixels."""
        return (self.pixels.shape[0], self.pixels.shape[1])


@dataclass(frozen=True)
class Keypoint:
    """Continuous keypoint in index coordinates (x = i is pixel-i center)."""

    x: float
    y: float
    label: Optional[str] = None
    visible: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("keypoint coordinates must be finite")

    def in_image(self, size: tuple[int, int]) -> bool:
        """True if the point lies within the physical pixel extent."""
        h, w = size
        return -0.5 <= self.x < w - 0.5 and -0.5 <= self.y < h - 0.5

    def with_xy(self, x: float, y: float) -> "Keypoint":
        return replace(self, x=float(x), y=float(y))


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("bounding box must have positive extent")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class FeatureMap:
    """Dense descriptor grid Hf x Wf x D describing an image of image_size.

    Grid cells are row-major (y outer, x inner); flattened index r*Wf + c.
    """

    data: np.ndarray  # Hf x Wf x D float32
    image_size: tuple[int, int]  # (height, width) of the described image
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "data", _as_float32(self.data))
        d = self.data
        if d.ndim != 3:
            raise ShapeMismatch(f"expected HfxWfxD data, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("feature map entries must be finite")
        h, w = self.image_size
        object.__setattr__(self, "image_size", (int(h), int(w)))
        if self.normalized:
            norms = np.linalg.norm(d.astype(np.float64), axis=-1)
            if not np.all(np.abs(norms - 1.0) <= 1e-5):
                raise ValueError("normalized flag set but descriptors are not unit-length")

    @property
    def grid(self) -> tuple[int, int]:
        """(Hf, Wf) spatial grid shape."""
        return (self.data.shape[0], self.data.shape[1])

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        """(Hf*Wf) x D view in row-major grid order."""
        return self.data.reshape(-1, self.data.shape[2])


@dataclass(frozen=True)
class SimilarityMap:
    """(H1*W1) x (H2*W2) similarity matrix between two feature grids."""

    data: np.ndarray
    source_grid: tuple[int, int]
    target_grid: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "data", _as_float32(self.data))
        object.__setattr__(self, "source_grid", tuple(int(v) for v in self.source_grid))
        object.__setattr__(self, "target_grid", tuple(int(v) for v in self.target_grid))
        h1, w1 = self.source_grid
        h2, w2 = self.target_grid
        if self.data.shape != (h1 * w1, h2 * w2):
            raise ShapeMismatch(
                f"similarity data {self.data.shape} does not match grids "
                f"{self.source_grid} x {self.target_grid}"
            )


@dataclass(frozen=True)
class CorrespondencePair:
    """Annotated image pair; every listed keypoint pair is mutually visible."""

    source: Image
    target: Image
    keypoints: tuple  # tuple of (Keypoint, Keypoint)
    target_bbox: Optional[BoundingBox] = None
    source_bbox: Optional[BoundingBox] = None

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        for kp_s, kp_t in self.keypoints:
            if not (kp_s.visible and kp_t.visible):
                raise ValueError("paired keypoints must both be visible")
            if not kp_s.in_image(self.source.size) or not kp_t.in_image(self.target.size):
                raise ValueError("paired keypoints must lie inside their images")
