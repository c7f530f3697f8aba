"""Array and coordinate primitives shared by matching, geometry and eval."""
from __future__ import annotations

import numpy as np

from ..errors import OutOfBounds, ZeroDescriptor
from .types import FeatureMap, Keypoint

NORM_EPS = 1e-12


def l2_normalize(fm: FeatureMap) -> FeatureMap:
    """Scale every grid descriptor to unit L2 norm.

    Raises ZeroDescriptor if any location's norm is below 1e-12.
    """
    data = fm.data.astype(np.float64)
    norms = np.linalg.norm(data, axis=-1, keepdims=True)
    if np.any(norms < NORM_EPS):
        raise ZeroDescriptor("feature map contains a (near-)zero descriptor")
    out = (data / norms).astype(np.float32)
    return FeatureMap(data=out, image_size=fm.image_size, normalized=True)


def image_to_grid(x: float, y: float, image_size: tuple[int, int], grid: tuple[int, int]) -> tuple[float, float]:
    """Map index coordinates in the image to index coordinates in the grid."""
    h, w = image_size
    gh, gw = grid
    gx = (x + 0.5) * (gw / w) - 0.5
    gy = (y + 0.5) * (gh / h) - 0.5
    return gx, gy


def grid_to_image(gx: float, gy: float, image_size: tuple[int, int], grid: tuple[int, int]) -> tuple[float, float]:
    """Inverse of image_to_grid."""
    h, w = image_size
    gh, gw = grid
    x = (gx + 0.5) * (w / gw) - 0.5
    y = (gy + 0.5) * (h / gh) - 0.5
    return x, y


def bilinear_sample(fm: FeatureMap, point: Keypoint) -> np.ndarray:
    """Descriptor at a continuous image point, bilinear over the 4 nearest cells.

    The image point is mapped into grid coordinates with half-pixel
    alignment; samples beyond the outermost cell centers clamp to the border
    (interpolation never leaves the grid).
    """
    h, w = fm.image_size
    if not point.in_image((h, w)):
        raise OutOfBounds(f"point ({point.x}, {point.y}) outside {h}x{w} image")
    gh, gw = fm.grid
    gx, gy = image_to_grid(point.x, point.y, (h, w), (gh, gw))

    x0 = int(np.floor(gx))
    y0 = int(np.floor(gy))
    fx = gx - x0
    fy = gy - y0

    def cell(r: int, c: int) -> np.ndarray:
        return fm.data[min(max(r, 0), gh - 1), min(max(c, 0), gw - 1)]

    top = (1.0 - fx) * cell(y0, x0) + fx * cell(y0, x0 + 1)
    bot = (1.0 - fx) * cell(y0 + 1, x0) + fx * cell(y0 + 1, x0 + 1)
    return ((1.0 - fy) * top + fy * bot).astype(np.float32)


def rescale_point(point: Keypoint, from_size: tuple[int, int], to_size: tuple[int, int]) -> Keypoint:
    """Rescale index coordinates between image resolutions.

    Half-pixel aligned: x' = (x + 0.5) * (w_to / w_from) - 0.5. The map is
    affine and exactly invertible, so from->to->from is the identity.
    """
    fh, fw = from_size
    th, tw = to_size
    if fh <= 0 or fw <= 0 or th <= 0 or tw <= 0:
        raise ValueError("image sizes must be positive")
    x = (point.x + 0.5) * (tw / fw) - 0.5
    y = (point.y + 0.5) * (th / fh) - 0.5
    return point.with_xy(x, y)
