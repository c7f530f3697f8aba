"""Gaussian-blurred correspondence targets on a feature grid."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import EvenKernel, OutOfGrid


@dataclass(frozen=True)
class CorrespondenceMap:
    """N target distributions over an H x W grid, one per source point.

    source_points holds (row, col) grid coordinates aligned with targets;
    every targets[n] slice is nonnegative and sums to 1.
    """

    targets: np.ndarray  # N x H x W float32
    source_points: tuple  # ((row, col), ...) length N
    kernel_size: int

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=np.float32)
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "source_points", tuple(tuple(p) for p in self.source_points))
        if t.ndim != 3:
            raise ValueError(f"targets must be NxHxW, got {t.shape}")
        if len(self.source_points) != t.shape[0]:
            raise ValueError("source_points length must match targets")
        if t.shape[0] > 0:
            sums = t.reshape(t.shape[0], -1).sum(axis=1)
            if np.any(t < 0) or not np.all(np.abs(sums - 1.0) <= 1e-5):
                raise ValueError("each target slice must be a distribution")

    @property
    def grid(self) -> tuple[int, int]:
        return (self.targets.shape[1], self.targets.shape[2])


@lru_cache(maxsize=32)
def _gaussian_kernel(k: int) -> np.ndarray:
    """Unnormalized k x k Gaussian with sigma = k / 4."""
    sigma = k / 4.0
    c = k // 2
    ax = np.arange(k, dtype=np.float64) - c
    xx, yy = np.meshgrid(ax, ax)
    return np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2))


def gaussian_targets(
    points,
    source_points,
    kernel_size: int,
    grid: tuple[int, int],
) -> CorrespondenceMap:
    """Blur a delta at each target grid point with a k x k Gaussian.

    points / source_points: sequences of (row, col) grid coordinates
    (continuous allowed; targets snap to the nearest cell). Kernel mass
    falling outside the grid is cropped before renormalizing to sum 1.
    """
    k = int(kernel_size)
    if k < 1 or k % 2 == 0:
        raise EvenKernel(f"kernel size must be odd and >= 1, got {k}")
    gh, gw = int(grid[0]), int(grid[1])
    points = list(points)
    source_points = list(source_points)
    if len(points) != len(source_points):
        raise ValueError("points and source_points must align")

    kern = _gaussian_kernel(k)
    half = k // 2
    out = np.zeros((len(points), gh, gw), dtype=np.float64)
    for n, (r, c) in enumerate(points):
        ri, ci = int(np.rint(r)), int(np.rint(c))
        if not (0 <= ri < gh and 0 <= ci < gw):
            raise OutOfGrid(f"target point ({r}, {c}) outside {gh}x{gw} grid")
        r0, r1 = max(ri - half, 0), min(ri + half + 1, gh)
        c0, c1 = max(ci - half, 0), min(ci + half + 1, gw)
        patch = kern[r0 - ri + half : r1 - ri + half, c0 - ci + half : c1 - ci + half]
        out[n, r0:r1, c0:c1] = patch / patch.sum()
    return CorrespondenceMap(
        targets=out.astype(np.float32),
        source_points=tuple(source_points),
        kernel_size=k,
    )
