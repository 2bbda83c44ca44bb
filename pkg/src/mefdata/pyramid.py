"""Gaussian / Laplacian pyramids with a 5-tap binomial kernel.

Rasters are float arrays of shape (H, W) or (H, W, C); channels are
processed independently. Odd sizes are handled by ceil-halving on the way
down and cropping to the finer level's shape on the way up, so
``collapse(laplacian_pyramid(x, d))`` reproduces ``x`` up to float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class Pyramid:
    levels: list
    kind: str  # "gaussian" | "laplacian"

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]


def blur(x: np.ndarray) -> np.ndarray:
    y = correlate1d(x, KERNEL, axis=0, mode="nearest")
    return correlate1d(y, KERNEL, axis=1, mode="nearest")


def downsample(x: np.ndarray) -> np.ndarray:
    return blur(x)[::2, ::2]


def upsample(x: np.ndarray, shape: tuple) -> np.ndarray:
    """Zero-insert ``x`` into a raster of ``shape`` (H, W) then blur with gain 4."""
    up = np.zeros(tuple(shape[:2]) + x.shape[2:], dtype=x.dtype)
    up[::2, ::2] = x
    return 4.0 * blur(up)


def max_depth(shape) -> int:
    """Largest depth such that min(h, w) / 2**(depth-1) >= 1."""
    return int(math.floor(math.log2(min(shape[0], shape[1])))) + 1


def default_depth(shape) -> int:
    return max(1, int(math.floor(math.log2(min(shape[0], shape[1])))) - 1)


def _check_depth(x: np.ndarray, depth: int) -> None:
    if x.ndim not in (2, 3) or min(x.shape[:2]) < 1:
        raise ValueError(f"expected a non-empty (H, W[, C]) raster, got {x.shape}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if min(x.shape[:2]) / 2 ** (depth - 1) < 1:
        raise ValueError("depth exceeds image size")


def gaussian_pyramid(img: np.ndarray, depth: int) -> Pyramid:
    x = np.asarray(img)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    _check_depth(x, depth)
    levels = [x]
    for _ in range(depth - 1):
        levels.append(downsample(levels[-1]))
    return Pyramid(levels, "gaussian")


def laplacian_pyramid(img: np.ndarray, depth: int) -> Pyramid:
    g = gaussian_pyramid(img, depth).levels
    levels = [g[k] - upsample(g[k + 1], g[k].shape) for k in range(depth - 1)]
    levels.append(g[-1])
    return Pyramid(levels, "laplacian")


def collapse(pyr: Pyramid) -> np.ndarray:
    if pyr.kind != "laplacian":
        raise ValueError("cannot collapse gaussian pyramid")
    out = pyr.levels[-1]
    for lap in reversed(pyr.levels[:-1]):
        out = lap + upsample(out, lap.shape)
    return out
