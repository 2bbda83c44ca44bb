"""Per-pixel weighted multi-exposure fusion.

Weights are computed on display values (codes / 255), normalized with an
epsilon-guarded sum, and applied to frames in linear light. Sums over frames
run in a canonical (content-sorted) order so that permuting the stack yields
bit-identical output.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Callable

import cv2
import numpy as np
from scipy.ndimage import correlate

from . import pyramid as pyr
from .exposure import ExposureStack
from .imgcore import luminance, srgb_decode, srgb_encode

log = logging.getLogger(__name__)

WELL_EXPOSED_MEAN = 0.5
WELL_EXPOSED_SIGMA = 0.2
DEGENERATE_SUM = 0.5

_LAPLACE = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class FusionConfig:
    engine: str = "mertens"
    wc: float = 1.0
    ws: float = 1.0
    we: float = 1.0
    epsilon: float = 1e-12
    pyramid_depth: int | None = None  # None -> pyramid.default_depth
    flat: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        exps = (self.wc, self.ws, self.we)
        if any(e < 0 for e in exps) or all(e == 0 for e in exps):
            raise ValueError("exponents must be >= 0 and not all zero")


@dataclass(frozen=True)
class WeightMaps:
    maps: list
    normalized: bool = False

    def __len__(self):
        return len(self.maps)


@dataclass
class FusionCandidate:
    """A fused image with its provenance and (later) quality scores."""

    image: np.ndarray
    provenance: list  # [(engine-or-candidate id, blend weight), ...]
    scores: dict = field(default_factory=dict)
    rank_stats: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return "+".join(f"{name}:{w:.4f}" for name, w in self.provenance)


def _canonical_order(arrays) -> list:
    return sorted(range(len(arrays)), key=lambda j: arrays[j].tobytes())


def _ordered_sum(arrays, order) -> np.ndarray:
    total = np.array(arrays[order[0]], dtype=np.float64, copy=True)
    for j in order[1:]:
        total += arrays[j]
    return total


def _unit(frame: np.ndarray) -> np.ndarray:
    # uint8 codes, or display values already in [0, 1]
    if frame.dtype == np.uint8:
        return frame.astype(np.float64) / 255.0
    return np.asarray(frame, dtype=np.float64)


def well_exposedness(frame: np.ndarray) -> np.ndarray:
    v = _unit(frame)
    e = np.exp(-((v - WELL_EXPOSED_MEAN) ** 2) / (2.0 * WELL_EXPOSED_SIGMA ** 2))
    return e.prod(axis=2)


def contrast(frame: np.ndarray) -> np.ndarray:
    """Absolute discrete Laplacian of luminance, edges clamped."""
    y = luminance(frame).astype(np.float64)
    return np.abs(correlate(y, _LAPLACE, mode="nearest"))


def saturation(frame: np.ndarray) -> np.ndarray:
    return _unit(frame).std(axis=2)


def mertens_weights(stack: ExposureStack, cfg: FusionConfig = FusionConfig()) -> WeightMaps:
    maps = []
    for f in stack.frames:
        # numpy gives 0.0 ** 0 == 1, so a zero exponent disables its criterion
        w = (np.power(contrast(f), cfg.wc)
             * np.power(saturation(f), cfg.ws)
             * np.power(well_exposedness(f), cfg.we))
        maps.append(w)
    return WeightMaps(maps, normalized=False)


def gradient_magnitude(frame: np.ndarray) -> np.ndarray:
    """Forward-difference gradient magnitude of luminance (zero on the last row/column)."""
    y = luminance(frame).astype(np.float64)
    gx = np.zeros_like(y)
    gy = np.zeros_like(y)
    gx[:, :-1] = y[:, 1:] - y[:, :-1]
    gy[:-1, :] = y[1:, :] - y[:-1, :]
    return np.hypot(gx, gy)


def gradient_weights(stack: ExposureStack, cfg: FusionConfig = FusionConfig()) -> WeightMaps:
    maps = [np.power(gradient_magnitude(f), cfg.wc) * np.power(well_exposedness(f), cfg.we)
            for f in stack.frames]
    return WeightMaps(maps, normalized=False)


def normalize_weights(w: WeightMaps, epsilon: float = 1e-12) -> WeightMaps:
    """w'_j = w_j / (sum_k w_k + epsilon)."""
    if w.normalized:
        raise ValueError("weight maps are already normalized")
    maps = [np.asarray(m, dtype=np.float64) for m in w.maps]
    if any(np.any(m < 0) for m in maps):
        raise ValueError("weights must be non-negative")
    denom = _ordered_sum(maps, _canonical_order(maps)) + epsilon
    # widen by a few ulps per term so rounding can never push the exact sum above 1
    denom *= 1.0 + 4.0 * len(maps) * np.finfo(np.float64).epsneg
    return WeightMaps([m / denom for m in maps], normalized=True)


def _check_inputs(stack: ExposureStack, w: WeightMaps) -> None:
    if not w.normalized:
        raise ValueError("fusion requires normalized weight maps")
    if len(w) != len(stack):
        raise ValueError("dimension mismatch: weight map count differs from frame count")
    for m in w.maps:
        if m.shape != stack.shape[:2]:
            raise ValueError(f"dimension mismatch: weight map {m.shape} vs frame {stack.shape[:2]}")


def blend_weights(stack: ExposureStack, w: WeightMaps):
    """Per-pixel convex weights used by the fusers, plus the canonical frame order.

    Where the normalized weights sum below 0.5 the pixel is degenerate and
    every frame gets 1/N. Elsewhere the weights are divided by their sum,
    which differs from the normalized maps by at most epsilon/sum.
    """
    _check_inputs(stack, w)
    n = len(stack)
    order = sorted(range(n), key=lambda j: (stack.frames[j].tobytes(), w.maps[j].tobytes()))
    total = _ordered_sum(w.maps, order)
    degenerate = total < DEGENERATE_SUM
    safe = np.where(degenerate, 1.0, total)
    out = [np.where(degenerate, 1.0 / n, m / safe) for m in w.maps]
    return out, order


def fuse_flat(stack: ExposureStack, w: WeightMaps) -> np.ndarray:
    weights, order = blend_weights(stack, w)
    linear = [srgb_decode(f).astype(np.float64) for f in stack.frames]
    terms = [weights[j][..., None] * linear[j] for j in range(len(stack))]
    fused = _ordered_sum(terms, order)
    return srgb_encode(np.clip(fused, 0.0, 1.0).astype(np.float32))


def fuse_pyramid(stack: ExposureStack, w: WeightMaps, depth: int | None = None) -> np.ndarray:
    weights, order = blend_weights(stack, w)
    if depth is None:
        depth = pyr.default_depth(stack.shape)
    depth = min(depth, pyr.max_depth(stack.shape))
    blended = None
    for j in order:
        gw = pyr.gaussian_pyramid(weights[j], depth).levels
        lf = pyr.laplacian_pyramid(srgb_decode(stack.frames[j]).astype(np.float64), depth).levels
        terms = [g[..., None] * l for g, l in zip(gw, lf)]
        if blended is None:
            blended = terms
        else:
            blended = [b + t for b, t in zip(blended, terms)]
    fused = pyr.collapse(pyr.Pyramid(blended, "laplacian"))
    return srgb_encode(np.clip(fused, 0.0, 1.0).astype(np.float32))


@dataclass(frozen=True)
class Engine:
    weights: Callable[[ExposureStack, FusionConfig], WeightMaps]
    pyramid: bool


ENGINES: dict[str, Engine] = {
    "mertens": Engine(mertens_weights, pyramid=True),
    "gradient": Engine(gradient_weights, pyramid=True),
    "flat-weighted": Engine(mertens_weights, pyramid=False),
}


def register_engine(name: str, weights: Callable, pyramid: bool = True) -> None:
    ENGINES[name] = Engine(weights, pyramid)


def compute_weights(stack: ExposureStack, engine: str, cfg: FusionConfig = FusionConfig()) -> WeightMaps:
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; known: {', '.join(sorted(ENGINES))}")
    return normalize_weights(ENGINES[engine].weights(stack, cfg), cfg.epsilon)


def run_engine(stack: ExposureStack, engine: str, cfg: FusionConfig = FusionConfig(),
               flat: bool | None = None) -> FusionCandidate:
    w = compute_weights(stack, engine, cfg)
    use_flat = (not ENGINES[engine].pyramid) if flat is None else flat
    if use_flat:
        image = fuse_flat(stack, w)
    else:
        image = fuse_pyramid(stack, w, cfg.pyramid_depth)
    meta = {"engine": engine, "mode": "flat" if use_flat else "pyramid",
            "evs": list(stack.evs), "source_id": stack.source_id}
    return FusionCandidate(image, [(engine, 1.0)], meta=meta)


def dump_weights(w: WeightMaps, out_dir: str, prefix: str = "weight") -> list:
    """Write each map as an 8-bit gray PNG, round(w' * 255)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for j, m in enumerate(w.maps):
        path = os.path.join(out_dir, f"{prefix}_{j}.png")
        code = np.rint(np.clip(m, 0.0, 1.0) * 255.0).astype(np.uint8)
        if not cv2.imwrite(path, code):
            raise OSError(f"{path}: write failed")
        paths.append(path)
    return paths
