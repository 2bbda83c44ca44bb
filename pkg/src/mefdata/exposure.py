"""Exposure manipulation through a simplified ISP (gain, clip, sRGB encode).

Two ways to get a multi-exposure stack:

* :func:`render_mes` re-exposes a linear (HDR) image at fixed EV offsets.
* :func:`synthesize_mes` re-exposes an 8-bit image so that each frame hits a
  requested mean intensity (style code), solving for the linear gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .imgcore import check_linear, check_srgb, mean_intensity, srgb_decode, srgb_encode

DEFAULT_EVS = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
DEFAULT_TARGETS = (0.25, 0.5, 0.75)

MAX_STOPS = 10.0
MEAN_TOL = 1e-3
BISECT_ITERS = 40


@dataclass(frozen=True)
class ExposureStack:
    frames: list
    evs: list
    source_id: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.frames) != len(self.evs):
            raise ValueError("frames and evs must have the same length")
        if len(self.frames) < 2:
            raise ValueError("an exposure stack needs at least 2 frames")
        shape = self.frames[0].shape
        for f in self.frames:
            check_srgb(f)
            if f.shape != shape:
                raise ValueError("all frames must have identical dimensions")
        if any(b <= a for a, b in zip(self.evs, self.evs[1:])):
            raise ValueError("evs must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @property
    def shape(self):
        return self.frames[0].shape

    def subset(self, idx: Sequence[int]) -> "ExposureStack":
        idx = sorted(idx)
        return ExposureStack([self.frames[i] for i in idx], [self.evs[i] for i in idx],
                             self.source_id)


@dataclass(frozen=True)
class StyleCode:
    z: float

    def __post_init__(self):
        if not 0.0 < self.z < 1.0:
            raise ValueError(f"style code must lie in (0, 1), got {self.z}")


class Retarget(NamedTuple):
    image: np.ndarray
    gain: float
    reached: bool


def render_ev(img: np.ndarray, ev: float) -> np.ndarray:
    img = check_linear(img)
    return srgb_encode(img * np.float32(2.0 ** ev))


def render_mes(img: np.ndarray, evs: Sequence[float] = DEFAULT_EVS,
               source_id: str = "") -> ExposureStack:
    evs = sorted(float(e) for e in evs)
    if not evs:
        raise ValueError("evs must be non-empty")
    if len(set(evs)) != len(evs):
        raise ValueError("duplicate exposure value")
    frames = [render_ev(img, ev) for ev in evs]
    return ExposureStack(frames, evs, source_id)


def _apply_gain(linear: np.ndarray, gain: float) -> np.ndarray:
    return srgb_encode(linear * np.float32(gain))


def retarget_exposure(img: np.ndarray, target: StyleCode | float) -> Retarget:
    """Scale an 8-bit image in linear light until its mean intensity hits ``target``.

    The gain is bisected in log2 space over [-10, 10] stops. The first probe is
    gain 1, so a target equal to the current mean returns the input unchanged.
    ``reached`` is False when no gain in range gets within 1e-3; the nearer
    boundary result is returned in that case.
    """
    img = check_srgb(img)
    z = target.z if isinstance(target, StyleCode) else StyleCode(float(target)).z
    if mean_intensity(img) <= 0.0:
        raise ValueError("zero-intensity input cannot be retargeted")
    linear = srgb_decode(img)

    lo, hi = -MAX_STOPS, MAX_STOPS
    best = None
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        out = _apply_gain(linear, 2.0 ** mid)
        m = mean_intensity(out)
        err = abs(m - z)
        if best is None or err < best[0]:
            best = (err, mid, out)
        if err <= MEAN_TOL:
            break
        if m < z:
            lo = mid
        else:
            hi = mid
    if best[0] > MEAN_TOL:
        # bisection only approaches the ends of the range; evaluate them directly
        ends = []
        for stops in (-MAX_STOPS, MAX_STOPS):
            out = _apply_gain(linear, 2.0 ** stops)
            ends.append((abs(mean_intensity(out) - z), stops, out))
        end = min(ends, key=lambda t: t[0])
        best = end if end[0] <= MEAN_TOL or end[0] <= best[0] else best
    err, stops, out = best
    return Retarget(out, float(2.0 ** stops), err <= MEAN_TOL)


def synthesize_mes(img: np.ndarray, targets: Sequence[StyleCode | float] = DEFAULT_TARGETS,
                   source_id: str = "") -> ExposureStack:
    """Build a pseudo multi-exposure stack from one 8-bit image.

    EV labels are log2 of the solved gains and need not be integers.
    """
    zs = [t.z if isinstance(t, StyleCode) else float(t) for t in targets]
    if any(b < a for a, b in zip(zs, zs[1:])):
        raise ValueError("targets must be sorted ascending")
    results = [retarget_exposure(img, z) for z in zs]
    evs = [math.log2(r.gain) for r in results]
    meta = {"targets": zs, "reached": [r.reached for r in results]}
    return ExposureStack([r.image for r in results], evs, source_id, meta)
