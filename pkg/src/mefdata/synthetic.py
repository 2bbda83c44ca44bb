"""Procedural linear-light test scenes.

Deterministic for a given seed. Used for fixtures and demo runs where no
raw photographs are available.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.ndimage import gaussian_filter


def pink_noise(shape, rng: np.random.Generator, exponent: float = 1.0) -> np.ndarray:
    """Zero-mean, unit-std 1/f^exponent noise field."""
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.sqrt(fx ** 2 + fy ** 2)
    f[0, 0] = 1.0
    spectrum = (rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape)) / f ** exponent
    spectrum[0, 0] = 0.0
    field = np.fft.irfft2(spectrum, s=(h, w))
    return (field - field.mean()) / (field.std() + 1e-12)


def hdr_scene(seed: int, size=(192, 192)) -> np.ndarray:
    """Linear RGB scene in [0, 1] with several stops of illumination contrast.

    Textured reflectance (colored pink noise plus random shapes) under an
    illumination map with a bright region and a deep shadow; the median level
    varies per seed so rendered exposures cover most of the code range.
    """
    rng = np.random.default_rng(seed)
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w] / np.array([h, w])[:, None, None]

    base = rng.uniform(0.15, 0.6, 3)
    texture = 0.35 * pink_noise((h, w), rng, rng.uniform(0.8, 1.4))
    refl = base[None, None, :] * np.exp(texture)[..., None]
    for _ in range(rng.integers(3, 8)):
        cy, cx = rng.uniform(0, 1, 2)
        ry, rx = rng.uniform(0.05, 0.3, 2)
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 < 1.0
        refl[mask] = rng.uniform(0.03, 0.9, 3) * np.exp(0.2 * texture[mask])[:, None]
    refl = gaussian_filter(refl, sigma=(0.7, 0.7, 0))

    angle = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5)
    stops = rng.uniform(4.0, 9.0)
    illum = 2.0 ** (stops * ramp)
    cy, cx = rng.uniform(0.2, 0.8, 2)
    illum *= 1.0 + rng.uniform(5, 40) * np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / 0.01))

    scene = refl * illum[..., None]
    # median anchored per seed; the brightest few percent clip in the container
    key = 2.0 ** rng.uniform(-6.0, -1.0)
    scene = scene / np.median(scene) * key
    return np.clip(scene, 0.0, 1.0).astype(np.float32)


def bracketed_ramp(height: int = 64, width: int = 256, lo_stops: float = -13.0,
                   hi_stops: float = 1.3, tint=(1.0, 0.8, 0.6), eased: bool = True) -> np.ndarray:
    """Tinted scene whose log-luminance rises monotonically left to right.

    With ``eased`` the stops follow a half-cosine in x, so more columns sit in
    the deep shadows and highlights. Mild vertical texture keeps contrast
    weights non-zero and the tint keeps saturation non-zero. The default
    range stays inside what EVs -2/0/+2 jointly encode in every channel.
    """
    t = np.linspace(0.0, 1.0, width)
    if eased:
        t = 0.5 - 0.5 * np.cos(np.pi * t)
    x = lo_stops + (hi_stops - lo_stops) * t
    y = np.arange(height)
    texture = 1.0 + 0.15 * np.sin(2 * np.pi * y / 8.0)
    lum = (2.0 ** x)[None, :] * texture[:, None]
    return (lum[..., None] * np.asarray(tint, dtype=np.float64)).astype(np.float32)


def write_hdr_corpus(out_dir: str, count: int = 20, size: int = 192, seed: int = 0) -> list:
    """Write ``count`` scenes as 16-bit linear PNGs named scene000.png, ..."""
    from .imgcore import save_image

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k in range(count):
        path = os.path.join(out_dir, f"scene{k:03d}.png")
        save_image(path, hdr_scene(seed + k, (size, size)), bits=16)
        paths.append(path)
    return paths
