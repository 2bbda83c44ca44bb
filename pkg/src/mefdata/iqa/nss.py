"""Natural-scene statistics shared by NIQE and BRISQUE.

MSCN coefficients and asymmetric generalized Gaussian (AGGD) moment fits.
Gray inputs to :func:`mscn` are expected on the 0-255 scale, which is what
the +1 stabilizer in the divisor is tuned for.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate, maximum_filter, minimum_filter
from scipy.special import gamma

KERNEL_SIZE = 7
KERNEL_SIGMA = 7.0 / 6.0
MIN_MSCN_SIZE = 16
MIN_AGGD_SAMPLES = 100

ALPHA_GRID = np.round(np.arange(0.2, 10.0 + 5e-4, 1e-3), 3)
_R_GRID = gamma(2.0 / ALPHA_GRID) ** 2 / (gamma(1.0 / ALPHA_GRID) * gamma(3.0 / ALPHA_GRID))

# (dy, dx) neighbour offsets: horizontal, vertical, main diagonal, anti-diagonal
PAIR_SHIFTS = ((0, 1), (1, 0), (1, 1), (1, -1))


def gaussian_window(size: int = KERNEL_SIZE, sigma: float = KERNEL_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = gaussian_window()


def local_stats(img: np.ndarray):
    """Gaussian-weighted local mean and standard deviation (edges clamped)."""
    x = np.asarray(img, dtype=np.float64)
    mu = correlate(x, _WINDOW, mode="nearest")
    var = correlate(x * x, _WINDOW, mode="nearest") - mu * mu
    # flat neighbourhoods are exact: mean is the value itself, deviation zero
    size = _WINDOW.shape[0]
    flat = maximum_filter(x, size, mode="nearest") == minimum_filter(x, size, mode="nearest")
    mu = np.where(flat, x, mu)
    var = np.where(flat, 0.0, var)
    return mu, np.sqrt(np.maximum(var, 0.0))


def mscn(img: np.ndarray) -> np.ndarray:
    x = np.asarray(img, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"mscn expects a 2-D gray image, got shape {x.shape}")
    if min(x.shape) < MIN_MSCN_SIZE:
        raise ValueError(f"image too small for MSCN: {x.shape}, need >= {MIN_MSCN_SIZE}")
    mu, sigma = local_stats(x)
    return (x - mu) / (sigma + 1.0)


def fit_aggd(samples):
    """Moment-matching AGGD fit; returns (alpha, sigma_left, sigma_right).

    ``alpha`` is the nearest grid value in [0.2, 10] (step 1e-3) whose
    generalized-Gaussian ratio matches the bias-corrected sample ratio.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_AGGD_SAMPLES:
        raise ValueError(f"need at least {MIN_AGGD_SAMPLES} samples, got {x.size}")
    left = x[x < 0]
    right = x[x > 0]
    if left.size == 0 or right.size == 0 or np.ptp(x) == 0:
        raise ValueError("insufficient variance")
    sigma_l = np.sqrt(np.mean(left ** 2))
    sigma_r = np.sqrt(np.mean(right ** 2))
    g = sigma_l / sigma_r
    r_hat = np.mean(np.abs(x)) ** 2 / np.mean(x ** 2)
    r_norm = r_hat * (g ** 3 + 1.0) * (g + 1.0) / (g ** 2 + 1.0) ** 2
    alpha = float(ALPHA_GRID[np.argmin((_R_GRID - r_norm) ** 2)])
    return alpha, float(sigma_l), float(sigma_r)


def aggd_features(coeffs: np.ndarray) -> np.ndarray:
    """18 NSS features of one MSCN field: shape + scale, then 4 per neighbour product."""
    alpha, sl, sr = fit_aggd(coeffs)
    scale = np.sqrt(gamma(1.0 / alpha) / gamma(3.0 / alpha))
    feats = [alpha, (sl * scale + sr * scale) / 2.0]
    h, w = coeffs.shape
    for dy, dx in PAIR_SHIFTS:
        x0, x1 = max(0, -dx), w - max(0, dx)
        a = coeffs[0:h - dy, x0:x1]
        b = coeffs[dy:h, x0 + dx:x1 + dx]
        alpha, sl, sr = fit_aggd(a * b)
        scale = np.sqrt(gamma(1.0 / alpha) / gamma(3.0 / alpha))
        bl, br = sl * scale, sr * scale
        mean = (br - bl) * gamma(2.0 / alpha) / gamma(1.0 / alpha)
        feats.extend([alpha, mean, bl, br])
    return np.array(feats, dtype=np.float64)


def half_scale(gray: np.ndarray) -> np.ndarray:
    """2x downsample by 2x2 box averaging (odd trailing row/column dropped)."""
    h, w = (gray.shape[0] // 2) * 2, (gray.shape[1] // 2) * 2
    x = np.asarray(gray, dtype=np.float64)[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def to_gray255(img: np.ndarray) -> np.ndarray:
    """Gray on the 0-255 scale from an sRGB uint8 image or a [0, 1] gray image."""
    from ..imgcore import luminance

    img = np.asarray(img)
    if img.ndim == 3:
        return luminance(img).astype(np.float64) * 255.0
    if img.dtype == np.uint8:
        return img.astype(np.float64)
    return np.asarray(img, dtype=np.float64) * 255.0
