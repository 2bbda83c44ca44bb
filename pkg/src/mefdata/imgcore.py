"""Pixel buffers, sRGB transfer curve, luminance and PNG I/O.

Images are plain numpy arrays with a dtype convention:

* linear-light RGB: ``float32`` array of shape (H, W, 3), values finite and >= 0
* 8-bit sRGB: ``uint8`` array of shape (H, W, 3)
* gray: ``float32`` array of shape (H, W), values in [0, 1]
"""

from __future__ import annotations

import os

import cv2
import numpy as np

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722], dtype=np.float64)


class ImageIOError(OSError):
    """Raised when an image file cannot be read or written."""


def _require_rgb(img: np.ndarray, what: str) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"{what} must have shape (H, W, 3), got {img.shape}")


def check_linear(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    _require_rgb(img, "linear image")
    if not np.issubdtype(img.dtype, np.floating):
        raise TypeError(f"linear image must be floating point, got {img.dtype}")
    if not np.all(np.isfinite(img)) or np.any(img < 0):
        raise ValueError("linear image values must be finite and >= 0")
    return img


def check_srgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    _require_rgb(img, "sRGB image")
    if img.dtype != np.uint8:
        raise TypeError(f"sRGB image must be uint8, got {img.dtype}")
    return img


def encode_curve(v: np.ndarray) -> np.ndarray:
    """sRGB opto-electronic transfer on values already clipped to [0, 1]."""
    v = np.asarray(v, dtype=np.float64)
    low = v * 12.92
    high = 1.055 * np.power(np.maximum(v, 0.0031308), 1.0 / 2.4) - 0.055
    return np.where(v <= 0.0031308, low, high)


def decode_curve(e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    low = e / 12.92
    high = np.power((np.maximum(e, 0.04045) + 0.055) / 1.055, 2.4)
    return np.where(e <= 0.04045, low, high)


def srgb_encode(img: np.ndarray) -> np.ndarray:
    """Clip linear RGB to [0, 1], apply the sRGB curve and quantize to 8 bits."""
    img = check_linear(img)
    v = encode_curve(np.clip(img, 0.0, 1.0))
    return np.rint(v * 255.0).astype(np.uint8)


# exact inverse lookup for every code; float32 is the storage precision of
# linear images, and each entry still encodes back to its own code
_DECODE_LUT = decode_curve(np.arange(256) / 255.0).astype(np.float32)


def srgb_decode(img: np.ndarray) -> np.ndarray:
    img = check_srgb(img)
    return _DECODE_LUT[img]


def luminance(img: np.ndarray) -> np.ndarray:
    """Rec. 709 luminance of an sRGB (uint8) or linear (float) image.

    uint8 input is normalized by 255; float input is clipped to [0, 1].
    """
    img = np.asarray(img)
    _require_rgb(img, "image")
    if img.dtype == np.uint8:
        v = img.astype(np.float64) / 255.0
    else:
        v = np.clip(img.astype(np.float64), 0.0, 1.0)
    y = v @ LUMA_WEIGHTS
    return np.clip(y, 0.0, 1.0).astype(np.float32)


def mean_intensity(img: np.ndarray) -> float:
    img = check_srgb(img)
    if img.size == 0:
        raise ValueError("empty input")
    return float(img.mean(dtype=np.float64) / 255.0)


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Read an RGB PNG as a linear float32 image.

    8-bit files are sRGB-decoded; 16-bit files are taken as linear values / 65535.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ImageIOError(f"{path}: unreadable file (no such file)")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"{path}: unreadable file (not a decodable image)")
    channels = 1 if raw.ndim == 2 else raw.shape[2]
    if channels != 3:
        raise ImageIOError(f"{path}: unsupported channel count {channels}")
    rgb = raw[:, :, ::-1]
    if raw.dtype == np.uint8:
        return srgb_decode(np.ascontiguousarray(rgb))
    if raw.dtype == np.uint16:
        return (rgb.astype(np.float32) / np.float32(65535.0))
    raise ImageIOError(f"{path}: unsupported bit depth ({raw.dtype})")


def load_srgb(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit RGB PNG without decoding."""
    path = os.fspath(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED) if os.path.isfile(path) else None
    if raw is None:
        raise ImageIOError(f"{path}: unreadable file")
    channels = 1 if raw.ndim == 2 else raw.shape[2]
    if channels != 3:
        raise ImageIOError(f"{path}: unsupported channel count {channels}")
    if raw.dtype != np.uint8:
        raise ImageIOError(f"{path}: unsupported bit depth ({raw.dtype}), expected 8-bit")
    return np.ascontiguousarray(raw[:, :, ::-1])


def save_image(path: str | os.PathLike, img: np.ndarray, bits: int | None = None) -> None:
    """Write an RGB PNG.

    uint8 arrays are written as-is (8-bit sRGB codes). Float arrays are linear:
    with ``bits=16`` (default for floats) they are stored as round(v * 65535),
    with ``bits=8`` they are sRGB-encoded first.
    """
    path = os.fspath(path)
    img = np.asarray(img)
    _require_rgb(img, "image")
    if img.dtype == np.uint8:
        if bits not in (None, 8):
            raise ValueError("uint8 images can only be written as 8-bit")
        out = img
    elif img.dtype == np.uint16:
        out = img
    else:
        check_linear(img)
        if bits == 8:
            out = srgb_encode(img)
        elif bits in (None, 16):
            out = np.rint(np.clip(img.astype(np.float64), 0.0, 1.0) * 65535.0).astype(np.uint16)
        else:
            raise ValueError(f"unsupported bit depth {bits}")
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    if not cv2.imwrite(path, np.ascontiguousarray(out[:, :, ::-1])):
        raise ImageIOError(f"{path}: write failed")
