"""NIQE: distance between a test image's NSS statistics and a pristine model."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .nss import aggd_features, half_scale, local_stats, mscn, to_gray255
from .score import IqaScore, LOWER_BETTER

log = logging.getLogger(__name__)

N_FEATURES = 36
MODEL_HEADER = "niqe-model v1"


class NoValidPatches(ValueError):
    pass


@dataclass(frozen=True)
class NiqeModel:
    feature_mean: np.ndarray
    feature_cov: np.ndarray
    patch_size: int = 96
    sharpness_fraction: float = 0.75

    def __post_init__(self):
        mean = np.asarray(self.feature_mean, dtype=np.float64)
        cov = np.asarray(self.feature_cov, dtype=np.float64)
        if mean.shape != (N_FEATURES,) or cov.shape != (N_FEATURES, N_FEATURES):
            raise ValueError(f"model must hold a {N_FEATURES}-vector and a "
                             f"{N_FEATURES}x{N_FEATURES} matrix")
        if not np.allclose(cov, cov.T, atol=1e-9, rtol=0):
            raise ValueError("covariance must be symmetric")
        if self.patch_size < 2 or self.patch_size % 2:
            raise ValueError("patch_size must be an even number >= 2")
        if not 0.0 < self.sharpness_fraction <= 1.0:
            raise ValueError("sharpness_fraction must lie in (0, 1]")
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_cov", cov)

    def save(self, path) -> None:
        fmt = lambda row: " ".join(repr(float(v)) for v in row)
        lines = [MODEL_HEADER, f"{self.patch_size} {self.sharpness_fraction!r}",
                 fmt(self.feature_mean)]
        lines += [fmt(row) for row in self.feature_cov]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "NiqeModel":
        path = os.fspath(path)
        try:
            with open(path, encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh if ln.strip()]
        except OSError as exc:
            raise OSError(f"{path}: cannot read NIQE model ({exc.strerror})") from exc
        if not lines or lines[0] != MODEL_HEADER:
            raise ValueError(f"{path}: not a NIQE model file (missing '{MODEL_HEADER}' header)")
        if len(lines) != 3 + N_FEATURES:
            raise ValueError(f"{path}: expected {3 + N_FEATURES} lines, got {len(lines)}")
        patch, frac = lines[1].split()
        mean = np.array(lines[2].split(), dtype=np.float64)
        cov = np.array([ln.split() for ln in lines[3:]], dtype=np.float64)
        return cls(mean, cov, int(patch), float(frac))


def _patch_grid(shape, patch: int):
    rows, cols = shape[0] // patch, shape[1] // patch
    return [(i, j) for i in range(rows) for j in range(cols)]


def niqe_features(img: np.ndarray, patch_size: int = 96,
                  sharpness_fraction: float | None = None) -> np.ndarray:
    """Per-patch 36-dim NSS features, shape (n_patches, 36).

    Patches tile the image without overlap; the same patches are taken at
    half resolution with half the patch size. Patches with zero mean local
    deviation (native scale) are always dropped. With ``sharpness_fraction``
    set, a patch must also reach that fraction of the sharpest patch's
    deviation; model fitting uses this, scoring does not.
    """
    gray = to_gray255(img)
    if gray.shape[0] < patch_size or gray.shape[1] < patch_size:
        raise ValueError(f"image {gray.shape} smaller than one {patch_size}px patch")
    grid = _patch_grid(gray.shape, patch_size)
    h, w = (gray.shape[0] // patch_size) * patch_size, (gray.shape[1] // patch_size) * patch_size
    gray = gray[:h, :w]
    small = half_scale(gray)
    coeffs = [mscn(gray), mscn(small)]
    _, sigma = local_stats(gray)

    p = patch_size
    sharp = np.array([sigma[i * p:(i + 1) * p, j * p:(j + 1) * p].mean() for i, j in grid])
    keep = sharp > 0
    if sharpness_fraction is not None:
        keep &= sharp >= sharpness_fraction * sharp.max()

    feats = []
    for (i, j), ok in zip(grid, keep):
        if not ok:
            continue
        row = []
        try:
            for scale, c in enumerate(coeffs):
                q = p >> scale
                row.append(aggd_features(c[i * q:(i + 1) * q, j * q:(j + 1) * q]))
        except ValueError:
            continue
        feats.append(np.concatenate(row))
    if not feats:
        raise NoValidPatches("no valid patches")
    return np.vstack(feats)


def _canonical_rows(feats: np.ndarray) -> np.ndarray:
    # sort rows so pooled statistics do not depend on input ordering
    return feats[np.lexsort(feats.T[::-1])]


def fit_niqe_model(corpus, patch_size: int = 96, sharpness_fraction: float = 0.75,
                   min_images: int = 10) -> NiqeModel:
    """Fit the pristine mean/covariance from pooled patch features of ``corpus``."""
    corpus = list(corpus)
    if len(corpus) < min_images:
        raise ValueError(f"need at least {min_images} images to fit a NIQE model, got {len(corpus)}")
    pooled = []
    for k, img in enumerate(corpus):
        try:
            pooled.append(niqe_features(img, patch_size, sharpness_fraction))
        except NoValidPatches:
            log.warning("corpus image %d has no valid patches; skipped", k)
    if not pooled:
        raise NoValidPatches("no valid patches in corpus")
    feats = _canonical_rows(np.vstack(pooled))
    mean = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False) if len(feats) > 1 else np.zeros((N_FEATURES, N_FEATURES))
    cov = 0.5 * (cov + cov.T)
    rank = np.linalg.matrix_rank(cov)
    if rank < N_FEATURES:
        log.warning("degenerate NIQE covariance (rank %d of %d from %d patches); "
                    "scores use the pseudo-inverse", rank, N_FEATURES, len(feats))
    return NiqeModel(mean, cov, patch_size, sharpness_fraction)


def niqe_distance(model: NiqeModel, feats: np.ndarray) -> float:
    feats = _canonical_rows(feats)
    mu = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False) if len(feats) > 1 else np.zeros_like(model.feature_cov)
    diff = model.feature_mean - mu
    pooled = (model.feature_cov + cov) / 2.0
    d2 = float(diff @ np.linalg.pinv(pooled, hermitian=True) @ diff)
    return float(np.sqrt(max(d2, 0.0)))


def niqe(img: np.ndarray, model: NiqeModel) -> IqaScore:
    feats = niqe_features(img, model.patch_size)
    return IqaScore("niqe", niqe_distance(model, feats), LOWER_BETTER)
