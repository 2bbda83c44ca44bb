"""BRISQUE-style whole-image NSS features with a loadable linear regressor."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .external import run_scorer_command
from .nss import aggd_features, half_scale, mscn, to_gray255
from .score import IqaScore, LOWER_BETTER

N_FEATURES = 36
REGRESSOR_HEADER = "brisque-linear v1"


def brisque_features(img: np.ndarray) -> np.ndarray:
    """18 NSS features at native and half resolution, no patch gating."""
    gray = to_gray255(img)
    return np.concatenate([aggd_features(mscn(gray)), aggd_features(mscn(half_scale(gray)))])


@dataclass(frozen=True)
class BrisqueRegressor:
    """Maps 36 features to a lower-is-better score.

    ``kind="linear"``: features are min/max scaled to [-1, 1] per entry, then
    ``bias + coefficients @ scaled``. ``kind="external"``: the features are
    written to a text file whose path is appended to ``command``; the command
    prints the score.
    """

    kind: str = "linear"
    coefficients: np.ndarray | None = None
    bias: float = 0.0
    ranges: np.ndarray | None = None  # (36, 2) min/max
    command: tuple = ()
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind == "linear":
            coef = np.asarray(self.coefficients, dtype=np.float64)
            ranges = np.asarray(self.ranges, dtype=np.float64)
            if coef.shape != (N_FEATURES,):
                raise ValueError(f"expected {N_FEATURES} coefficients, got {coef.size}")
            if ranges.shape != (N_FEATURES, 2):
                raise ValueError(f"expected {N_FEATURES} (min, max) pairs")
            object.__setattr__(self, "coefficients", coef)
            object.__setattr__(self, "ranges", ranges)
        elif self.kind == "external":
            if not self.command:
                raise ValueError("external regressor needs a command")
        else:
            raise ValueError(f"unknown regressor kind {self.kind!r}")

    def scale(self, feats: np.ndarray) -> np.ndarray:
        lo, hi = self.ranges[:, 0], self.ranges[:, 1]
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, 2.0 * (feats - lo) / safe - 1.0, 0.0)

    def predict(self, feats: np.ndarray) -> float:
        feats = np.asarray(feats, dtype=np.float64)
        if feats.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {feats.shape}")
        if self.kind == "linear":
            return float(self.bias + self.coefficients @ self.scale(feats))
        fd, path = tempfile.mkstemp(suffix=".txt", prefix="brisque_feats_")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(" ".join(repr(float(v)) for v in feats) + "\n")
            return run_scorer_command(list(self.command), path, self.timeout)
        finally:
            os.unlink(path)

    def save(self, path) -> None:
        if self.kind != "linear":
            raise ValueError("only linear regressors have a file form")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(REGRESSOR_HEADER + "\n")
            fh.write(" ".join(repr(float(v)) for v in [*self.coefficients, self.bias]) + "\n")
            for lo, hi in self.ranges:
                fh.write(f"{float(lo)!r} {float(hi)!r}\n")

    @classmethod
    def load(cls, path) -> "BrisqueRegressor":
        path = os.fspath(path)
        if not os.path.isfile(path):
            raise FileNotFoundError(f"{path}: missing regressor file")
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or lines[0] != REGRESSOR_HEADER:
            raise ValueError(f"{path}: not a BRISQUE regressor (missing '{REGRESSOR_HEADER}' header)")
        if len(lines) != 2 + N_FEATURES:
            raise ValueError(f"{path}: expected {2 + N_FEATURES} lines, got {len(lines)}")
        head = np.array(lines[1].split(), dtype=np.float64)
        if head.size != N_FEATURES + 1:
            raise ValueError(f"{path}: expected {N_FEATURES} coefficients + bias, got {head.size} values")
        ranges = np.array([ln.split() for ln in lines[2:]], dtype=np.float64)
        return cls("linear", head[:-1], float(head[-1]), ranges)

    @classmethod
    def default(cls) -> "BrisqueRegressor":
        """Bundled linear regressor (ranking use only, not calibrated to DMOS)."""
        ref = resources.files("mefdata.data").joinpath("brisque_linear.txt")
        with resources.as_file(ref) as path:
            return cls.load(path)


def brisque(img: np.ndarray, reg: BrisqueRegressor) -> IqaScore:
    return IqaScore("brisque", reg.predict(brisque_features(img)), LOWER_BETTER)
