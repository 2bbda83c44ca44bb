"""No-reference quality metrics and a uniform scorer interface."""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .brisque import BrisqueRegressor, brisque, brisque_features
from .external import (ScorerExitError, ScorerOutputError, ScorerTimeout, external_score,
                       set_parallel_limit)
from .niqe import NiqeModel, NoValidPatches, fit_niqe_model, niqe, niqe_features
from .nss import fit_aggd, mscn
from .score import HIGHER_BETTER, LOWER_BETTER, IqaScore, ScorerError

__all__ = [
    "BrisqueRegressor", "ExternalScorer", "HIGHER_BETTER", "IqaScore", "LOWER_BETTER",
    "NiqeModel", "NiqeScorer", "BrisqueScorer", "NoValidPatches", "ScorerError",
    "ScorerExitError", "ScorerOutputError", "ScorerTimeout", "brisque", "brisque_features",
    "default_niqe_model", "external_score", "fit_aggd", "fit_niqe_model", "make_scorer",
    "mscn", "niqe", "niqe_features", "set_parallel_limit",
]


def default_niqe_model() -> NiqeModel:
    """Bundled pristine model fitted on scikit-image sample photographs."""
    ref = resources.files("mefdata.data").joinpath("niqe_default.txt")
    with resources.as_file(ref) as path:
        return NiqeModel.load(path)


@dataclass(frozen=True)
class NiqeScorer:
    model: NiqeModel
    name: str = "niqe"
    polarity: str = LOWER_BETTER

    def __call__(self, img: np.ndarray) -> IqaScore:
        try:
            return niqe(img, self.model)
        except ValueError as exc:
            raise ScorerError(f"niqe: {exc}") from exc


@dataclass(frozen=True)
class BrisqueScorer:
    regressor: BrisqueRegressor
    name: str = "brisque"
    polarity: str = LOWER_BETTER

    def __call__(self, img: np.ndarray) -> IqaScore:
        try:
            return brisque(img, self.regressor)
        except ValueError as exc:
            raise ScorerError(f"brisque: {exc}") from exc


@dataclass(frozen=True)
class ExternalScorer:
    command: tuple
    name: str = "ext"
    polarity: str = HIGHER_BETTER
    timeout: float = 60.0

    def __call__(self, img: np.ndarray) -> IqaScore:
        return external_score(img, self.command, self.name, self.polarity, self.timeout)


def make_scorer(spec: str, niqe_model: NiqeModel | str | None = None,
                brisque_model: BrisqueRegressor | str | None = None,
                ext_polarity: str = HIGHER_BETTER, timeout: float = 60.0):
    """Build a scorer from ``"niqe"``, ``"brisque"`` or ``"ext:<command line>"``."""
    spec = spec.strip()
    if spec == "niqe":
        if niqe_model is None:
            niqe_model = default_niqe_model()
        elif not isinstance(niqe_model, NiqeModel):
            niqe_model = NiqeModel.load(niqe_model)
        return NiqeScorer(niqe_model)
    if spec == "brisque":
        if brisque_model is None:
            brisque_model = BrisqueRegressor.default()
        elif not isinstance(brisque_model, BrisqueRegressor):
            brisque_model = BrisqueRegressor.load(brisque_model)
        return BrisqueScorer(brisque_model)
    if spec.startswith("ext:"):
        argv = shlex.split(spec[4:])
        if not argv:
            raise ValueError("ext: scorer needs a command")
        return ExternalScorer(tuple(argv), "ext", ext_polarity, timeout)
    raise ValueError(f"unknown metric {spec!r} (expected niqe, brisque or ext:<command>)")
