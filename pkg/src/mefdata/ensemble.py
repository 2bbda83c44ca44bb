"""Ensemble pseudo-ground-truth generation.

For each source stack: pick an under/normal/over-exposed triplet, fuse it with
every engine, add random blends of the engine results weighted by how often
each engine won a calibration run, rank the pool with the configured
metrics, keep the best, then apply a quality threshold.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exposure import ExposureStack
from .fusion import FusionCandidate, FusionConfig, run_engine
from .imgcore import srgb_decode, srgb_encode
from .iqa.score import HIGHER_BETTER, IqaScore, ScorerError

log = logging.getLogger(__name__)

ZERO_EV_TOL = 0.25


@dataclass(frozen=True)
class EnsembleConfig:
    engines: tuple = ("mertens", "gradient", "flat-weighted")
    metrics: tuple = ("niqe",)
    n_blends: int = 10
    blend_pick: int = 3
    calibration_groups: int = 1000
    rng_seed: int = 0
    quality_metric: str | None = None
    quality_threshold: float = 0.5

    def __post_init__(self):
        if not self.engines:
            raise ValueError("at least one engine is required")
        if len(set(self.engines)) != len(self.engines):
            raise ValueError("engine names must be unique")
        if not self.metrics:
            raise ValueError("at least one metric is required")
        if self.n_blends < 0:
            raise ValueError("n_blends must be >= 0")
        if self.n_blends and not 1 <= self.blend_pick <= len(self.engines):
            raise ValueError("blend_pick must be between 1 and the engine count")
        if self.calibration_groups < 0:
            raise ValueError("calibration_groups must be >= 0")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class GateDecision:
    keep: bool
    reason: str = ""
    score: float | None = None


@dataclass
class Calibration:
    counts: dict
    groups: int = 0
    failures: list = field(default_factory=list)


def derive_seed(global_seed: int, source_id: str) -> int:
    """64-bit per-source seed, independent of processing order."""
    digest = hashlib.sha256(f"{int(global_seed)}:{source_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def ev_class(ev: float) -> int:
    if abs(ev) < ZERO_EV_TOL:
        return 0
    return -1 if ev < 0 else 1


def pick_triplet(stack: ExposureStack, rng: np.random.Generator) -> ExposureStack:
    """One frame each with EV < 0, EV ~ 0 and EV > 0, sampled uniformly per class."""
    classes = {-1: [], 0: [], 1: []}
    for j, ev in enumerate(stack.evs):
        classes[ev_class(ev)].append(j)
    if not all(classes.values()):
        raise ValueError("stack lacks EV sign coverage")
    idx = [classes[c][int(rng.integers(len(classes[c])))] for c in (-1, 0, 1)]
    return stack.subset(idx)


def _winner(scores: Sequence[IqaScore]) -> int:
    # ties go to the earlier engine in the configured list
    return min(range(len(scores)), key=lambda k: (scores[k].badness, k))


def calibration_group(triplet: ExposureStack, engines: Sequence[str], scorer: Callable,
                      fusion_cfg: FusionConfig = FusionConfig()) -> str:
    """Fuse one triplet with every engine; returns the winner on ``scorer``."""
    scores = [scorer(run_engine(triplet, e, fusion_cfg).image) for e in engines]
    return engines[_winner(scores)]


def calibrate_engine_scores(stacks: Sequence[ExposureStack], cfg: EnsembleConfig,
                            scorer: Callable, fusion_cfg: FusionConfig = FusionConfig(),
                            map_fn: Callable = map) -> Calibration:
    """Count how often each engine ranks first on the primary metric.

    Group ``g`` samples its stack and triplet from a generator seeded with
    (global seed, g), so ``map_fn`` may evaluate groups in any order or in
    parallel. Failed groups are skipped and reported.
    """
    if not stacks:
        raise ValueError("calibration needs at least one stack")
    engines = list(cfg.engines)
    counts = {e: 0 for e in engines}
    failures = []
    jobs = []
    for g in range(cfg.calibration_groups):
        rng = np.random.default_rng([cfg.rng_seed, 0xCA11B, g])
        stack = stacks[int(rng.integers(len(stacks)))]
        try:
            jobs.append((g, pick_triplet(stack, rng)))
        except ValueError as exc:
            failures.append((g, str(exc)))
    outcomes = map_fn(_safe_group, [(t, engines, scorer, fusion_cfg) for _, t in jobs])
    for (g, _), (winner, error) in zip(jobs, outcomes):
        if error is not None:
            failures.append((g, error))
        else:
            counts[winner] += 1
    failures.sort()
    for g, error in failures:
        log.warning("calibration group %d skipped: %s", g, error)
    return Calibration(counts, cfg.calibration_groups - len(failures), failures)


def _safe_group(args):
    try:
        return calibration_group(*args), None
    except (ScorerError, ValueError) as exc:
        return None, str(exc)


def blend_weights(counts: Sequence[float]) -> np.ndarray:
    """Weights proportional to win counts, summing to 1; uniform if all are zero."""
    c = np.asarray(counts, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("win counts must be non-negative")
    total = c.sum()
    if total <= 0:
        return np.full(c.size, 1.0 / c.size)
    return c / total


def blend_images(images: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Pixel-wise weighted sum in linear light, re-encoded to 8 bits."""
    acc = np.zeros(images[0].shape, dtype=np.float64)
    for img, w in zip(images, weights):
        acc += w * srgb_decode(img)
    return srgb_encode(np.clip(acc, 0.0, 1.0).astype(np.float32))


def generate_candidates(stack: ExposureStack, calib: Calibration | dict, cfg: EnsembleConfig,
                        rng: np.random.Generator,
                        fusion_cfg: FusionConfig = FusionConfig()) -> list:
    """Engine results on one sampled triplet plus ``n_blends`` weighted blends of them."""
    counts = calib.counts if isinstance(calib, Calibration) else calib
    engines = list(cfg.engines)
    triplet = pick_triplet(stack, rng)
    pool = []
    for e in engines:
        cand = run_engine(triplet, e, fusion_cfg)
        cand.meta["id"] = e
        pool.append(cand)
    base = list(pool)
    for b in range(cfg.n_blends):
        picked = sorted(int(k) for k in rng.choice(len(engines), cfg.blend_pick, replace=False))
        w = blend_weights([counts.get(engines[k], 0) for k in picked])
        keep = [(k, float(wk)) for k, wk in zip(picked, w) if wk > 0]
        image = blend_images([base[k].image for k, _ in keep], [wk for _, wk in keep])
        prov = [(engines[k], wk) for k, wk in keep]
        meta = {"id": f"blend{b}", "evs": list(triplet.evs), "source_id": stack.source_id}
        pool.append(FusionCandidate(image, prov, meta=meta))
    return pool


def score_candidates(candidates: Sequence[FusionCandidate], scorers: Sequence[Callable]) -> list:
    """Fill ``scores`` for every candidate; returns indices that failed, with reasons.

    Identical images are scored once.
    """
    cache = {}
    failed = []
    for i, cand in enumerate(candidates):
        key = cand.image.tobytes()
        for scorer in scorers:
            if scorer.name in cand.scores:
                continue
            memo = cache.setdefault(scorer.name, {})
            try:
                if key not in memo:
                    memo[key] = scorer(cand.image)
                cand.scores[scorer.name] = memo[key]
            except (ScorerError, ValueError) as exc:
                failed.append((i, f"{scorer.name}: {exc}"))
                break
    return failed


def _competition_ranks(keys: Sequence[float]) -> list:
    return [1 + sum(1 for other in keys if other < k) for k in keys]


def select_pseudo_gt(candidates: Sequence[FusionCandidate], metrics: Sequence[Callable]) -> FusionCandidate:
    """Best candidate by mean per-metric rank.

    Rank 1 is best under each metric's polarity; tied ranks share the lowest
    value. Mean-rank ties go to the better raw score on the first metric, then
    the lower candidate index.
    """
    if not candidates:
        raise ValueError("no candidates")
    failed = dict(score_candidates(candidates, metrics))
    for i, reason in failed.items():
        log.warning("candidate %d excluded: %s", i, reason)
    ok = [i for i in range(len(candidates)) if i not in failed]
    if not ok:
        raise ScorerError("no scorable candidates")
    names = [m.name for m in metrics]
    for name in names:
        keys = [candidates[i].scores[name].badness for i in ok]
        for i, r in zip(ok, _competition_ranks(keys)):
            candidates[i].rank_stats[name] = r
    for i in ok:
        c = candidates[i]
        c.rank_stats["mean"] = float(np.mean([c.rank_stats[n] for n in names]))
    best = min(ok, key=lambda i: (candidates[i].rank_stats["mean"],
                                  candidates[i].scores[names[0]].badness, i))
    return candidates[best]


def quality_gate(candidate: FusionCandidate, scorer: Callable | None,
                 threshold: float = 0.5) -> GateDecision:
    """Keep unless the score is on the wrong side of ``threshold`` (boundary keeps)."""
    if scorer is None:
        decision = GateDecision(True, "no quality metric configured")
    else:
        try:
            score = candidate.scores.get(scorer.name) or scorer(candidate.image)
            candidate.scores[scorer.name] = score
        except (ScorerError, ValueError) as exc:
            log.warning("quality scorer failed: %s", exc)
            decision = GateDecision(False, "quality scorer unavailable")
        else:
            if score.polarity == HIGHER_BETTER:
                bad = score.value < threshold
            else:
                bad = score.value > threshold
            reason = (f"{score.metric} {score.value:g} fails threshold {threshold:g}" if bad else "")
            decision = GateDecision(not bad, reason, score.value)
    candidate.meta["gate"] = decision
    return decision
