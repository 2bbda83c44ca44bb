"""End-to-end dataset generation over a directory of source images.

Stages: render a stack per source, calibrate engine win counts over all
stacks, then per source generate/score/select/gate candidates and write the
training pairs. All randomness comes from the global seed (calibration) or
from ``derive_seed(seed, source_id)`` (per source), so results do not depend
on the number of workers.
"""

from __future__ import annotations

import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dataset
from .config import PipelineConfig
from .ensemble import (Calibration, calibrate_engine_scores, derive_seed, generate_candidates,
                       quality_gate, select_pseudo_gt)
from .exposure import ExposureStack, render_mes, synthesize_mes
from .imgcore import ImageIOError, load_image, load_srgb, srgb_encode
from .iqa import make_scorer, set_parallel_limit
from .iqa.score import ScorerError

log = logging.getLogger(__name__)

MANIFEST = "manifest.jsonl"
REJECTIONS = "rejected.txt"
FAILURES = "failed.txt"
CONFIG_SNAPSHOT = "config.txt"
STATS_TXT = "stats.txt"
STATS_CSV = "stats.csv"


@dataclass
class SourceOutcome:
    source_id: str
    records: list = field(default_factory=list)
    rejection: tuple | None = None  # (reason, score)
    error: str | None = None


@dataclass
class RunSummary:
    sources: int
    records: int
    rejected: int
    failed: int
    calibration: Calibration
    stats: dataset.CorpusStats


def source_id_for(path: str) -> str:
    stem = os.path.splitext(os.path.basename(path))[0]
    return re.sub(r"[^A-Za-z0-9._-]", "_", stem)


def list_sources(in_dir: str) -> list:
    if os.path.isfile(in_dir):
        return [in_dir]
    if not os.path.isdir(in_dir):
        raise FileNotFoundError(f"{in_dir}: no such file or directory")
    return sorted(os.path.join(in_dir, n) for n in os.listdir(in_dir) if n.lower().endswith(".png"))


def build_stack(path: str, cfg: PipelineConfig) -> ExposureStack:
    sid = source_id_for(path)
    if cfg.from_srgb:
        try:
            img = load_srgb(path)
        except ImageIOError:
            img = srgb_encode(load_image(path))
        return synthesize_mes(img, cfg.targets, sid)
    return render_mes(load_image(path), cfg.evs, sid)


def make_scorers(cfg: PipelineConfig):
    kw = dict(niqe_model=cfg.niqe_model, brisque_model=cfg.brisque_model,
              ext_polarity=cfg.ext_polarity, timeout=cfg.scorer_timeout)
    metrics = [make_scorer(m, **kw) for m in cfg.ensemble.metrics]
    quality = make_scorer(cfg.ensemble.quality_metric, **kw) if cfg.ensemble.quality_metric else None
    return metrics, quality


def _init_worker(limit: int) -> None:
    set_parallel_limit(limit)


def _build_stack_job(args):
    path, cfg = args
    try:
        return build_stack(path, cfg), None
    except (OSError, ValueError) as exc:
        return None, str(exc)


def process_source(stack: ExposureStack, calib: Calibration, cfg: PipelineConfig,
                   out_dir: str, metrics=None, quality=None) -> SourceOutcome:
    """Candidates, selection, gate and record emission for one stack."""
    if metrics is None:
        metrics, quality = make_scorers(cfg)
    seed = derive_seed(cfg.ensemble.rng_seed, stack.source_id)
    rng = np.random.default_rng(seed)
    out = SourceOutcome(stack.source_id)
    try:
        pool = generate_candidates(stack, calib, cfg.ensemble, rng, cfg.fusion)
        winner = select_pseudo_gt(pool, metrics)
    except (ScorerError, ValueError) as exc:
        out.rejection = (str(exc), None)
        return out
    gate = quality_gate(winner, quality, cfg.ensemble.quality_threshold)
    if not gate.keep:
        out.rejection = (gate.reason, gate.score)
        return out
    try:
        dataset.write_stack(stack, out_dir, "mes")
        out.records = dataset.emit_records(stack, winner, out_dir, cfg.pairing, rng, seed)
    except OSError as exc:
        out.error = str(exc)
    return out


def _process_job(args):
    stack, calib, cfg, out_dir = args
    return process_source(stack, calib, cfg, out_dir)


def _calibration_scorer(cfg: PipelineConfig):
    metrics, _ = make_scorers(cfg)
    return metrics[0]


def run_pipeline(in_dir: str, out_dir: str, cfg: PipelineConfig, workers: int = 1) -> RunSummary:
    paths = list_sources(in_dir)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, CONFIG_SNAPSHOT), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    set_parallel_limit(cfg.scorer_limit)

    executor = None
    if workers > 1:
        executor = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                       initargs=(cfg.scorer_limit,))
    mapper = executor.map if executor else map
    try:
        built = list(mapper(_build_stack_job, [(p, cfg) for p in paths]))
        stacks, failures = [], []
        for p, (stack, err) in zip(paths, built):
            if stack is None:
                failures.append((source_id_for(p), err))
                log.error("%s: %s", p, err)
            else:
                stacks.append(stack)

        if stacks and cfg.ensemble.calibration_groups:
            calib = calibrate_engine_scores(stacks, cfg.ensemble, _calibration_scorer(cfg),
                                            cfg.fusion, map_fn=mapper)
        else:
            calib = Calibration({e: 0 for e in cfg.ensemble.engines})
        log.info("calibration win counts: %s", calib.counts)

        outcomes = list(mapper(_process_job, [(s, calib, cfg, out_dir) for s in stacks]))
    finally:
        if executor:
            executor.shutdown()

    records, rejections = [], []
    for o in outcomes:
        if o.error:
            failures.append((o.source_id, o.error))
        elif o.rejection:
            rejections.append((o.source_id, *o.rejection))
        else:
            records.extend(o.records)

    dataset.write_manifest(records, os.path.join(out_dir, MANIFEST))
    with open(os.path.join(out_dir, REJECTIONS), "w", encoding="utf-8") as fh:
        for sid, reason, score in rejections:
            fh.write(f"{sid}\t{reason}\t{'' if score is None else repr(float(score))}\n")
    with open(os.path.join(out_dir, FAILURES), "w", encoding="utf-8") as fh:
        for sid, err in failures:
            fh.write(f"{sid}\t{err}\n")
    stats = dataset.corpus_stats(records, out_dir, rejected=len(rejections))
    with open(os.path.join(out_dir, STATS_TXT), "w", encoding="utf-8") as fh:
        fh.write(stats.table() + "\n")
    with open(os.path.join(out_dir, STATS_CSV), "w", encoding="utf-8") as fh:
        fh.write(stats.to_csv())
    return RunSummary(len(paths), len(records), len(rejections), len(failures), calib, stats)
