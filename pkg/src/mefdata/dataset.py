"""Dataset layout, JSON-lines manifests and corpus statistics.

Layout under ``out_dir``::

    mes/<source_id>/<source_id>_ev<+N.NN>.png    every frame of the stack
    input/<source_id>/<source_id>_ev<+N.NN>.png  frames paired with the GT
    gt/<source_id>/<source_id>_gt.png            selected pseudo-GT

Paths stored in records are relative to ``out_dir``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .exposure import ExposureStack
from .fusion import FusionCandidate
from .imgcore import load_srgb, mean_intensity, save_image

HIST_BINS = 64
QUANTILES = (5, 25, 50, 75, 95)
PAIRINGS = ("all-frames", "random-frame")


class ManifestError(ValueError):
    pass


@dataclass
class DatasetRecord:
    source_id: str
    input_path: str
    input_ev: float
    pseudo_gt_path: str
    scores: dict
    provenance: list
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_dict(cls, obj: dict) -> "DatasetRecord":
        names = [f.name for f in fields(cls)]
        if not isinstance(obj, dict) or sorted(obj) != sorted(names):
            raise ValueError(f"expected keys {names}")
        rec = cls(**obj)
        rec.provenance = [list(p) for p in rec.provenance]
        return rec


@dataclass
class CorpusStats:
    image_count: int = 0
    rejected_count: int = 0
    histogram: list = field(default_factory=lambda: [0] * HIST_BINS)
    score_quantiles: dict = field(default_factory=dict)

    def table(self) -> str:
        lines = [f"images      {self.image_count}", f"rejected    {self.rejected_count}",
                 f"hist bins   {sum(1 for c in self.histogram if c)}/{HIST_BINS} non-empty"]
        lines.append("mean-intensity histogram (bin lower edge: count)")
        for k, c in enumerate(self.histogram):
            if c:
                lines.append(f"  {k / HIST_BINS:.4f}  {c}")
        if self.score_quantiles:
            head = "metric".ljust(12) + "".join(f"p{q}".rjust(11) for q in QUANTILES)
            lines += ["score quantiles", head]
            for metric, qs in sorted(self.score_quantiles.items()):
                lines.append(metric.ljust(12) + "".join(f"{v:11.4f}" for v in qs))
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "key", "value"])
        w.writerow(["count", "images", self.image_count])
        w.writerow(["count", "rejected", self.rejected_count])
        for k, c in enumerate(self.histogram):
            w.writerow(["histogram", f"{k / HIST_BINS:.6f}", c])
        for metric, qs in sorted(self.score_quantiles.items()):
            for q, v in zip(QUANTILES, qs):
                w.writerow([f"quantile:{metric}", f"p{q}", repr(float(v))])
        return buf.getvalue()


def ev_tag(ev: float) -> str:
    return f"ev{ev:+.2f}"


def frame_name(source_id: str, ev: float) -> str:
    return f"{source_id}_{ev_tag(ev)}.png"


def write_stack(stack: ExposureStack, out_dir: str, kind: str = "mes") -> list:
    paths = []
    for frame, ev in zip(stack.frames, stack.evs):
        rel = os.path.join(kind, stack.source_id, frame_name(stack.source_id, ev))
        save_image(os.path.join(out_dir, rel), frame)
        paths.append(rel)
    return paths


def emit_records(stack: ExposureStack, pseudo_gt: FusionCandidate, out_dir: str,
                 pairing: str = "all-frames", rng: np.random.Generator | None = None,
                 seed: int = 0) -> list:
    """Write the pseudo-GT once and one input frame per record."""
    gate = pseudo_gt.meta.get("gate")
    if gate is None or not gate.keep:
        raise ValueError("pseudo-GT has not passed the quality gate")
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}")
    if pairing == "all-frames":
        chosen = list(range(len(stack)))
    else:
        if rng is None:
            raise ValueError("random-frame pairing needs an rng")
        chosen = [int(rng.integers(len(stack)))]
    sid = stack.source_id
    try:
        os.makedirs(out_dir, exist_ok=True)
        gt_rel = os.path.join("gt", sid, f"{sid}_gt.png")
        save_image(os.path.join(out_dir, gt_rel), pseudo_gt.image)
    except OSError as exc:
        raise OSError(f"{out_dir}: unwritable output directory ({exc})") from exc
    scores = {name: s.value for name, s in sorted(pseudo_gt.scores.items())}
    records = []
    for j in chosen:
        ev = float(stack.evs[j])
        rel = os.path.join("input", sid, frame_name(sid, ev))
        save_image(os.path.join(out_dir, rel), stack.frames[j])
        records.append(DatasetRecord(sid, rel, ev, gt_rel, dict(scores),
                                     [[name, w] for name, w in pseudo_gt.provenance], int(seed)))
    return records


def write_manifest(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_manifest(path) -> list:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        data = fh.read()
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines:
        # a final line without its newline was cut short
        raise ManifestError(f"{path}: line {len(lines)}: truncated record (no trailing newline)")
    for n, line in enumerate(lines, start=1):
        try:
            records.append(DatasetRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: line {n}: malformed record ({exc})") from exc
    return records


def corpus_stats(records, root: str = ".", rejected: int = 0) -> CorpusStats:
    """Histogram of input-frame mean intensities and per-metric score quantiles.

    ``image_count`` counts distinct sources; the histogram counts input frames.
    """
    stats = CorpusStats(rejected_count=rejected)
    if not records:
        return stats
    hist = np.zeros(HIST_BINS, dtype=np.int64)
    seen = {}
    for rec in records:
        if rec.input_path not in seen:
            seen[rec.input_path] = mean_intensity(load_srgb(os.path.join(root, rec.input_path)))
        m = seen[rec.input_path]
        hist[min(int(m * HIST_BINS), HIST_BINS - 1)] += 1
    stats.histogram = hist.tolist()
    stats.image_count = len({rec.source_id for rec in records})
    per_source = {}
    for rec in records:
        per_source.setdefault(rec.source_id, rec.scores)
    metrics = sorted({m for s in per_source.values() for m in s})
    for metric in metrics:
        vals = [s[metric] for s in per_source.values() if metric in s]
        stats.score_quantiles[metric] = [float(v) for v in np.percentile(vals, QUANTILES)]
    return stats
