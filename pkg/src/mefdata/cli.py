"""Command-line entry point: ``mefdata <subcommand> ...``.

Exit codes: 0 success, 1 some per-file failures, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import logging
import os
import re
import sys

import cv2
import numpy as np

from . import dataset, pipeline
from .config import ConfigError, PipelineConfig, load_config
from .exposure import DEFAULT_EVS, DEFAULT_TARGETS, ExposureStack, render_mes, synthesize_mes
from .fusion import ENGINES, FusionConfig, compute_weights, dump_weights, fuse_flat, fuse_pyramid
from .imgcore import ImageIOError, load_image, load_srgb, save_image, srgb_encode
from .iqa import fit_niqe_model, make_scorer
from .iqa.score import ScorerError

log = logging.getLogger("mefdata")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
_EV_NAME = re.compile(r"_ev([+-]?\d+(?:\.\d+)?)\.png$", re.IGNORECASE)


class UsageError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def load_as_srgb(path: str) -> np.ndarray:
    """8-bit PNGs as stored; 16-bit (linear) PNGs sRGB-encoded."""
    try:
        return load_srgb(path)
    except ImageIOError as exc:
        if "bit depth" not in str(exc):
            raise
        return srgb_encode(load_image(path))


def contact_sheet(stack: ExposureStack, caption_h: int = 22) -> np.ndarray:
    """Frames side by side, each with an EV caption strip underneath."""
    h, w = stack.shape[:2]
    sheet = np.zeros((h + caption_h, w * len(stack), 3), dtype=np.uint8)
    scale = max(0.3, min(0.6, w / 300.0))
    for k, (frame, ev) in enumerate(zip(stack.frames, stack.evs)):
        x0 = k * w
        sheet[:h, x0:x0 + w] = frame
        cv2.putText(sheet, f"EV {ev:+.2f}", (x0 + 4, h + caption_h - 6), cv2.FONT_HERSHEY_SIMPLEX,
                    scale, (255, 255, 255), 1, cv2.LINE_AA)
    return sheet


def read_stack_dir(stack_dir: str) -> ExposureStack:
    frames = []
    for name in sorted(os.listdir(stack_dir)):
        m = _EV_NAME.search(name)
        if m:
            frames.append((float(m.group(1)), os.path.join(stack_dir, name)))
    if len(frames) < 2:
        raise UsageError(f"{stack_dir}: need at least 2 frames named *_ev<+N.NN>.png")
    frames.sort()
    sid = os.path.basename(os.path.normpath(stack_dir))
    return ExposureStack([load_as_srgb(p) for _, p in frames], [ev for ev, _ in frames], sid)


def cmd_render_mes(args) -> int:
    evs = _floats(args.evs)
    targets = _floats(args.targets)
    paths = pipeline.list_sources(args.inp)
    failed = 0
    for path in paths:
        sid = pipeline.source_id_for(path)
        try:
            if args.from_srgb:
                stack = synthesize_mes(load_as_srgb(path), targets, sid)
            else:
                stack = render_mes(load_image(path), evs, sid)
            dataset.write_stack(stack, args.out, kind=".")
            save_image(os.path.join(args.out, f"{sid}_preview.png"), contact_sheet(stack))
            print(f"{path}: {len(stack)} frames, EVs {', '.join(f'{e:+.2f}' for e in stack.evs)}")
        except (OSError, ValueError) as exc:
            failed += 1
            log.error("%s: %s", path, exc)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_fuse(args) -> int:
    stack = read_stack_dir(args.stack)
    cfg = FusionConfig(engine=args.engine, epsilon=args.epsilon)
    w = compute_weights(stack, args.engine, cfg)
    flat = args.flat or not ENGINES[args.engine].pyramid
    image = fuse_flat(stack, w) if flat else fuse_pyramid(stack, w, cfg.pyramid_depth)
    out = args.out or os.path.join(args.stack, f"fused_{args.engine}.png")
    save_image(out, image)
    print(out)
    if args.dump_weights:
        for p in dump_weights(w, os.path.dirname(out) or ".", prefix=f"weights_{args.engine}"):
            print(p)
    return EXIT_OK


def cmd_score(args) -> int:
    paths = sorted(glob.glob(args.inp))
    if not paths:
        raise UsageError(f"no files match {args.inp!r}")
    specs = _split_metrics(args.metrics)
    scorers = [make_scorer(s, niqe_model=args.niqe_model, brisque_model=args.brisque_model,
                           timeout=args.timeout) for s in specs]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["path", "metric", "value", "polarity"])
    failed = 0
    for path in paths:
        try:
            img = load_as_srgb(path)
        except OSError as exc:
            failed += 1
            log.error("%s", exc)
            continue
        for scorer in scorers:
            try:
                s = scorer(img)
            except (ScorerError, ValueError) as exc:
                failed += 1
                log.error("%s: %s: %s", path, scorer.name, exc)
                continue
            writer.writerow([path, s.metric, repr(s.value), s.polarity])
    return EXIT_PARTIAL if failed else EXIT_OK


def _split_metrics(text: str) -> list:
    # "ext:" swallows the rest of the string so commands may contain commas
    head, sep, ext = text.partition("ext:")
    specs = [s.strip() for s in head.split(",") if s.strip()]
    if sep:
        specs.append("ext:" + ext)
    if not specs:
        raise UsageError("no metrics given")
    return specs


def cmd_fit_niqe(args) -> int:
    paths = sorted(glob.glob(args.corpus))
    if not paths:
        raise UsageError(f"no files match {args.corpus!r}")
    images = [load_as_srgb(p) for p in paths]
    model = fit_niqe_model(images, args.patch_size, args.sharpness_fraction)
    model.save(args.out)
    print(f"fitted NIQE model on {len(paths)} images -> {args.out}")
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    workers = args.workers or os.cpu_count() or 1
    summary = pipeline.run_pipeline(args.inp, args.out, cfg, workers)
    print(summary.stats.table())
    print(f"sources {summary.sources}  records {summary.records}  "
          f"rejected {summary.rejected}  failed {summary.failed}")
    return EXIT_PARTIAL if summary.failed else EXIT_OK


def cmd_stats(args) -> int:
    records = dataset.read_manifest(args.manifest)
    root = os.path.dirname(os.path.abspath(args.manifest))
    rej_path = os.path.join(root, pipeline.REJECTIONS)
    rejected = 0
    if os.path.isfile(rej_path):
        with open(rej_path, encoding="utf-8") as fh:
            rejected = sum(1 for ln in fh if ln.strip())
    stats = dataset.corpus_stats(records, root, rejected)
    print(stats.table())
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(stats.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mefdata", description="Multi-exposure stacks, fusion, NR-IQA scoring and pseudo-GT datasets.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render-mes", help="render exposure stacks with contact-sheet previews")
    p.add_argument("--in", dest="inp", required=True, help="PNG file or directory of PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--evs", default=",".join(f"{e:g}" for e in DEFAULT_EVS),
                   help="comma-separated EV list; write as --evs=-3,... (default %(default)s)")
    p.add_argument("--from-srgb", action="store_true",
                   help="treat inputs as 8-bit sRGB and retarget to --targets mean intensities")
    p.add_argument("--targets", default=",".join(f"{t:g}" for t in DEFAULT_TARGETS),
                   help="style-code targets for --from-srgb (default %(default)s)")
    p.set_defaults(func=cmd_render_mes)

    p = sub.add_parser("fuse", help="fuse one stack directory")
    p.add_argument("--stack", required=True, help="directory of *_ev<+N.NN>.png frames")
    p.add_argument("--engine", required=True, choices=sorted(ENGINES))
    p.add_argument("--flat", action="store_true", help="flat weighted sum instead of pyramid blend")
    p.add_argument("--epsilon", type=float, default=1e-12)
    p.add_argument("--dump-weights", action="store_true", help="write normalized weight maps")
    p.add_argument("--out", help="output PNG (default <stack>/fused_<engine>.png)")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("score", help="no-reference quality scores as CSV on stdout")
    p.add_argument("--in", dest="inp", required=True, help="glob of PNG files")
    p.add_argument("--metrics", required=True, help="niqe,brisque[,ext:<command>]")
    p.add_argument("--niqe-model", help="NIQE model file (default: bundled)")
    p.add_argument("--brisque-model", help="BRISQUE regressor file (default: bundled)")
    p.add_argument("--timeout", type=float, default=60.0, help="external scorer timeout, seconds")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fit-niqe", help="fit a NIQE pristine model")
    p.add_argument("--corpus", required=True, help="glob of pristine PNG files")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--patch-size", type=int, default=96)
    p.add_argument("--sharpness-fraction", type=float, default=0.75)
    p.set_defaults(func=cmd_fit_niqe)

    p = sub.add_parser("gen-dataset", help="full pseudo-GT dataset generation")
    p.add_argument("--in", dest="inp", required=True, help="directory of source PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("stats", help="corpus statistics of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--csv", help="also write the statistics as CSV")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"mefdata {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ScorerError) as exc:
        print(f"mefdata {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL if args.command in ("render-mes", "score") else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
