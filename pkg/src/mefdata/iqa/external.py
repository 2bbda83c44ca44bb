"""Adapter for quality metrics that live in another process.

Contract: the command is run as ``[*command, image_path]``, must exit 0 and
print a single decimal number on stdout.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
import threading

import numpy as np

from .score import HIGHER_BETTER, IqaScore, ScorerError

DEFAULT_TIMEOUT = 60.0
DEFAULT_LIMIT = 4

_DECIMAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")

_slots = threading.BoundedSemaphore(DEFAULT_LIMIT)


class ScorerExitError(ScorerError):
    pass


class ScorerOutputError(ScorerError):
    pass


class ScorerTimeout(ScorerError):
    pass


def set_parallel_limit(n: int) -> None:
    """Bound concurrent scorer subprocesses (per process)."""
    global _slots
    if n < 1:
        raise ValueError("limit must be >= 1")
    _slots = threading.BoundedSemaphore(n)


def parse_score(text: str) -> float:
    s = text.strip()
    if not _DECIMAL.fullmatch(s):
        raise ScorerOutputError(f"unparseable scorer output: {text.strip()[:80]!r}")
    return float(s)


def run_scorer_command(command: list, path: str, timeout: float = DEFAULT_TIMEOUT) -> float:
    argv = [*command, path]
    with _slots:
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise ScorerTimeout(f"scorer timeout after {timeout:g} s: {' '.join(command)}") from exc
        except OSError as exc:
            raise ScorerExitError(f"scorer failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise ScorerExitError(f"scorer exited with status {proc.returncode}: "
                              f"{proc.stderr.strip()[:200]}")
    return parse_score(proc.stdout)


def external_score(img: np.ndarray, command: list, metric: str = "ext",
                   polarity: str = HIGHER_BETTER, timeout: float = DEFAULT_TIMEOUT) -> IqaScore:
    from ..imgcore import save_image

    fd, path = tempfile.mkstemp(suffix=".png", prefix="mefdata_score_")
    os.close(fd)
    try:
        save_image(path, img)
        value = run_scorer_command(list(command), path, timeout)
    finally:
        os.unlink(path)
    return IqaScore(metric, value, polarity)
