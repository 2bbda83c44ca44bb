"""Plain ``key = value`` pipeline configuration.

Blank lines and lines starting with ``#`` are ignored. Lists are comma separated.
Relative model paths resolve against the config file's directory.
Unknown keys are errors.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .ensemble import EnsembleConfig
from .exposure import DEFAULT_EVS, DEFAULT_TARGETS
from .fusion import FusionConfig
from .iqa.score import HIGHER_BETTER, POLARITIES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    evs: tuple = DEFAULT_EVS
    from_srgb: bool = False
    targets: tuple = DEFAULT_TARGETS
    pairing: str = "all-frames"
    niqe_model: str | None = None
    brisque_model: str | None = None
    ext_polarity: str = HIGHER_BETTER
    scorer_timeout: float = 60.0
    scorer_limit: int = 4

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, ensemble=replace(self.ensemble, rng_seed=int(seed)))

    def to_text(self) -> str:
        e, f = self.ensemble, self.fusion
        items = [
            ("engines", ",".join(e.engines)),
            ("metrics", ",".join(e.metrics)),
            ("n_blends", e.n_blends),
            ("blend_pick", e.blend_pick),
            ("calibration_groups", e.calibration_groups),
            ("seed", e.rng_seed),
            ("quality_metric", e.quality_metric or "none"),
            ("quality_threshold", repr(e.quality_threshold)),
            ("epsilon", repr(f.epsilon)),
            ("wc", repr(f.wc)), ("ws", repr(f.ws)), ("we", repr(f.we)),
            ("pyramid_depth", "auto" if f.pyramid_depth is None else f.pyramid_depth),
            ("evs", ",".join(repr(float(v)) for v in self.evs)),
            ("from_srgb", "true" if self.from_srgb else "false"),
            ("targets", ",".join(repr(float(v)) for v in self.targets)),
            ("pairing", self.pairing),
            ("niqe_model", self.niqe_model or "default"),
            ("brisque_model", self.brisque_model or "default"),
            ("ext_polarity", self.ext_polarity),
            ("scorer_timeout", repr(self.scorer_timeout)),
            ("scorer_limit", self.scorer_limit),
        ]
        return "".join(f"{k} = {v}\n" for k, v in items)


def _list(v: str) -> tuple:
    return tuple(s.strip() for s in v.split(",") if s.strip())


def _floats(v: str) -> tuple:
    return tuple(float(s) for s in _list(v))


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _optional(v: str):
    return None if v.lower() in ("", "none", "default") else v


# key -> (section, field name, parser)
_KEYS = {
    "engines": ("ensemble", "engines", _list),
    "metrics": ("ensemble", "metrics", _list),
    "n_blends": ("ensemble", "n_blends", int),
    "blend_pick": ("ensemble", "blend_pick", int),
    "calibration_groups": ("ensemble", "calibration_groups", int),
    "seed": ("ensemble", "rng_seed", int),
    "quality_metric": ("ensemble", "quality_metric", _optional),
    "quality_threshold": ("ensemble", "quality_threshold", float),
    "epsilon": ("fusion", "epsilon", float),
    "wc": ("fusion", "wc", float),
    "ws": ("fusion", "ws", float),
    "we": ("fusion", "we", float),
    "pyramid_depth": ("fusion", "pyramid_depth", lambda v: None if v == "auto" else int(v)),
    "evs": ("pipeline", "evs", _floats),
    "from_srgb": ("pipeline", "from_srgb", _bool),
    "targets": ("pipeline", "targets", _floats),
    "pairing": ("pipeline", "pairing", str),
    "niqe_model": ("pipeline", "niqe_model", _optional),
    "brisque_model": ("pipeline", "brisque_model", _optional),
    "ext_polarity": ("pipeline", "ext_polarity", str),
    "scorer_timeout": ("pipeline", "scorer_timeout", float),
    "scorer_limit": ("pipeline", "scorer_limit", int),
}


def parse_config(text: str, base_dir: str = ".", source: str = "<config>") -> PipelineConfig:
    sections = {"ensemble": {}, "fusion": {}, "pipeline": {}}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        section, name, parse = _KEYS[key]
        try:
            sections[section][name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{n}: bad value for {key}: {exc}") from exc
    pipe = sections["pipeline"]
    for key in ("niqe_model", "brisque_model"):
        if pipe.get(key) and not os.path.isabs(pipe[key]):
            pipe[key] = os.path.normpath(os.path.join(base_dir, pipe[key]))
    try:
        cfg = PipelineConfig(EnsembleConfig(**sections["ensemble"]),
                             FusionConfig(**sections["fusion"]), **pipe)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    from .dataset import PAIRINGS
    from .fusion import ENGINES

    for e in cfg.ensemble.engines:
        if e not in ENGINES:
            raise ConfigError(f"unknown engine {e!r}")
    if cfg.pairing not in PAIRINGS:
        raise ConfigError(f"pairing must be one of {PAIRINGS}")
    if cfg.ext_polarity not in POLARITIES:
        raise ConfigError(f"ext_polarity must be one of {POLARITIES}")
    if len(set(cfg.evs)) != len(cfg.evs) or len(cfg.evs) < 2:
        raise ConfigError("evs must hold at least 2 distinct values")
    for spec in (*cfg.ensemble.metrics, cfg.ensemble.quality_metric or "niqe"):
        if spec not in ("niqe", "brisque") and not spec.startswith("ext:"):
            raise ConfigError(f"unknown metric {spec!r}")


def load_config(path) -> PipelineConfig:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, os.path.dirname(os.path.abspath(path)), path)
