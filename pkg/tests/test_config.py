import os

import pytest

from mefdata.config import ConfigError, PipelineConfig, load_config, parse_config


def test_defaults_round_trip_through_text():
    cfg = PipelineConfig()
    assert parse_config(cfg.to_text()) == cfg


def test_parse_values_and_comments():
    cfg = parse_config("""
# comment
engines = mertens, gradient
blend_pick = 2
seed = 42
evs = -2,0,2
quality_metric = brisque
quality_threshold = 30
pyramid_depth = 4
from_srgb = yes
""")
    assert cfg.ensemble.engines == ("mertens", "gradient")
    assert cfg.ensemble.rng_seed == 42 and cfg.evs == (-2.0, 0.0, 2.0)
    assert cfg.ensemble.quality_metric == "brisque" and cfg.ensemble.quality_threshold == 30.0
    assert cfg.fusion.pyramid_depth == 4 and cfg.from_srgb


def test_errors_name_the_line():
    with pytest.raises(ConfigError, match=r"<config>:2: unknown key 'sed'"):
        parse_config("seed = 1\nsed = 2\n")
    with pytest.raises(ConfigError, match=r":1: bad value for n_blends"):
        parse_config("n_blends = many\n")
    with pytest.raises(ConfigError, match=r":1: expected 'key = value'"):
        parse_config("just words\n")


def test_semantic_validation():
    with pytest.raises(ConfigError, match="unknown metric"):
        parse_config("metrics = psnr\n")
    with pytest.raises(ConfigError, match="pairing"):
        parse_config("pairing = some-frames\n")
    with pytest.raises(ConfigError, match="evs"):
        parse_config("evs = 1\n")


def test_model_paths_relative_to_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("niqe_model = models/n.txt\n")
    assert load_config(path).niqe_model == os.path.join(str(tmp_path), "models", "n.txt")


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "none.cfg")


def test_with_seed():
    assert PipelineConfig().with_seed(9).ensemble.rng_seed == 9
