import math

import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from conftest import PRISTINE, add_noise, photo
from mefdata.iqa import (BrisqueRegressor, ExternalScorer, NiqeModel, NoValidPatches,
                         brisque, brisque_features, default_niqe_model, external_score,
                         fit_niqe_model, make_scorer, niqe, niqe_features)
from mefdata.iqa.external import ScorerExitError, ScorerOutputError, ScorerTimeout, parse_score
from mefdata.iqa.nss import ALPHA_GRID, fit_aggd, gaussian_window, half_scale, mscn
from mefdata.iqa.score import HIGHER_BETTER, LOWER_BETTER, IqaScore, ScorerError


@pytest.fixture(scope="module")
def noise_field():
    return np.random.default_rng(0).uniform(0, 255, (256, 256))


def test_gaussian_window():
    w = gaussian_window()
    assert w.shape == (7, 7) and w.sum() == pytest.approx(1.0)
    g = [math.exp(-(k - 3) ** 2 / (2 * (7 / 6) ** 2)) for k in range(7)]
    assert w[3, 0] / w[3, 3] == pytest.approx(g[0] / g[3])


def test_alpha_grid():
    assert ALPHA_GRID[0] == 0.2 and ALPHA_GRID[-1] == 10.0 and len(ALPHA_GRID) == 9801


def test_mscn_constant_is_zero():
    assert np.all(mscn(np.full((32, 32), 117.0)) == 0.0)


def test_mscn_white_noise_mean(noise_field):
    assert abs(mscn(noise_field).mean()) <= 0.05


def test_mscn_scale_changes_only_through_stabilizer(noise_field):
    a, b = mscn(noise_field), mscn(100.0 * noise_field)
    assert np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(b ** 2)) <= 0.02


def test_mscn_too_small():
    with pytest.raises(ValueError, match="image too small"):
        mscn(np.zeros((15, 40)))


def test_aggd_gaussian():
    x = np.random.default_rng(1).standard_normal(10 ** 6)
    alpha, sl, sr = fit_aggd(x)
    assert 1.8 <= alpha <= 2.2
    assert abs(sl / sr - 1) <= 0.05


def test_aggd_laplacian():
    x = np.random.default_rng(2).laplace(size=10 ** 6)
    alpha, _, _ = fit_aggd(x)
    assert 0.9 <= alpha <= 1.1


def test_aggd_asymmetric_scales():
    rng = np.random.default_rng(3)
    z = np.abs(rng.standard_normal(10 ** 6))
    x = np.where(rng.random(10 ** 6) < 0.5, -1.0 * z, 3.0 * z)
    _, sl, sr = fit_aggd(x)
    assert sr / sl == pytest.approx(3.0, rel=0.02)


def test_aggd_contract():
    with pytest.raises(ValueError, match="insufficient variance"):
        fit_aggd(np.full(500, 2.5))
    with pytest.raises(ValueError, match="at least 100"):
        fit_aggd(np.arange(99) - 50.0)


def test_half_scale():
    x = np.arange(20.0).reshape(4, 5)
    assert half_scale(x).tolist() == [[3.0, 5.0], [13.0, 15.0]]


def test_niqe_feature_shape(pristine):
    f = niqe_features(pristine[1], 96)
    h, w = pristine[1].shape[:2]
    assert f.shape == ((h // 96) * (w // 96), 36)


def test_niqe_features_too_small():
    with pytest.raises(ValueError, match="smaller than one"):
        niqe_features(np.zeros((50, 200, 3), np.uint8), 96)


def test_niqe_constant_has_no_valid_patches(niqe_model):
    with pytest.raises(NoValidPatches, match="no valid patches"):
        niqe(np.full((200, 200, 3), 90, np.uint8), niqe_model)


def test_fit_needs_ten_images(pristine):
    with pytest.raises(ValueError, match="at least 10"):
        fit_niqe_model(pristine[:9])


def test_fit_order_invariant(pristine):
    a = fit_niqe_model(pristine)
    b = fit_niqe_model(pristine[::-1])
    assert np.array_equal(a.feature_mean, b.feature_mean)
    assert np.array_equal(a.feature_cov, b.feature_cov)


def test_model_is_symmetric_psd(niqe_model):
    cov = niqe_model.feature_cov
    assert np.allclose(cov, cov.T, atol=1e-9)
    assert np.linalg.eigvalsh(cov).min() > -1e-9 * np.abs(cov).max()


def test_model_file_round_trip(niqe_model, tmp_path):
    path = tmp_path / "m.txt"
    niqe_model.save(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "niqe-model v1" and len(lines) == 39
    assert lines[1].split() == ["96", "0.75"]
    back = NiqeModel.load(path)
    assert np.array_equal(back.feature_mean, niqe_model.feature_mean)
    assert np.array_equal(back.feature_cov, niqe_model.feature_cov)


def test_model_file_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("hello\n")
    with pytest.raises(ValueError, match="niqe-model v1"):
        NiqeModel.load(bad)


def test_niqe_separates_clean_from_noisy(pristine, niqe_model):
    # a typical corpus image scores below the corpus's 90th-percentile
    # self-score; heavy noise pushes every corpus image above it
    selfs = np.array([niqe(img, niqe_model).value for img in pristine])
    p90 = np.percentile(selfs, 90)
    assert np.median(selfs) < p90
    noisy = [niqe(add_noise(img, 30, k), niqe_model).value for k, img in enumerate(pristine)]
    assert min(noisy) > p90


def test_niqe_deterministic(pristine, niqe_model):
    a = niqe(pristine[2], niqe_model)
    b = niqe(pristine[2].copy(), niqe_model)
    assert a == b and a.polarity == LOWER_BETTER


def test_default_niqe_model_loads():
    m = default_niqe_model()
    assert m.feature_mean.shape == (36,) and m.patch_size == 96


def test_brisque_zero_coefficients_give_bias(pristine):
    reg = BrisqueRegressor("linear", np.zeros(36), 4.25, np.tile([0.0, 1.0], (36, 1)))
    for img in pristine[:3]:
        assert brisque(img, reg).value == 4.25


def test_brisque_features_discriminate():
    rng = np.random.default_rng(5)
    noise = rng.integers(0, 256, (128, 128, 3)).astype(np.uint8)
    blurred = cv2.GaussianBlur(noise, (0, 0), 3.0)
    diff = np.abs(brisque_features(noise) - brisque_features(blurred))
    assert int((diff > 1e-3).sum()) >= 30


def test_brisque_features_bitwise_deterministic(pristine):
    a = brisque_features(pristine[0])
    b = brisque_features(pristine[0].copy())
    assert a.tobytes() == b.tobytes()


def test_brisque_regressor_file_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    ranges = np.sort(rng.random((36, 2)), axis=1)
    reg = BrisqueRegressor("linear", rng.standard_normal(36), 1.5, ranges)
    path = tmp_path / "r.txt"
    reg.save(path)
    assert path.read_text().splitlines()[0] == "brisque-linear v1"
    back = BrisqueRegressor.load(path)
    feats = rng.random(36)
    assert back.predict(feats) == reg.predict(feats)


def test_brisque_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="missing regressor file"):
        BrisqueRegressor.load(tmp_path / "nope.txt")


def test_brisque_scaling_to_unit_range():
    reg = BrisqueRegressor("linear", np.zeros(36), 0.0, np.tile([2.0, 4.0], (36, 1)))
    assert np.allclose(reg.scale(np.full(36, 3.0)), 0.0)
    assert np.allclose(reg.scale(np.full(36, 4.0)), 1.0)


def test_brisque_default_ranks_distortion(pristine):
    reg = BrisqueRegressor.default()
    img = photo("astronaut")
    clean = brisque(img, reg).value
    assert brisque(add_noise(img, 30, 0), reg).value > clean
    assert brisque(cv2.GaussianBlur(img, (0, 0), 4.0), reg).value > clean


def test_brisque_external_kind(stubs):
    reg = BrisqueRegressor("external", command=(stubs["echo"], "12.5"))
    assert reg.predict(np.zeros(36)) == 12.5


def test_external_stub_value(stubs):
    s = external_score(np.zeros((8, 8, 3), np.uint8), [stubs["png"]])
    assert s == IqaScore("ext", 0.7, HIGHER_BETTER)


def test_external_unparseable(stubs):
    with pytest.raises(ScorerOutputError, match="unparseable scorer output"):
        external_score(np.zeros((8, 8, 3), np.uint8), [stubs["abc"]])


def test_external_timeout(stubs):
    with pytest.raises(ScorerTimeout, match="scorer timeout"):
        external_score(np.zeros((8, 8, 3), np.uint8), [stubs["sleep"]], timeout=0.5)


def test_external_nonzero_exit(stubs):
    with pytest.raises(ScorerExitError, match="status 3"):
        external_score(np.zeros((8, 8, 3), np.uint8), [stubs["fail"]])


def test_external_errors_are_distinct():
    kinds = {ScorerExitError, ScorerOutputError, ScorerTimeout}
    assert len(kinds) == 3 and all(issubclass(k, ScorerError) for k in kinds)


@pytest.mark.parametrize("text, value", [("0.7", 0.7), (" 3\n", 3.0), ("-1.5e-2", -0.015)])
def test_parse_score(text, value):
    assert parse_score(text) == value


@pytest.mark.parametrize("text", ["abc", "", "1 2", "0.7 ok", "nan"])
def test_parse_score_rejects(text):
    with pytest.raises(ScorerOutputError):
        parse_score(text)


def test_score_must_be_finite():
    with pytest.raises(ScorerError, match="non-finite"):
        IqaScore("x", float("inf"))


def test_make_scorer(stubs, niqe_model):
    assert make_scorer("niqe", niqe_model=niqe_model).name == "niqe"
    assert make_scorer("brisque").name == "brisque"
    ext = make_scorer(f"ext:{stubs['echo']} 0.25", ext_polarity=LOWER_BETTER)
    assert isinstance(ext, ExternalScorer)
    assert ext(np.zeros((4, 4, 3), np.uint8)) == IqaScore("ext", 0.25, LOWER_BETTER)
    with pytest.raises(ValueError, match="unknown metric"):
        make_scorer("pi")


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 6.0), st.integers(0, 10 ** 6))
def test_aggd_recovers_shape_property(alpha, seed):
    # symmetric GGD samples via |x| = Gamma(1/alpha)**(1/alpha), random sign
    rng = np.random.default_rng(seed)
    n = 200_000
    mag = rng.gamma(1.0 / alpha, 1.0, n) ** (1.0 / alpha)
    x = np.where(rng.random(n) < 0.5, -mag, mag)
    est, _, _ = fit_aggd(x)
    assert abs(est - alpha) <= 0.1 * alpha


def test_ggd_ratio_oracle():
    # for alpha = 2 the ratio Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)) is 2/pi
    a = 2.0
    assert gamma(2 / a) ** 2 / (gamma(1 / a) * gamma(3 / a)) == pytest.approx(2 / math.pi)


def test_pristine_names_exclude_test_image():
    assert "astronaut" not in PRISTINE and len(PRISTINE) >= 10
