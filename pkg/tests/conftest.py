import os
import stat
import sys
import textwrap

import numpy as np
import pytest
import skimage.data

from mefdata.iqa import fit_niqe_model

# clean photographs for NIQE fitting; astronaut is held out as the test image
PRISTINE = ["camera", "coffee", "chelsea", "rocket", "moon", "coins", "brick", "grass",
            "gravel", "clock", "cat", "immunohistochemistry"]

ACCEPTANCE = {}


def photo(name: str) -> np.ndarray:
    img = getattr(skimage.data, name)()
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    return np.ascontiguousarray(img[..., :3])


def add_noise(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, img.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def record(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def pristine():
    return [photo(n) for n in PRISTINE]


@pytest.fixture(scope="session")
def niqe_model(pristine):
    return fit_niqe_model(pristine)


def _script(path, body: str) -> str:
    with open(path, "w") as fh:
        fh.write(f"#!{sys.executable}\n" + textwrap.dedent(body))
    os.chmod(path, os.stat(path).st_mode | stat.S_IEXEC)
    return str(path)


@pytest.fixture(scope="session")
def stubs(tmp_path_factory):
    """Executable scorer stubs following the argv = [cmd..., image] contract."""
    d = tmp_path_factory.mktemp("stubs")
    return {
        # prints its first argument (the value) and ignores the image path
        "echo": _script(d / "echo.py", """\
            import sys
            print(sys.argv[1])
        """),
        "abc": _script(d / "abc.py", """\
            print("abc")
        """),
        "sleep": _script(d / "sleep.py", """\
            import time
            time.sleep(30)
            print(0.5)
        """),
        "fail": _script(d / "fail.py", """\
            import sys
            sys.exit(3)
        """),
        # checks the image exists and is a PNG before answering
        "png": _script(d / "png.py", """\
            import sys
            with open(sys.argv[-1], "rb") as fh:
                assert fh.read(8) == b"\\x89PNG\\r\\n\\x1a\\n"
            print(0.7)
        """),
    }


CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@pytest.fixture(scope="session")
def fixture_config():
    return os.path.join(CONFIG_DIR, "fixture.cfg")


@pytest.fixture(scope="session")
def hdr_corpus(tmp_path_factory):
    """The 20-scene 16-bit linear fixture corpus."""
    from mefdata.synthetic import write_hdr_corpus

    d = tmp_path_factory.mktemp("hdr")
    write_hdr_corpus(str(d), count=20, size=192, seed=0)
    return str(d)
