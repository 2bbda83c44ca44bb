"""Regenerate the bundled NIQE model and linear BRISQUE regressor.

Both are fitted on the sample photographs shipped with scikit-image. The
BRISQUE regressor is a ridge fit of synthetic distortion severity (Gaussian
noise, blur, JPEG) on scaled features; it is good for ranking, not for
predicting human opinion scores.

    python scripts/fit_default_models.py [--out src/mefdata/data]
"""

import argparse
import os

import cv2
import numpy as np
import skimage.data

from mefdata.iqa import BrisqueRegressor, brisque_features, fit_niqe_model

PHOTOS = ["astronaut", "camera", "coffee", "chelsea", "rocket", "moon", "coins",
          "brick", "grass", "gravel", "clock", "cat", "immunohistochemistry"]


def photos():
    for name in PHOTOS:
        img = getattr(skimage.data, name)()
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=2)
        yield name, np.ascontiguousarray(img[..., :3])


def distortions(img, rng):
    """Yield (severity, image); severity 0 is the clean input."""
    yield 0.0, img
    for k, sigma in enumerate((5, 15, 30), start=1):
        noisy = img + rng.normal(0.0, sigma, img.shape)
        yield 20.0 * k, np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    for k, sigma in enumerate((1.0, 2.0, 4.0), start=1):
        yield 20.0 * k, cv2.GaussianBlur(img, (0, 0), sigma)
    for k, q in enumerate((30, 10), start=2):
        ok, buf = cv2.imencode(".jpg", img[..., ::-1], [cv2.IMWRITE_JPEG_QUALITY, q])
        yield 20.0 * k, cv2.imdecode(buf, cv2.IMREAD_COLOR)[..., ::-1]


def fit_brisque(seed=0, ridge=1e-2):
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for _, img in photos():
        for severity, dist in distortions(img, rng):
            feats.append(brisque_features(dist))
            labels.append(severity)
    x = np.array(feats)
    y = np.array(labels)
    ranges = np.stack([x.min(axis=0), x.max(axis=0)], axis=1)
    probe = BrisqueRegressor("linear", np.zeros(36), 0.0, ranges)
    xs = np.array([probe.scale(f) for f in x])
    a = np.hstack([xs, np.ones((len(xs), 1))])
    reg = ridge * np.eye(a.shape[1])
    reg[-1, -1] = 0.0
    w = np.linalg.solve(a.T @ a + reg, a.T @ y)
    fitted = BrisqueRegressor("linear", w[:-1], float(w[-1]), ranges)
    pred = np.array([fitted.predict(f) for f in x])
    print(f"brisque ridge fit: n={len(y)} rmse={np.sqrt(np.mean((pred - y) ** 2)):.2f} "
          f"spearman={np.corrcoef(np.argsort(np.argsort(pred)), np.argsort(np.argsort(y)))[0, 1]:.3f}")
    return fitted


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join("src", "mefdata", "data"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    model = fit_niqe_model([img for _, img in photos()])
    model.save(os.path.join(args.out, "niqe_default.txt"))
    fit_brisque().save(os.path.join(args.out, "brisque_linear.txt"))
    print(f"wrote models to {args.out}")


if __name__ == "__main__":
    main()
