"""NIQE: distance between a plane's NSS feature distribution and a pristine model.

Features come from 96x96 patches (48x48 at the half-resolution scale). Only
patches whose mean local deviation exceeds 0.75 of the sharpest patch's are
used, both when fitting a model and when scoring.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, DegenerateSamplesError, DimensionError
from ..fr import block_mean
from ..serial import dumps
from .nss import compute_mscn, fit_aggd, fit_ggd

PATCH = 96
SHARPNESS_FRACTION = 0.75
PINV_RCOND = 1e-10
N_FEATURES = 36


class SharpnessFallbackWarning(UserWarning):
    """No patch passed sharpness selection, so all patches were used."""


@dataclass
class NiqeModel:
    mean_vector: np.ndarray
    covariance: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mean_vector = np.asarray(self.mean_vector, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        n = self.mean_vector.shape[0]
        if self.covariance.shape != (n, n):
            raise ConfigurationError(f"covariance must be {n}x{n}, got {self.covariance.shape}")

    def to_json(self) -> str:
        return dumps({"mean": self.mean_vector, "cov": self.covariance, "meta": self.meta})

    @classmethod
    def from_json(cls, text) -> "NiqeModel":
        d = json.loads(text)
        try:
            return cls(np.array(d["mean"], dtype=np.float64), np.array(d["cov"], dtype=np.float64), d.get("meta", {}))
        except KeyError as exc:
            raise ConfigurationError(f"NIQE model lacks {exc}") from exc

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "NiqeModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _safe_ggd(x):
    try:
        p = fit_ggd(x)
        return [p.alpha, p.sigma]
    except DegenerateSamplesError:
        # flat patch: Gaussian shape, zero spread
        return [2.0, 0.0]


def _safe_aggd(x):
    try:
        p = fit_aggd(x)
        return [p.alpha, p.eta, p.sigma_left, p.sigma_right]
    except DegenerateSamplesError:
        return [2.0, 0.0, 0.0, 0.0]


def scale_features(mscn) -> list:
    """18 features: GGD of the MSCN patch, AGGD of its four neighbour products."""
    m = mscn
    feats = _safe_ggd(m)
    for prod in (
        m[:, :-1] * m[:, 1:],
        m[:-1, :] * m[1:, :],
        m[:-1, :-1] * m[1:, 1:],
        m[:-1, 1:] * m[1:, :-1],
    ):
        feats.extend(_safe_aggd(prod))
    return feats


def niqe_patch_features(plane, patch=PATCH, fraction=SHARPNESS_FRACTION):
    """Per-patch 36-feature rows for the sharp patches of a [0, 255] plane."""
    img = np.asarray(plane, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < patch or img.shape[1] < patch:
        raise DimensionError(f"NIQE needs at least {patch}x{patch}, got {img.shape}")
    full = compute_mscn(img)
    half = compute_mscn(block_mean(img, 2))
    rows, cols = img.shape[0] // patch, img.shape[1] // patch
    hp = patch // 2
    coords = [(r, c) for r in range(rows) for c in range(cols)]
    sharp = np.array([
        full.sigma_field[r * patch:(r + 1) * patch, c * patch:(c + 1) * patch].mean() for r, c in coords
    ])
    keep = sharp > fraction * sharp.max()
    if not keep.any():
        warnings.warn("no patch passed sharpness selection; using all patches", SharpnessFallbackWarning, stacklevel=2)
        keep[:] = True
    out = []
    for (r, c), k in zip(coords, keep):
        if not k:
            continue
        f1 = scale_features(full.values[r * patch:(r + 1) * patch, c * patch:(c + 1) * patch])
        f2 = scale_features(half.values[r * hp:(r + 1) * hp, c * hp:(c + 1) * hp])
        out.append(f1 + f2)
    return np.array(out, dtype=np.float64)


def niqe_features(plane) -> np.ndarray:
    """Mean feature vector over the sharp patches (length 36)."""
    return niqe_patch_features(plane).mean(axis=0)


def _mvg(feats):
    mu = feats.mean(axis=0)
    if feats.shape[0] < 2:
        cov = np.zeros((feats.shape[1], feats.shape[1]))
    else:
        cov = np.cov(feats, rowvar=False)
        cov = (cov + cov.T) / 2
    return mu, cov


def fit_niqe_model(corpus, meta=None) -> NiqeModel:
    """Mean and covariance of sharp-patch features pooled over a corpus of planes."""
    corpus = list(corpus)
    if len(corpus) < 2:
        raise ConfigurationError(f"NIQE fitting needs at least 2 planes, got {len(corpus)}")
    feats = np.vstack([niqe_patch_features(p) for p in corpus])
    mu, cov = _mvg(feats)
    info = {
        "planes": len(corpus),
        "patches": int(feats.shape[0]),
        "patch_size": PATCH,
        "sharpness_fraction": SHARPNESS_FRACTION,
    }
    info.update(meta or {})
    return NiqeModel(mu, cov, info)


def niqe_distance(mu1, cov1, mu2, cov2) -> float:
    d = np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64)
    s = (np.asarray(cov1, dtype=np.float64) + np.asarray(cov2, dtype=np.float64)) / 2
    inv = np.linalg.pinv(s, rcond=PINV_RCOND, hermitian=True)
    return float(np.sqrt(max(float(d @ inv @ d), 0.0)))


def model_distance(a: NiqeModel, b: NiqeModel) -> float:
    return niqe_distance(a.mean_vector, a.covariance, b.mean_vector, b.covariance)


def niqe_score(plane, model: NiqeModel) -> float:
    """Lower is better; 0 when the plane's feature MVG matches the model's mean."""
    mu, cov = _mvg(niqe_patch_features(plane))
    return niqe_distance(model.mean_vector, model.covariance, mu, cov)
