"""Natural-scene-statistics primitives: MSCN fields and (A)GGD moment fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from ..errors import DegenerateSamplesError, DimensionError

ALPHA_GRID = np.round(np.arange(0.2, 10.0 + 5e-4, 0.001), 3)
# GGD ratio Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2, decreasing in a
GGD_RHO = np.exp(gammaln(1 / ALPHA_GRID) + gammaln(3 / ALPHA_GRID) - 2 * gammaln(2 / ALPHA_GRID))
MIN_FIT_SAMPLES = 100


@dataclass
class MscnField:
    values: np.ndarray
    sigma_field: np.ndarray


@dataclass(frozen=True)
class GgdParams:
    alpha: float
    sigma: float


@dataclass(frozen=True)
class AggdParams:
    alpha: float
    sigma_left: float
    sigma_right: float
    eta: float


def gaussian_kernel_1d(size=7, sigma=7 / 6):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _smooth(img, g):
    out = ndimage.correlate1d(img, g, axis=0, mode="nearest")
    return ndimage.correlate1d(out, g, axis=1, mode="nearest")


def compute_mscn(plane, size=7, sigma=7 / 6, c=1.0) -> MscnField:
    """Mean-subtracted contrast-normalized coefficients of a [0, 255] plane.

    ``mu = G * I``, ``sigma = sqrt(G * (I - mu)^2)``, ``mscn = (I - mu) / (sigma + c)``
    with a normalized ``size x size`` Gaussian and replicated borders.
    """
    img = np.asarray(plane, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < size or img.shape[1] < size:
        raise DimensionError(f"plane {img.shape} smaller than the {size}x{size} kernel")
    g = gaussian_kernel_1d(size, sigma)
    # filter the offset from one sample so constant planes give mu == I exactly
    ref = img.flat[0]
    mu = ref + _smooth(img - ref, g)
    dev = img - mu
    sig = np.sqrt(np.maximum(_smooth(dev * dev, g), 0.0))
    return MscnField(dev / (sig + c), sig)


def _moments(samples):
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise DegenerateSamplesError(f"need at least {MIN_FIT_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSamplesError("samples contain non-finite values")
    if x.max() == x.min():
        raise DegenerateSamplesError("all samples are equal")
    return x


def fit_ggd(samples) -> GgdParams:
    """Zero-mean GGD by moment matching on the shape grid ``[0.2, 10]``, step 0.001."""
    x = _moments(samples)
    m2 = float(np.mean(x * x))
    m1 = float(np.mean(np.abs(x)))
    rho = m2 / (m1 * m1)
    alpha = float(ALPHA_GRID[np.argmin(np.abs(GGD_RHO - rho))])
    return GgdParams(alpha, float(np.sqrt(m2)))


def fit_aggd(samples) -> AggdParams:
    """Asymmetric GGD fit; ``sigma_left/right`` are one-sided RMS values."""
    x = _moments(samples)
    left = x[x < 0]
    right = x[x > 0]
    if left.size == 0 or right.size == 0:
        raise DegenerateSamplesError("AGGD fit needs samples of both signs")
    sl = float(np.sqrt(np.mean(left * left)))
    sr = float(np.sqrt(np.mean(right * right)))
    gam = sl / sr
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    big_r = r_hat * (gam ** 3 + 1) * (gam + 1) / (gam ** 2 + 1) ** 2
    alpha = float(ALPHA_GRID[np.argmin(np.abs(1.0 / GGD_RHO - big_r))])
    const = np.exp(0.5 * (gammaln(1 / alpha) - gammaln(3 / alpha)))
    eta = (sr - sl) * const * np.exp(gammaln(2 / alpha) - gammaln(1 / alpha))
    return AggdParams(alpha, sl, sr, float(eta))


def luma_255(frame) -> np.ndarray:
    """Luma rescaled to [0, 255] reals whatever the source bit depth."""
    return frame.y.astype(np.float64) * (255.0 / frame.format.peak)
