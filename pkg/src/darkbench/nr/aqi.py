"""Anisotropic quality index from directional pseudo-Wigner Renyi entropy.

For every interior pixel and direction, ``window`` samples are taken along the
direction with nearest-pixel stepping at offsets ``-N/2 .. N/2-1``. The lag
products ``r[m] = s[m] s[-m]`` (zero where ``-m`` falls outside the window)
are Fourier transformed into the pseudo-Wigner distribution ``W[k]``, which is
real because ``r`` is even. The order-3 Renyi entropy of ``W^2 / sum W^2``,
divided by ``log2 N``, is averaged per direction; the anisotropy is the
standard deviation of those averages.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError

DIRECTIONS = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0)
WINDOW = 8
_ROWS_PER_CHUNK = 64


@dataclass
class AqiResult:
    anisotropy: float
    per_direction_entropy: dict


def _round_away(v):
    v = round(v, 9)
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def direction_offsets(theta_deg, window=WINDOW):
    """``(dy, dx)`` per window position; image rows grow downwards."""
    t = math.radians(theta_deg)
    half = window // 2
    return [(-_round_away(j * math.sin(t)), _round_away(j * math.cos(t))) for j in range(-half, half)]


def _entropy_rows(img, r0, r1, offsets, window, cos_table):
    half = window // 2
    w = img.shape[1]
    samples = {}
    for j, (dy, dx) in zip(range(-half, half), offsets):
        samples[j] = img[r0 + dy:r1 + dy, half + dx:w - half + dx]
    # even lag products; r[-half] pairs with an out-of-window sample and is zero
    lags = [samples[0] * samples[0]] + [samples[m] * samples[-m] for m in range(1, half)]
    wig = np.zeros((window,) + lags[0].shape)
    for k in range(window):
        acc = lags[0].copy()
        for m in range(1, half):
            acc += 2.0 * cos_table[k, m] * lags[m]
        wig[k] = acc
    energy = wig * wig
    total = energy.sum(axis=0)
    safe = np.where(total > 0, total, 1.0)
    p = energy / safe
    s3 = (p ** 3).sum(axis=0)
    ent = np.where(total > 0, -0.5 * np.log2(np.where(total > 0, s3, 1.0)), 0.0)
    return ent / math.log2(window)


def directional_entropy(plane, theta_deg, window=WINDOW) -> np.ndarray:
    """Normalized Renyi entropy map over the interior (border ``N/2`` skipped)."""
    img = np.asarray(plane, dtype=np.float64)
    half = window // 2
    h, w = img.shape
    if h <= 2 * half or w <= 2 * half:
        raise DimensionError(f"AQI with window {window} needs more than {2 * half} rows and columns, got {img.shape}")
    offsets = direction_offsets(theta_deg, window)
    cos_table = np.cos(2 * np.pi * np.outer(np.arange(window), np.arange(window)) / window)
    parts = []
    for r0 in range(half, h - half, _ROWS_PER_CHUNK):
        r1 = min(r0 + _ROWS_PER_CHUNK, h - half)
        parts.append(_entropy_rows(img, r0, r1, offsets, window, cos_table))
    return np.vstack(parts)


def aqi_score(plane, directions=DIRECTIONS, window=WINDOW) -> AqiResult:
    per_dir = {}
    for theta in directions:
        ent = directional_entropy(plane, theta, window)
        per_dir[float(theta)] = float(np.mean(ent))
    anis = statistics.pstdev(per_dir.values()) if len(per_dir) > 1 else 0.0
    return AqiResult(float(anis), per_dir)
