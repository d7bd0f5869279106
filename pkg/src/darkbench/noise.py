"""Temporal noise profiling at probe pixels and classical temporal denoisers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DimensionError
from .serial import fmt_float
from .yuv import PLANES, Frame, MemoryVideo, VideoWriter


@dataclass(frozen=True)
class ProbeLocation:
    x: int
    y: int
    label: str = ""

    def name(self, index):
        return self.label or f"p{index}"


@dataclass
class NoiseProfile:
    probes: list
    series: list
    smoothed: list
    mae: list
    window: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["probe", "frame", "raw", "smoothed"])
        for i, p in enumerate(self.probes):
            for t, (r, s) in enumerate(zip(self.series[i], self.smoothed[i])):
                w.writerow([p.name(i), t, fmt_float(r), fmt_float(s)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["probe", "x", "y", "mae"])
        for i, p in enumerate(self.probes):
            w.writerow([p.name(i), p.x, p.y, fmt_float(self.mae[i])])
        return buf.getvalue()


def load_probes(path):
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    return [ProbeLocation(int(d["x"]), int(d["y"]), str(d.get("label", ""))) for d in items]


def save_probes(path, probes):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([{"x": p.x, "y": p.y, "label": p.label} for p in probes], fh, indent=2)
        fh.write("\n")


def default_probes(fmt, region=None):
    """3x3 grid over ``region = (x0, y0, x1, y1)`` (default: frame inset by 1/8)."""
    if region is None:
        region = (fmt.width // 8, fmt.height // 8, fmt.width - fmt.width // 8, fmt.height - fmt.height // 8)
    x0, y0, x1, y1 = region
    xs = np.linspace(x0, x1 - 1, 3).round().astype(int)
    ys = np.linspace(y0, y1 - 1, 3).round().astype(int)
    return [ProbeLocation(int(x), int(y), f"r{r}c{c}") for r, y in enumerate(ys) for c, x in enumerate(xs)]


def window_bounds(t, n, window):
    """Centred ``window``-frame span for frame ``t``; shifted inwards at the ends."""
    start = min(max(t - window // 2, 0), n - window)
    return start, start + window


def smooth_series(series, window) -> np.ndarray:
    s = [float(v) for v in series]
    n = len(s)
    if window < 1 or window > n:
        raise ConfigurationError(f"window {window} must be in [1, {n}]")
    out = np.empty(n)
    for t in range(n):
        a, b = window_bounds(t, n, window)
        out[t] = math.fsum(s[a:b]) / window
    return out


def mae(series, smoothed) -> float:
    """Mean absolute difference, summed with correct rounding."""
    a = np.asarray(series, dtype=np.float64).ravel()
    b = np.asarray(smoothed, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise DimensionError("empty series")
    return math.fsum(np.abs(a - b).tolist()) / a.size


def temporal_profile(video, probes, window=20) -> NoiseProfile:
    """Normalized luma time series at each probe, its moving average, and MAE."""
    fmt = video.format
    n = len(video)
    if window < 1 or window > n:
        raise ConfigurationError(f"window {window} exceeds the {n}-frame sequence")
    probes = list(probes)
    for p in probes:
        if not (0 <= p.x < fmt.width and 0 <= p.y < fmt.height):
            raise DimensionError(f"probe ({p.x}, {p.y}) outside {fmt.width}x{fmt.height}")
    ys = np.array([p.y for p in probes], dtype=int)
    xs = np.array([p.x for p in probes], dtype=int)
    raw = np.empty((len(probes), n))
    for t in range(n):
        raw[:, t] = video.read_frame(t).y[ys, xs]
    # smoothing and MAE run on integer codes so they stay exact; normalize last
    codes = [smooth_series(r, window) for r in raw]
    maes = [mae(r, m) / fmt.peak for r, m in zip(raw, codes)]
    series = [r / fmt.peak for r in raw]
    smoothed = [m / fmt.peak for m in codes]
    return NoiseProfile(probes, series, smoothed, maes, window)


@dataclass
class ProfileDelta:
    deltas: list
    improved: int
    worsened: int
    unchanged: int
    labels: list = field(default_factory=list)


def profile_delta(before: NoiseProfile, after: NoiseProfile) -> ProfileDelta:
    if [(p.x, p.y) for p in before.probes] != [(p.x, p.y) for p in after.probes]:
        raise ConfigurationError("profiles use different probe sets")
    if before.window != after.window:
        raise ConfigurationError("profiles use different smoothing windows")
    deltas = [a - b for a, b in zip(after.mae, before.mae)]
    return ProfileDelta(
        deltas,
        sum(d < 0 for d in deltas),
        sum(d > 0 for d in deltas),
        sum(d == 0 for d in deltas),
        [p.name(i) for i, p in enumerate(before.probes)],
    )


# --- denoising ---------------------------------------------------------------

DENOISE_KINDS = ("temporal-moving-average", "spatiotemporal-gaussian")


@dataclass(frozen=True)
class DenoiseConfig:
    kind: str = "temporal-moving-average"
    window: int = 5
    weights: tuple | None = None
    spatial_sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in DENOISE_KINDS:
            raise ConfigurationError(f"denoise kind must be one of {DENOISE_KINDS}")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigurationError(f"denoise window must be odd and >= 1, got {self.window}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (self.window,):
                raise ConfigurationError(f"need {self.window} weights, got {w.size}")
            if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
                raise ConfigurationError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.spatial_sigma < 0:
            raise ConfigurationError("spatial_sigma must be >= 0")

    def taps(self) -> np.ndarray:
        if self.weights is not None:
            return np.array(self.weights)
        if self.kind == "temporal-moving-average":
            return np.full(self.window, 1.0 / self.window)
        h = self.window // 2
        sigma = max(self.window / 4.0, 1e-6)
        g = np.exp(-0.5 * (np.arange(-h, h + 1) / sigma) ** 2)
        return g / g.sum()

    def to_dict(self):
        return {"kind": self.kind, "window": self.window, "weights": self.weights,
                "spatial_sigma": self.spatial_sigma}


def _round_half_up(x, peak):
    return np.clip(np.floor(x + 0.5), 0, peak).astype(np.uint16)


def iter_denoised(video, config: DenoiseConfig):
    """Yield denoised frames in order, holding at most ``window`` inputs in memory.

    Edge frames average over the part of the window inside the sequence with
    the surviving weights renormalized. The spatiotemporal kind also blurs
    each plane with a Gaussian (chroma sigma halved to cover the same area).
    """
    n = len(video)
    if config.window > n:
        raise ConfigurationError(f"denoise window {config.window} exceeds {n} frames")
    fmt = video.format
    taps = config.taps()
    h = config.window // 2
    spatial = config.kind == "spatiotemporal-gaussian" and config.spatial_sigma > 0
    cache = {}

    def load(i):
        if i not in cache:
            fr = video.read_frame(i)
            planes = {}
            for p in PLANES:
                a = fr.plane(p).astype(np.float64)
                if spatial:
                    s = config.spatial_sigma if p == "y" else config.spatial_sigma / 2
                    a = ndimage.gaussian_filter(a, s, mode="nearest")
                planes[p] = a
            cache[i] = planes
        return cache[i]

    for t in range(n):
        for k in [k for k in cache if k < t - h]:
            del cache[k]
        lo, hi = max(0, t - h), min(n - 1, t + h)
        idx = list(range(lo, hi + 1))
        w = taps[[i - t + h for i in idx]]
        w = w / w.sum()
        out = {}
        for p in PLANES:
            acc = np.zeros(fmt.plane_shape(p))
            for wi, i in zip(w, idx):
                acc += wi * load(i)[p]
            out[p] = _round_half_up(acc, fmt.peak)
        yield Frame(out["y"], out["u"], out["v"], fmt)


def denoise(video, config: DenoiseConfig) -> MemoryVideo:
    return MemoryVideo(video.format, list(iter_denoised(video, config)))


def denoise_to_file(video, config: DenoiseConfig, path):
    with VideoWriter(path, video.format) as w:
        for fr in iter_denoised(video, config):
            w.write(fr)
    return video.format.with_frames(len(video))
