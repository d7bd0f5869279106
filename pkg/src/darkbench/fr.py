"""Full-reference metrics: PSNR per plane, SSIM and MS-SSIM on luma."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DimensionError, FormatMismatchError
from .serial import dumps, fmt_float

PSNR_CLAMP_DB = 100.0
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
POOLINGS = ("mean", "psnr-of-mean-mse")


@dataclass
class FrameScore:
    frame_index: int
    value: float


@dataclass
class SequenceScore:
    metric_id: str
    plane: str
    per_frame: list
    pooled: float
    pooling: str = "mean"
    meta: dict = field(default_factory=dict)

    @property
    def values(self):
        return np.array([fs.value for fs in self.per_frame], dtype=np.float64)

    def to_dict(self):
        return {
            "metric": self.metric_id,
            "plane": self.plane,
            "pooling": self.pooling,
            "pooled": self.pooled,
            "per_frame": [[fs.frame_index, fs.value] for fs in self.per_frame],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["metric"],
            d["plane"],
            [FrameScore(int(i), float(v)) for i, v in d["per_frame"]],
            float(d["pooled"]) if d["pooled"] is not None else math.nan,
            d.get("pooling", "mean"),
            dict(d.get("meta", {})),
        )


def mean_pool(values) -> float:
    """Arithmetic mean with correctly rounded summation (order independent)."""
    values = [float(v) for v in values]
    return math.fsum(values) / len(values)


def _mse(ref, dist) -> float:
    ref = np.asarray(ref)
    dist = np.asarray(dist)
    if ref.shape != dist.shape:
        raise DimensionError(f"plane shapes differ: {ref.shape} vs {dist.shape}")
    d = ref.astype(np.float64) - dist.astype(np.float64)
    return float(np.mean(d * d))


def psnr_from_mse(mse, peak) -> float:
    if mse <= 0:
        return PSNR_CLAMP_DB
    return 10.0 * math.log10(float(peak) ** 2 / mse)


def psnr_plane(ref, dist, peak) -> float:
    """PSNR in dB; identical planes give the 100 dB clamp."""
    return psnr_from_mse(_mse(ref, dist), peak)


def _check_pair(ref_video, dist_video):
    if not ref_video.format.same_geometry(dist_video.format):
        raise FormatMismatchError("reference and distorted videos differ in geometry or bit depth")
    if len(ref_video) != len(dist_video):
        raise FormatMismatchError(
            f"frame counts differ: reference {len(ref_video)}, distorted {len(dist_video)}"
        )


def _per_frame(fn, n, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def psnr_sequence(ref_video, dist_video, plane="y", pooling="mean", workers=1) -> SequenceScore:
    if pooling not in POOLINGS:
        raise ValueError(f"pooling must be one of {POOLINGS}")
    _check_pair(ref_video, dist_video)
    peak = ref_video.format.peak

    def one(i):
        return _mse(ref_video.read_frame(i).plane(plane), dist_video.read_frame(i).plane(plane))

    mses = _per_frame(one, len(ref_video), workers)
    per_frame = [FrameScore(i, psnr_from_mse(m, peak)) for i, m in enumerate(mses)]
    if pooling == "mean":
        pooled = mean_pool(fs.value for fs in per_frame)
    else:
        pooled = psnr_from_mse(mean_pool(mses), peak)
    return SequenceScore(f"psnr-{plane}", plane, per_frame, pooled, pooling, {"mse": mses})


# --- SSIM family -----------------------------------------------------------

def _gaussian_1d(size=11, sigma=1.5):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


_WINDOW = _gaussian_1d()


def _filter_valid(img, w=_WINDOW):
    r = len(w) // 2
    out = ndimage.correlate1d(img, w, axis=0, mode="constant")
    out = ndimage.correlate1d(out, w, axis=1, mode="constant")
    return out[r:-r, r:-r]


def _ssim_maps(x, y, peak):
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu1 = _filter_valid(x)
    mu2 = _filter_valid(y)
    s11 = _filter_valid(x * x) - mu1 * mu1
    s22 = _filter_valid(y * y) - mu2 * mu2
    s12 = _filter_valid(x * y) - mu1 * mu2
    lum = (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1)
    cs = (2 * s12 + c2) / (s11 + s22 + c2)
    return lum, cs


def block_mean(img, f):
    """Mean over non-overlapping ``f x f`` blocks; trailing rows/cols dropped."""
    if f == 1:
        return img
    h, w = (img.shape[0] // f) * f, (img.shape[1] // f) * f
    return img[:h, :w].reshape(h // f, f, w // f, f).mean(axis=(1, 3))


def ssim_downsample_factor(shape) -> int:
    return max(1, int(math.floor(min(shape) / 256 + 0.5)))


@dataclass(frozen=True)
class SsimConfig:
    peak: float = 255.0
    downsample: bool = True


def ssim_frame(ref, dist, config: SsimConfig | None = None, peak=None) -> float:
    """Mean SSIM over valid 11x11 Gaussian window positions.

    With ``config.downsample`` the planes are first reduced by
    ``round(min(H, W) / 256)`` using block means, as the reference
    implementation does for large content.
    """
    config = config or SsimConfig()
    if peak is not None:
        config = SsimConfig(peak, config.downsample)
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(dist, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"plane shapes differ: {x.shape} vs {y.shape}")
    if config.downsample:
        f = ssim_downsample_factor(x.shape)
        x, y = block_mean(x, f), block_mean(y, f)
    if min(x.shape) < 11:
        raise DimensionError(f"SSIM needs at least 11x11 samples, got {x.shape}")
    lum, cs = _ssim_maps(x, y, config.peak)
    return float(np.mean(lum * cs))


def ms_ssim_frame(ref, dist, peak=255.0, weights=MS_SSIM_WEIGHTS) -> float:
    """Five-scale MS-SSIM; luminance enters at the coarsest scale only.

    Negative contrast-structure means are clamped to zero before the
    fractional powers are taken.
    """
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(dist, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"plane shapes differ: {x.shape} vs {y.shape}")
    scales = len(weights)
    need = 11 * 2 ** (scales - 1)
    if min(x.shape) < need:
        raise DimensionError(f"MS-SSIM with {scales} scales needs min dimension >= {need}, got {x.shape}")
    result = 1.0
    for j, w in enumerate(weights):
        lum, cs = _ssim_maps(x, y, peak)
        cs_mean = max(float(np.mean(cs)), 0.0)
        result *= cs_mean ** w
        if j == scales - 1:
            result *= max(float(np.mean(lum)), 0.0) ** w
        else:
            x, y = block_mean(x, 2), block_mean(y, 2)
    return result


def ssim_sequence(ref_video, dist_video, config: SsimConfig | None = None, workers=1) -> SequenceScore:
    _check_pair(ref_video, dist_video)
    cfg = config or SsimConfig(peak=ref_video.format.peak)

    def one(i):
        return ssim_frame(ref_video.read_frame(i).y, dist_video.read_frame(i).y, cfg)

    vals = _per_frame(one, len(ref_video), workers)
    per_frame = [FrameScore(i, v) for i, v in enumerate(vals)]
    return SequenceScore("ssim", "y", per_frame, mean_pool(vals), "mean", {"downsample": cfg.downsample})


def ms_ssim_sequence(ref_video, dist_video, workers=1) -> SequenceScore:
    _check_pair(ref_video, dist_video)
    peak = ref_video.format.peak

    def one(i):
        return ms_ssim_frame(ref_video.read_frame(i).y, dist_video.read_frame(i).y, peak)

    vals = _per_frame(one, len(ref_video), workers)
    per_frame = [FrameScore(i, v) for i, v in enumerate(vals)]
    return SequenceScore("ms-ssim", "y", per_frame, mean_pool(vals), "mean")


FR_METRICS = ("psnr-y", "psnr-u", "psnr-v", "ssim", "ms-ssim")


def fr_sequence(metric, ref_video, dist_video, pooling="mean", workers=1) -> SequenceScore:
    metric = metric.lower()
    if metric.startswith("psnr-"):
        return psnr_sequence(ref_video, dist_video, metric[-1], pooling, workers)
    if metric == "ssim":
        return ssim_sequence(ref_video, dist_video, workers=workers)
    if metric == "ms-ssim":
        return ms_ssim_sequence(ref_video, dist_video, workers=workers)
    raise ConfigurationError(f"unknown full-reference metric {metric!r}; choose from {FR_METRICS}")


def scores_to_csv(scores) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "metric", "plane", "value"])
    for s in scores:
        for fs in s.per_frame:
            w.writerow([fs.frame_index, s.metric_id, s.plane, fmt_float(fs.value)])
        w.writerow(["pooled", s.metric_id, s.plane, fmt_float(s.pooled)])
    return buf.getvalue()


def scores_to_json(scores) -> str:
    return dumps([s.to_dict() for s in scores])
