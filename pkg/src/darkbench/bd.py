"""Bjontegaard delta rate / delta quality between rate-quality curves."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigurationError, CurveError
from .serial import fmt_float

METHODS = ("cubic-fit", "pchip")


@dataclass(frozen=True)
class RQPoint:
    rate: float
    quality: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise CurveError(f"rate must be positive and finite, got {self.rate}")
        if not math.isfinite(self.quality):
            raise CurveError(f"quality must be finite, got {self.quality}")


@dataclass
class RQCurve:
    label: str
    metric_id: str
    points: list = field(default_factory=list)
    sequence: str = ""

    def __post_init__(self):
        self.points = sorted(
            (p if isinstance(p, RQPoint) else RQPoint(float(p[0]), float(p[1])) for p in self.points),
            key=lambda p: p.rate,
        )
        r = self.rates
        if len(r) > 1 and np.any(np.diff(r) <= 0):
            raise CurveError(f"curve {self.label}/{self.metric_id}: duplicate rates")

    @classmethod
    def from_arrays(cls, label, metric_id, rates, qualities, sequence=""):
        return cls(label, metric_id, [RQPoint(float(r), float(q)) for r, q in zip(rates, qualities)], sequence)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points], dtype=np.float64)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points], dtype=np.float64)

    def __len__(self):
        return len(self.points)


@dataclass
class BdResult:
    bd_rate_pct: float
    bd_quality: float
    overlap: tuple
    method: str
    anchor: str = ""
    test: str = ""

    def to_dict(self):
        return {"bd_rate_pct": self.bd_rate_pct, "bd_quality": self.bd_quality,
                "overlap": list(self.overlap), "method": self.method,
                "anchor": self.anchor, "test": self.test}


@dataclass
class MonotonicityReport:
    monotone: bool
    direction: str
    spearman: float
    spearman_defined: bool


def check_monotonicity(curve: RQCurve) -> MonotonicityReport:
    """``monotone`` means strictly increasing quality; ``direction`` also
    recognises strictly decreasing curves (lower-is-better metrics)."""
    if len(curve) < 2:
        raise CurveError("monotonicity needs at least 2 points")
    d = np.diff(curve.qualities)
    direction = "increasing" if (d > 0).all() else "decreasing" if (d < 0).all() else "none"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.spearmanr(curve.rates, curve.qualities).statistic
    defined = bool(np.isfinite(rho))
    return MonotonicityReport(direction == "increasing", direction, float(rho) if defined else 0.0, defined)


# --- interpolation -----------------------------------------------------------

def _pchip_slopes(x, y):
    """Shape-preserving derivative estimates (weighted harmonic mean,
    one-sided three-point ends)."""
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    m = np.zeros(n)
    if n == 2:
        m[:] = delta[0]
        return m
    for k in range(1, n - 1):
        if delta[k - 1] * delta[k] > 0:
            w1 = 2 * h[k] + h[k - 1]
            w2 = h[k] + 2 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])

    def end(h0, h1, d0, d1):
        s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(s) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(s) > abs(3 * d0):
            return 3 * d0
        return s

    m[0] = end(h[0], h[1], delta[0], delta[1])
    m[-1] = end(h[-1], h[-2], delta[-1], delta[-2])
    return m


def _hermite_antideriv(t):
    t2, t3, t4 = t * t, t ** 3, t ** 4
    return (t4 / 2 - t3 + t, t4 / 4 - 2 * t3 / 3 + t2 / 2, -t4 / 2 + t3, t4 / 4 - t3 / 3)


def pchip_integral(x, y, lo, hi) -> float:
    """Exact integral over [lo, hi] of the monotone cubic Hermite through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = _pchip_slopes(x, y)
    total = 0.0
    for k in range(len(x) - 1):
        a, b = max(lo, x[k]), min(hi, x[k + 1])
        if b <= a:
            continue
        h = x[k + 1] - x[k]
        fa = _hermite_antideriv((a - x[k]) / h)
        fb = _hermite_antideriv((b - x[k]) / h)
        c = (y[k], h * m[k], y[k + 1], h * m[k + 1])
        total += h * sum(ci * (gb - ga) for ci, ga, gb in zip(c, fa, fb))
    return total


def _cubic_mean(x, y, lo, hi, degree):
    """Mean over [lo, hi] of the least-squares polynomial y(x), fitted in
    coordinates normalised to [-1, 1] over the interval."""
    c, s = (lo + hi) / 2, (hi - lo) / 2
    coef = np.polyfit((np.asarray(x) - c) / s, y, degree)
    anti = np.polyint(coef)
    return (np.polyval(anti, 1.0) - np.polyval(anti, -1.0)) / 2


def _interval_mean(x, y, lo, hi, method, degree):
    order = np.argsort(x)
    x, y = np.asarray(x)[order], np.asarray(y)[order]
    if method == "pchip":
        return pchip_integral(x, y, lo, hi) / (hi - lo)
    return _cubic_mean(x, y, lo, hi, degree)


def _validate(curve: RQCurve, allow_three: bool):
    need = 3 if allow_three else 4
    if len(curve) < need:
        raise CurveError(f"curve {curve.label}/{curve.metric_id} has {len(curve)} points, need {need}")
    d = np.diff(curve.qualities)
    if not ((d > 0).all() or (d < 0).all()):
        raise CurveError(f"curve {curve.label}/{curve.metric_id}: quality is not strictly monotone in rate")


def _check_method(method):
    if method not in METHODS:
        raise ConfigurationError(f"unknown BD method {method!r}; choose from {METHODS}")


def _overlap(a, b):
    lo, hi = max(a.min(), b.min()), min(a.max(), b.max())
    if not hi > lo:
        raise CurveError(f"curves do not overlap ([{a.min()}, {a.max()}] vs [{b.min()}, {b.max()}])")
    return float(lo), float(hi)


def _bd_quality(anchor, test, method, degree):
    la, lt = np.log10(anchor.rates), np.log10(test.rates)
    lo, hi = _overlap(la, lt)
    return (_interval_mean(lt, test.qualities, lo, hi, method, degree)
            - _interval_mean(la, anchor.qualities, lo, hi, method, degree))


def bd_rate(anchor: RQCurve, test: RQCurve, method="cubic-fit", allow_three=False) -> BdResult:
    """Average log-rate gap at equal quality, as a percentage (negative = saving).

    The quality-domain dual is filled in when the log-rate ranges overlap,
    otherwise it is NaN.
    """
    _check_method(method)
    _validate(anchor, allow_three)
    _validate(test, allow_three)
    degree = 3 if min(len(anchor), len(test)) >= 4 else 2
    qa, qt = anchor.qualities, test.qualities
    lo, hi = _overlap(qa, qt)
    delta = (_interval_mean(qt, np.log10(test.rates), lo, hi, method, degree)
             - _interval_mean(qa, np.log10(anchor.rates), lo, hi, method, degree))
    try:
        dq = _bd_quality(anchor, test, method, degree)
    except CurveError:
        dq = float("nan")
    return BdResult(100.0 * (10.0 ** delta - 1.0), float(dq), (lo, hi), method, anchor.label, test.label)


def bd_quality(anchor: RQCurve, test: RQCurve, method="cubic-fit", allow_three=False) -> float:
    """Average quality gap over the shared log-rate range (positive = gain
    for higher-is-better metrics)."""
    _check_method(method)
    _validate(anchor, allow_three)
    _validate(test, allow_three)
    degree = 3 if min(len(anchor), len(test)) >= 4 else 2
    return float(_bd_quality(anchor, test, method, degree))


def bd_both(anchor: RQCurve, test: RQCurve, allow_three=False) -> dict:
    return {m: bd_rate(anchor, test, m, allow_three) for m in METHODS}


# --- CSV ---------------------------------------------------------------------

CURVE_COLUMNS = ("sequence", "label", "metric", "rate_kbps", "quality")


def curves_to_csv(curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for c in curves:
        for p in c.points:
            w.writerow([c.sequence, c.label, c.metric_id, fmt_float(p.rate), fmt_float(p.quality)])
    return buf.getvalue()


def curves_from_csv(text) -> list:
    """Parse curve rows; the ``sequence`` column is optional."""
    reader = csv.DictReader(io.StringIO(text))
    missing = {"label", "metric", "rate_kbps", "quality"} - set(reader.fieldnames or ())
    if missing:
        raise CurveError(f"curve CSV lacks columns {sorted(missing)}")
    groups = {}
    for row in reader:
        key = (row.get("sequence") or "", row["label"], row["metric"])
        try:
            groups.setdefault(key, []).append(RQPoint(float(row["rate_kbps"]), float(row["quality"])))
        except ValueError as e:
            raise CurveError(f"bad curve row {row}: {e}") from None
    return [RQCurve(label, metric, pts, seq) for (seq, label, metric), pts in groups.items()]


def load_curves(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return curves_from_csv(fh.read())


def save_curves(path, curves):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(curves_to_csv(curves))
