"""Hitting a target bitrate with static QP plus a one-step QP increment frame."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import AdapterError, ConfigurationError, UnreachableTargetError
from .codec import CodecAdapter, EncodeCache, RunResult, encode

QP_MIN, QP_MAX = 0, 63
FLOOR_PCT = 5.0
SECANT_STEPS = 6


@dataclass(frozen=True)
class RatePlan:
    sequence: str
    targets: tuple
    tolerance_pct: float = 3.0

    def __post_init__(self):
        t = tuple(float(x) for x in self.targets)
        if not t or any(x <= 0 for x in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigurationError(f"rate plan {self.sequence}: targets must be positive and increasing")
        if self.tolerance_pct <= 0:
            raise ConfigurationError("tolerance must be > 0")
        object.__setattr__(self, "targets", t)

    @property
    def labels(self):
        return [f"Rate{i + 1}" for i in range(len(self.targets))]


def hit_target_rate(adapter: CodecAdapter, input_path, fmt, target, tolerance_pct=3.0,
                    cache: EncodeCache | None = None, floor_pct=FLOOR_PCT) -> RunResult:
    """Find (qp, qpif frame) whose rate lies in ``[T*(1-floor), T*(1+tol)]``.

    Bisection brackets adjacent QPs ``qa, qa+1`` with ``R(qa) > ceiling >=
    R(qa+1)``. If ``R(qa+1)`` is already above the floor it is taken; otherwise
    the switch frame is interpolated between the two rates and refined by
    secant steps. A result above the ceiling is never returned; when no probe
    lands in the band the closest one below the ceiling comes back with
    ``in_tolerance = False``.
    """
    if target <= 0:
        raise ConfigurationError("target rate must be > 0")
    if cache is None:
        raise ConfigurationError("hit_target_rate needs an EncodeCache")
    ceiling = target * (1 + tolerance_pct / 100.0)
    floor = target * (1 - floor_pct / 100.0)
    frames = fmt.frame_count
    rates = {}
    trace = []

    def rate(qp, f=None, force=False):
        k = (qp, f)
        if k not in rates or force:
            r = encode(adapter, input_path, fmt, qp, f, cache=cache, decode=False, force=force)
            rates[k] = r.bitrate_kbps
            trace.append({"qp": qp, "qpif": f, "kbps": r.bitrate_kbps})
        return rates[k]

    def finish(qp, f, ok):
        res = encode(adapter, input_path, fmt, qp, f, cache=cache, decode=True)
        res.in_tolerance = ok
        res.trace = list(trace)
        return res

    r_hi, r_lo = rate(QP_MIN), rate(QP_MAX)
    if r_lo > ceiling:
        raise UnreachableTargetError(f"target {target:g} kbps is below the lowest rate {r_lo:g} kbps (QP {QP_MAX})")
    if r_hi < floor:
        raise UnreachableTargetError(f"target {target:g} kbps is above the highest rate {r_hi:g} kbps (QP {QP_MIN})")
    if r_hi <= ceiling:
        return finish(QP_MIN, None, True)

    lo, hi = QP_MIN, QP_MAX
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate(mid) > ceiling:
            lo = mid
        else:
            hi = mid
    _check_monotone(rates, rate)

    qa, qb = lo, hi
    ra, rb = rates[(qa, None)], rates[(qb, None)]
    if rb >= floor:
        return finish(qb, None, True)
    if not adapter.supports_qpif:
        return finish(qb, None, False)

    # R(qa, f) runs from R(qb) at f = 0 to R(qa) at f = frames
    def clamp(f):
        return min(max(int(round(f)), 0), frames)

    pts = [(0, rb), (frames, ra)]
    f = clamp(frames * (target - rb) / (ra - rb))
    best = (qb, None, rb)
    for _ in range(1 + SECANT_STEPS):
        r = rate(qa, f)
        if floor <= r <= ceiling:
            return finish(qa, f, True)
        if r <= ceiling and r > best[2]:
            best = (qa, f, r)
        pts.append((f, r))
        below = max((p for p in pts if p[1] < target), key=lambda p: p[1])
        above = min((p for p in pts if p[1] >= target), key=lambda p: p[1])
        if above[0] == below[0] or abs(above[0] - below[0]) <= 1:
            break
        nf = clamp(below[0] + (target - below[1]) * (above[0] - below[0]) / (above[1] - below[1]))
        if nf in (below[0], above[0]):
            nf = below[0] + (1 if above[0] > below[0] else -1)
        f = nf
    return finish(best[0], best[1], False)


def _check_monotone(rates, rate):
    """Rates must not increase with QP; offending probes are re-run once."""
    def bad():
        qs = sorted(q for q, f in rates if f is None)
        return [(a, b) for a, b in zip(qs, qs[1:]) if rates[(b, None)] > rates[(a, None)]]

    pairs = bad()
    if not pairs:
        return
    for a, b in pairs:
        rate(a, force=True)
        rate(b, force=True)
    pairs = bad()
    if pairs:
        raise AdapterError(f"rate increases with QP between {pairs}")
