import numpy as np
import pytest

from darkbench.yuv import Frame, MemoryVideo, VideoFormat


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_frame(fmt, rng):
    hi = fmt.peak + 1
    return Frame(
        rng.integers(0, hi, fmt.luma_shape, dtype=np.uint16),
        rng.integers(0, hi, fmt.chroma_shape, dtype=np.uint16),
        rng.integers(0, hi, fmt.chroma_shape, dtype=np.uint16),
        fmt,
    )


def random_video(fmt, n, rng):
    return MemoryVideo(fmt, [random_frame(fmt, rng) for _ in range(n)])


def constant_video(fmt, n, value):
    return MemoryVideo(fmt, [Frame.blank(fmt, value) for _ in range(n)])


@pytest.fixture
def fmt10():
    return VideoFormat(32, 24, 10, 60, 1)


def random_rq_pair(rng, points=4):
    """Monotone concave rate-quality pair sharing most of their quality range."""
    r0 = rng.uniform(100, 2000)
    ratio = rng.uniform(1.3, 2.5)

    def curve(scale, offset):
        rates = r0 * scale * ratio ** np.arange(points) * rng.uniform(0.95, 1.05, points)
        rates.sort()
        u = np.log10(rates / r0)
        b, c = rng.uniform(5, 15), rng.uniform(0, 2)
        return rates, 30 + offset + b * u - c * u * u

    return curve(1.0, 0.0), curve(rng.uniform(0.75, 1.33), rng.uniform(-0.5, 0.5))


def bd_rate_oracle(anchor, test, method, grid=10_001):
    """Independent BD-rate: log-rate interpolants sampled on a fine quality grid
    and integrated with Simpson's rule."""
    from scipy.integrate import simpson
    from scipy.interpolate import PchipInterpolator

    (ra, qa), (rt, qt) = anchor, test
    lo, hi = max(qa.min(), qt.min()), min(qa.max(), qt.max())
    q = np.linspace(lo, hi, grid)

    def interp(r, qq):
        order = np.argsort(qq)
        if method == "pchip":
            return PchipInterpolator(qq[order], np.log10(r[order]))(q)
        return np.polyval(np.polyfit(qq, np.log10(r), len(qq) - 1 if len(qq) < 4 else 3), q)

    diff = simpson(interp(rt, qt) - interp(ra, qa), x=q) / (hi - lo)
    return 100.0 * (10.0 ** diff - 1.0)


ACCEPTANCE = []


def record(criterion, ok, detail=""):
    """Log one acceptance line; shown in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} {criterion}" + (f": {detail}" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
