import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import constant_video, random_video
from darkbench.errors import ConfigurationError, DimensionError
from darkbench.noise import (
    DenoiseConfig,
    ProbeLocation,
    default_probes,
    denoise,
    denoise_to_file,
    load_probes,
    mae,
    profile_delta,
    save_probes,
    smooth_series,
    temporal_profile,
    window_bounds,
)
from darkbench.yuv import MemoryVideo, VideoFormat, open_yuv


def luma_video(ys, bit_depth=10):
    ys = np.asarray(ys, dtype=np.uint16)
    fmt = VideoFormat(ys.shape[2], ys.shape[1], bit_depth, 30, ys.shape[0])
    return MemoryVideo.from_planes(fmt, ys)


def test_constant_video_zero_mae():
    v = constant_video(VideoFormat(16, 16, 10), 30, 123)
    prof = temporal_profile(v, default_probes(v.format), window=20)
    assert prof.mae == [0.0] * 9


@pytest.mark.parametrize("a", [1, 7, 250])
def test_alternating_mae_exact(a):
    n = 40
    vals = np.where(np.arange(n) % 2 == 0, 500 + a, 500 - a)
    v = luma_video(np.broadcast_to(vals[:, None, None], (n, 8, 8)))
    prof = temporal_profile(v, [ProbeLocation(3, 4)], window=20)
    assert prof.mae[0] == a / v.format.peak


def test_moving_average_variance():
    rng = np.random.default_rng(5)
    ys = np.clip(np.rint(512 + rng.normal(0, 20, (1000, 32, 32))), 0, 1023)
    v = luma_video(ys)
    probes = [ProbeLocation(x, y) for y in range(0, 32, 4) for x in range(0, 32, 4)]
    var = np.mean([np.var(s) for s in temporal_profile(v, probes, window=1).series])
    for w in (5, 10, 20):
        prof = temporal_profile(v, probes, window=w)
        got = np.mean([np.var(s) for s in prof.smoothed])
        assert got == pytest.approx(var / w, rel=0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 60), st.data())
def test_window_bounds_full_length(n, data):
    w = data.draw(st.integers(1, n))
    t = data.draw(st.integers(0, n - 1))
    a, b = window_bounds(t, n, w)
    assert b - a == w and 0 <= a and b <= n
    if w // 2 <= t < n - w + w // 2:
        assert a == t - w // 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.data())
def test_smoothing_within_range(xs, data):
    w = data.draw(st.integers(1, len(xs)))
    s = smooth_series(xs, w)
    assert s.min() >= min(xs) - 1e-6 and s.max() <= max(xs) + 1e-6
    assert mae(xs, s) >= 0


def test_window_errors():
    with pytest.raises(ConfigurationError):
        smooth_series([1.0, 2.0], 3)
    v = constant_video(VideoFormat(8, 8, 8), 5, 10)
    with pytest.raises(ConfigurationError):
        temporal_profile(v, [ProbeLocation(0, 0)], window=20)
    with pytest.raises(DimensionError):
        temporal_profile(v, [ProbeLocation(8, 0)], window=2)
    with pytest.raises(DimensionError):
        mae([1.0], [1.0, 2.0])


def test_default_probes_inside_region():
    fmt = VideoFormat(64, 48, 8)
    ps = default_probes(fmt)
    assert len(ps) == 9 and len({(p.x, p.y) for p in ps}) == 9
    assert all(8 <= p.x < 56 and 6 <= p.y < 42 for p in ps)
    ps = default_probes(fmt, (10, 10, 13, 13))
    assert {p.x for p in ps} == {10, 11, 12}


def test_probe_file_round_trip(tmp_path):
    ps = [ProbeLocation(1, 2, "dark"), ProbeLocation(5, 6)]
    save_probes(tmp_path / "p.json", ps)
    assert load_probes(tmp_path / "p.json") == ps


def test_profile_csv_layout(rng):
    v = random_video(VideoFormat(8, 8, 10), 6, rng)
    prof = temporal_profile(v, [ProbeLocation(1, 1), ProbeLocation(2, 2, "b")], window=3)
    lines = prof.to_csv().splitlines()
    assert lines[0] == "probe,frame,raw,smoothed" and len(lines) == 13
    assert lines[7].startswith("b,0,")
    assert prof.summary_csv().splitlines()[1].startswith("p0,1,1,")


def test_profile_delta_counts(rng):
    v = random_video(VideoFormat(16, 16, 10), 20, rng)
    probes = default_probes(v.format)
    before = temporal_profile(v, probes, window=5)
    after = temporal_profile(denoise(v, DenoiseConfig(window=5)), probes, window=5)
    d = profile_delta(before, after)
    assert d.improved + d.worsened + d.unchanged == 9
    assert d.improved == 9
    with pytest.raises(ConfigurationError):
        profile_delta(before, temporal_profile(v, probes, window=4))


# --- denoising ---------------------------------------------------------------

def test_denoise_config_validation():
    for bad in (dict(window=4), dict(window=0), dict(kind="median"), dict(window=3, weights=(0.5, 0.5)),
                dict(window=3, weights=(0.5, 0.6, -0.1))):
        with pytest.raises(ConfigurationError):
            DenoiseConfig(**bad)
    assert DenoiseConfig(window=3, weights=(0.25, 0.5, 0.25)).taps().sum() == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["temporal-moving-average", "spatiotemporal-gaussian"])
def test_denoise_constant_is_fixed_point(kind):
    v = constant_video(VideoFormat(16, 8, 10), 7, 321)
    out = denoise(v, DenoiseConfig(kind, window=5))
    for a, b in zip(v, out):
        assert np.array_equal(a.y, b.y) and np.array_equal(a.u, b.u)


def test_denoise_edge_renormalization():
    ys = np.arange(5, dtype=np.uint16)[:, None, None] * np.ones((1, 4, 4), np.uint16) * 10
    out = denoise(luma_video(ys), DenoiseConfig(window=3))
    got = [int(f.y[0, 0]) for f in out]
    assert got == [5, 10, 20, 30, 35]


def test_denoise_reduces_temporal_noise(rng):
    fmt = VideoFormat(16, 16, 10)
    ys = np.clip(np.rint(500 + rng.normal(0, 20, (30, 16, 16))), 0, 1023)
    v = luma_video(ys)
    out = denoise(v, DenoiseConfig(window=5))
    before = np.stack([f.y for f in v]).astype(float).std(axis=0).mean()
    after = np.stack([f.y for f in out]).astype(float)[2:-2].std(axis=0).mean()
    assert after < before / 1.8
    assert fmt.same_geometry(out.format)


def test_denoise_to_file_matches_memory(tmp_path, rng):
    v = random_video(VideoFormat(8, 8, 8), 6, rng)
    cfg = DenoiseConfig("spatiotemporal-gaussian", 3)
    fmt = denoise_to_file(v, cfg, tmp_path / "d.yuv")
    back = open_yuv(tmp_path / "d.yuv", fmt)
    for a, b in zip(denoise(v, cfg), (back.read_frame(i) for i in range(len(back)))):
        assert np.array_equal(a.y, b.y) and np.array_equal(a.v, b.v)


def test_denoise_window_too_long(rng):
    with pytest.raises(ConfigurationError):
        denoise(random_video(VideoFormat(8, 8, 8), 2, rng), DenoiseConfig(window=5))
