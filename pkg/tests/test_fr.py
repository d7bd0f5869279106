import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_video
from darkbench.errors import DimensionError, FormatMismatchError
from darkbench.fr import (
    MS_SSIM_WEIGHTS,
    PSNR_CLAMP_DB,
    SsimConfig,
    fr_sequence,
    mean_pool,
    ms_ssim_frame,
    psnr_plane,
    psnr_sequence,
    scores_to_csv,
    ssim_downsample_factor,
    ssim_frame,
)
from darkbench.synthetic import add_noise, natural_image
from darkbench.yuv import Frame, MemoryVideo, VideoFormat


def ssim_const(c, d, peak=255.0):
    c1 = (0.01 * peak) ** 2
    return (2 * c * (c + d) + c1) / (c * c + (c + d) ** 2 + c1)


def test_psnr_closed_forms():
    ref = np.full((64, 64), 500, np.uint16)
    assert psnr_plane(ref, ref + 1, 1023) == pytest.approx(20 * math.log10(1023), abs=1e-9)
    assert psnr_plane(ref, ref + 1, 1023) == pytest.approx(60.1975, abs=1e-3)
    assert psnr_plane(ref, ref, 1023) == PSNR_CLAMP_DB
    half = ref.copy()
    half[:32] += 2
    assert psnr_plane(ref, half, 1023) == pytest.approx(57.187, abs=1e-3)


def test_psnr_dimension_mismatch():
    with pytest.raises(DimensionError):
        psnr_plane(np.zeros((4, 4)), np.zeros((4, 5)), 255)


def _pair_video(fmt, offsets):
    ref = MemoryVideo.from_planes(fmt, np.full((len(offsets),) + fmt.luma_shape, 400, np.uint16))
    dist = MemoryVideo.from_planes(fmt, np.stack([np.full(fmt.luma_shape, 400 + o, np.uint16) for o in offsets]))
    return ref, dist


def test_psnr_sequence_poolings():
    fmt = VideoFormat(16, 16, 10)
    ref, dist = _pair_video(fmt, [1, 3])
    s = psnr_sequence(ref, dist)
    assert s.pooled == pytest.approx(np.mean(s.values), abs=1e-12)
    m = psnr_sequence(ref, dist, pooling="psnr-of-mean-mse")
    assert m.pooled == pytest.approx(10 * math.log10(1023 ** 2 / 5.0), abs=1e-9)
    assert m.pooling == "psnr-of-mean-mse"
    assert mean_pool([40.0, 50.0]) == 45.0


def test_psnr_sequence_mismatch(rng):
    fmt = VideoFormat(16, 16, 10)
    with pytest.raises(FormatMismatchError):
        psnr_sequence(random_video(fmt, 3, rng), random_video(fmt, 2, rng))


def test_psnr_chroma_planes(rng):
    fmt = VideoFormat(16, 16, 8)
    v = random_video(fmt, 2, rng)
    for plane in "uv":
        assert fr_sequence(f"psnr-{plane}", v, v).pooled == PSNR_CLAMP_DB


def test_ssim_identity_and_constant_shift(rng):
    img = natural_image((128, 128), rng)
    assert ssim_frame(img, img) == pytest.approx(1.0, abs=1e-9)
    for c, d in [(50.0, 10.0), (128.0, -30.0), (3.0, 200.0)]:
        a = np.full((64, 64), c)
        assert ssim_frame(a, a + d) == pytest.approx(ssim_const(c, d), abs=1e-6)


def test_ssim_symmetry_and_range(rng):
    a = rng.uniform(0, 255, (80, 90))
    b = rng.uniform(0, 255, (80, 90))
    s = ssim_frame(a, b)
    assert abs(s - ssim_frame(b, a)) <= 1e-12
    assert -1 <= s <= 1


def test_ssim_downsample_factor():
    assert ssim_downsample_factor((1080, 1920)) == 4
    assert ssim_downsample_factor((100, 100)) == 1
    assert ssim_downsample_factor((384, 384)) == 2


def test_ssim_too_small():
    with pytest.raises(DimensionError):
        ssim_frame(np.zeros((10, 10)), np.zeros((10, 10)))


def test_ssim_without_downsample_differs_on_large_noise(rng):
    a = rng.uniform(0, 255, (512, 512))
    b = add_noise(a, 20, rng)
    on = ssim_frame(a, b)
    off = ssim_frame(a, b, SsimConfig(downsample=False))
    assert on != off


def test_ms_ssim_identity_constant_symmetry(rng):
    img = natural_image((192, 192), rng)
    assert ms_ssim_frame(img, img) == pytest.approx(1.0, abs=1e-9)
    c, d = 100.0, 25.0
    a = np.full((176, 176), c)
    expect = ssim_const(c, d) ** MS_SSIM_WEIGHTS[-1]
    assert ms_ssim_frame(a, a + d) == pytest.approx(expect, abs=1e-6)
    b = add_noise(img, 15, rng)
    assert abs(ms_ssim_frame(img, b) - ms_ssim_frame(b, img)) <= 1e-12


def test_ms_ssim_too_small():
    with pytest.raises(DimensionError):
        ms_ssim_frame(np.zeros((64, 64)), np.zeros((64, 64)))


def test_noise_lowers_psnr_and_ssim(rng):
    img = natural_image((128, 128), rng)
    psnrs, ssims = [], []
    for sigma in (2, 5, 10, 20):
        noisy = np.rint(add_noise(img, sigma, np.random.default_rng(7)))
        psnrs.append(psnr_plane(img, noisy, 255))
        ssims.append(ssim_frame(img, noisy))
    assert all(np.diff(psnrs) < 0) and all(np.diff(ssims) < 0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1e6, allow_nan=False), st.floats(0.0, 1e6, allow_nan=False))
def test_psnr_monotone_in_mse(m1, m2):
    from darkbench.fr import psnr_from_mse

    if m1 < m2:
        assert psnr_from_mse(m1, 255) >= psnr_from_mse(m2, 255)


def test_scores_csv_layout():
    fmt = VideoFormat(16, 16, 10)
    ref, dist = _pair_video(fmt, [1, 1])
    text = scores_to_csv([psnr_sequence(ref, dist)])
    lines = text.strip().split("\n")
    assert lines[0] == "frame,metric,plane,value"
    assert lines[-1].startswith("pooled,psnr-y,y,")
    assert len(lines) == 4


def test_ssim_sequence_on_frames():
    fmt = VideoFormat(32, 32, 8)
    y = np.full((2, 32, 32), 90, np.uint16)
    ref = MemoryVideo.from_planes(fmt, y)
    dist = MemoryVideo.from_planes(fmt, y + 10)
    s = fr_sequence("ssim", ref, dist)
    assert s.pooled == pytest.approx(ssim_const(90, 10), abs=1e-6)
    assert isinstance(ref.read_frame(0), Frame)
