"""Generated test content: natural-like stills, gratings and noisy dark clips."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .yuv import MemoryVideo, VideoFormat


def natural_image(shape, rng, slope=2.0, contrast=40.0, mean=128.0, shapes=6, grain=1.0):
    """A [0, 255] integer-valued still: ``1/f**slope`` amplitude spectrum, a few
    soft-edged blobs and faint sensor grain."""
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    amp = f ** (-slope)
    amp[0, 0] = 0.0
    phase = rng.uniform(0, 2 * np.pi, amp.shape)
    field = np.fft.irfft2(amp * np.exp(1j * phase), s=(h, w))
    field = (field - field.mean()) / field.std()
    img = mean + contrast * field
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(shapes):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.05, 0.2) * min(h, w)
        mask = ((yy - cy) ** 2 + (xx - cx) ** 2 < r * r).astype(np.float64)
        img += rng.uniform(-50, 50) * ndimage.gaussian_filter(mask, 1.0)
    if grain:
        img = img + rng.normal(0, grain, img.shape)
    return np.clip(np.rint(img), 0, 255)


def add_noise(img, sigma, rng):
    return np.clip(img + rng.normal(0, sigma, img.shape), 0, 255)


def grating(shape, period=8.0, phase=0.0, amplitude=100.0, mean=128.0, horizontal=True):
    """Sinusoid varying along rows (horizontal stripes) or columns."""
    h, w = shape
    axis = np.arange(h if horizontal else w, dtype=np.float64)
    wave = mean + amplitude * np.sin(2 * np.pi * axis / period + phase)
    return np.repeat(wave[:, None], w, axis=1) if horizontal else np.repeat(wave[None, :], h, axis=0)


def dark_scene(shape, rng, peak=1023, level=0.12):
    """Static low-light luma: a natural image squeezed into the bottom of the range."""
    base = natural_image(shape, rng, contrast=45.0, mean=110.0) / 255.0
    return base * (2 * level) * peak


def noisy_dark_sequence(width=256, height=256, frames=64, bit_depth=10, fps="60", rng=None,
                        noise_floor=4.0, noise_dark=10.0):
    """Static dark scene with temporally iid noise that is stronger in dark areas.

    Noise standard deviation (in sample codes) is ``noise_floor`` at the
    brightest pixel rising to ``noise_floor + noise_dark`` at black.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    fmt = VideoFormat.from_fps(width, height, bit_depth, fps, frames)
    peak = fmt.peak
    scene = dark_scene(fmt.luma_shape, rng, peak)
    rel = scene / max(scene.max(), 1.0)
    sigma = noise_floor + noise_dark * (1.0 - rel)
    cu = ndimage.zoom(scene, 0.5, order=1) * 0.0 + (peak + 1) / 2
    ys, us, vs = [], [], []
    for _ in range(frames):
        y = np.clip(np.rint(scene + rng.normal(0, 1, scene.shape) * sigma), 0, peak)
        ys.append(y.astype(np.uint16))
        us.append(np.clip(np.rint(cu + rng.normal(0, 2, cu.shape)), 0, peak).astype(np.uint16))
        vs.append(np.clip(np.rint(cu + rng.normal(0, 2, cu.shape)), 0, peak).astype(np.uint16))
    return MemoryVideo.from_planes(fmt, np.stack(ys), np.stack(us), np.stack(vs))
