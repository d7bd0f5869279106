"""PIQE: block-wise perceptual distortion score on MSCN coefficients.

Scores run 0..100, higher meaning worse. Every distorted block adds one to
the numerator; ``score = 100 * (distorted + C) / (active + C)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError
from .nss import compute_mscn

BLOCK = 16
ACTIVITY_THRESHOLD = 0.1
SEGMENT_THRESHOLD = 0.1
SEGMENT = 6
C = 1.0

NOISE_CRITERION = (
    "std(block) > 2*beta, beta = |std(block) - r| / max(std(block), r), "
    "r = std(two centre columns) / std(remaining columns)"
)


@dataclass
class PiqeResult:
    score: float
    active_block_count: int
    distorted_block_count: int
    artifact_mask: np.ndarray
    noise_mask: np.ndarray
    meta: dict = field(default_factory=dict)


def piqe_from_counts(distorted, active, c=C) -> float:
    return 100.0 * (distorted + c) / (active + c)


def _noise_mask(blocks, block_std):
    """Blocks whose spread is large relative to the centre/surround mismatch."""
    b = blocks.shape[-1]
    c0 = (b - 1) // 2
    centre = blocks[..., :, c0:c0 + 2]
    surround = np.concatenate([blocks[..., :, :c0], blocks[..., :, c0 + 2:]], axis=-1)
    cs = centre.std(axis=(-1, -2))
    ss = surround.std(axis=(-1, -2))
    ratio = np.divide(cs, ss, out=np.zeros_like(cs), where=ss > 0)
    top = np.maximum(block_std, ratio)
    beta = np.divide(np.abs(block_std - ratio), top, out=np.ones_like(top), where=top > 0)
    return block_std > 2 * beta


def piqe_score(plane, block=BLOCK, activity_threshold=ACTIVITY_THRESHOLD,
               segment_threshold=SEGMENT_THRESHOLD, segment=SEGMENT) -> PiqeResult:
    img = np.asarray(plane, dtype=np.float64)
    h, w = (img.shape[0] // block) * block, (img.shape[1] // block) * block
    if h == 0 or w == 0:
        raise DimensionError(f"PIQE needs at least one {block}x{block} block, got {img.shape}")
    mscn = compute_mscn(img[:h, :w]).values
    blocks = mscn.reshape(h // block, block, w // block, block).transpose(0, 2, 1, 3)

    var = blocks.var(axis=(2, 3))
    active = var > activity_threshold

    edges = np.stack(
        [blocks[..., 0, :], blocks[..., -1, :], blocks[..., :, 0], blocks[..., :, -1]], axis=2
    )
    seg_std = sliding_window_view(edges, segment, axis=-1).std(axis=-1)
    artifact = (seg_std < segment_threshold).any(axis=(-1, -2))

    noise = _noise_mask(blocks, np.sqrt(var))

    artifact_mask = active & artifact
    noise_mask = active & noise
    distorted = artifact_mask | noise_mask
    n_active = int(active.sum())
    n_dist = int(distorted.sum())
    return PiqeResult(
        piqe_from_counts(n_dist, n_active),
        n_active,
        n_dist,
        artifact_mask,
        noise_mask,
        {
            "block": block,
            "activity_threshold": activity_threshold,
            "segment_threshold": segment_threshold,
            "segment": segment,
            "noise_criterion": NOISE_CRITERION,
            "c": C,
        },
    )
