"""No-reference metrics (PIQE, NIQE, AQI) and sequence-level pooling."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from ..errors import ConfigurationError
from ..fr import FrameScore, SequenceScore, mean_pool
from .aqi import AqiResult, aqi_score, directional_entropy
from .niqe import (
    NiqeModel,
    SharpnessFallbackWarning,
    fit_niqe_model,
    model_distance,
    niqe_distance,
    niqe_features,
    niqe_patch_features,
    niqe_score,
)
from .nss import AggdParams, GgdParams, MscnField, compute_mscn, fit_aggd, fit_ggd, luma_255
from .piqe import NOISE_CRITERION, PiqeResult, piqe_from_counts, piqe_score

NR_METRICS = ("piqe", "niqe", "aqi")

__all__ = [
    "AggdParams", "AqiResult", "GgdParams", "MscnField", "NiqeModel", "PiqeResult",
    "SharpnessFallbackWarning", "NR_METRICS", "aqi_score", "compute_mscn",
    "directional_entropy", "fit_aggd", "fit_ggd", "fit_niqe_model", "luma_255",
    "model_distance", "niqe_distance", "niqe_features", "niqe_patch_features",
    "niqe_score", "nr_frame", "nr_sequence", "piqe_from_counts", "piqe_score",
]


def nr_frame(plane255, metric, model=None) -> float:
    if metric == "piqe":
        return piqe_score(plane255).score
    if metric == "aqi":
        return aqi_score(plane255).anisotropy
    if metric == "niqe":
        if model is None:
            raise ConfigurationError("NIQE needs a fitted model (fit-niqe)")
        return niqe_score(plane255, model)
    raise ConfigurationError(f"unknown no-reference metric {metric!r}; choose from {NR_METRICS}")


def nr_sequence(video, metric, model: NiqeModel | None = None, workers=1) -> SequenceScore:
    """Per-frame luma scores pooled by arithmetic mean."""
    metric = metric.lower()
    if metric not in NR_METRICS:
        raise ConfigurationError(f"unknown no-reference metric {metric!r}; choose from {NR_METRICS}")
    if metric == "niqe" and model is None:
        raise ConfigurationError("NIQE needs a fitted model (fit-niqe)")

    def one(i):
        return nr_frame(luma_255(video.read_frame(i)), metric, model)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(one, range(len(video))))
    else:
        vals = [one(i) for i in range(len(video))]
    meta = {"noise_criterion": NOISE_CRITERION} if metric == "piqe" else {}
    return SequenceScore(
        metric, "y", [FrameScore(i, v) for i, v in enumerate(vals)], mean_pool(vals), "mean", meta
    )
