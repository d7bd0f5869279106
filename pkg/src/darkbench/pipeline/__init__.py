"""Codec workflows: adapters, encode cache, target-rate search and benchmark runs."""

from .benchmark import (
    WORKDIR_ENV,
    WORKFLOWS,
    BenchmarkSpec,
    Cell,
    ResultSet,
    ScoreImport,
    Sequence,
    default_workdir,
    export_scores_csv,
    identity_filter_command,
    import_scores,
    run_benchmark,
)
from .codec import (
    CodecAdapter,
    ConstraintReport,
    EncodeCache,
    RunResult,
    compute_bitrate,
    encode,
    substitute,
    validate_coding_constraints,
)
from .hooks import FilterHook, apply_cached
from .ratecontrol import RatePlan, hit_target_rate

__all__ = [
    "WORKDIR_ENV", "WORKFLOWS", "BenchmarkSpec", "Cell", "CodecAdapter", "ConstraintReport",
    "EncodeCache", "FilterHook", "RatePlan", "ResultSet", "RunResult", "ScoreImport", "Sequence",
    "apply_cached", "compute_bitrate", "default_workdir", "encode", "export_scores_csv",
    "hit_target_rate", "identity_filter_command", "import_scores", "mock_adapter", "run_benchmark", "substitute",
    "validate_coding_constraints",
]


def mock_adapter(counter=None, scale=None, supports_qpif=True):
    """Adapter driving :mod:`darkbench.mockcodec` with the current interpreter."""
    import sys

    enc = [sys.executable, "-m", "darkbench.mockcodec", "encode", "--input", "{input}", "--output", "{output}",
           "--qp", "{qp}", "--width", "{width}", "--height", "{height}", "--frames", "{frames}",
           "--fps", "{fps}", "--bitdepth", "{bitdepth}"]
    if supports_qpif:
        enc += ["--qpif", "{qpif_frame}"]
    if scale is not None:
        enc += ["--scale", str(scale)]
    if counter is not None:
        enc += ["--counter", str(counter)]
    dec = [sys.executable, "-m", "darkbench.mockcodec", "decode", "--input", "{input}", "--output", "{output}"]
    return CodecAdapter("mock", enc, dec, supports_qpif)
