"""Anchor / pre-processing / post-processing benchmark runs over a rate plan."""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..bd import RQCurve
from ..errors import ConfigurationError, CurveError, DarkbenchError, ImportScoresError
from ..fr import FR_METRICS, FrameScore, SequenceScore, fr_sequence, mean_pool
from ..nr import NR_METRICS, NiqeModel, nr_sequence
from ..serial import dumps, fmt_float
from ..yuv import VideoFormat, open_video, open_yuv, write_video
from .codec import CodecAdapter, EncodeCache, RunResult, validate_coding_constraints
from .hooks import FilterHook, apply_cached
from .ratecontrol import RatePlan, hit_target_rate

WORKFLOWS = ("anchor", "pre", "post")
WORKDIR_ENV = "DARKBENCH_WORKDIR"


def default_workdir():
    return os.environ.get(WORKDIR_ENV) or os.path.join(os.getcwd(), "darkbench-work")


def identity_filter_command():
    """External filter that copies its input, for reference-discipline checks."""
    return [sys.executable, "-c", "import shutil, sys; shutil.copyfile(sys.argv[1], sys.argv[2])",
            "{input}", "{output}"]


@dataclass
class Sequence:
    id: str
    path: str
    format: VideoFormat | None
    plan: RatePlan
    gop: int | None = None
    intra_period: int | None = None


@dataclass
class ScoreImport:
    path: str
    metric: str


@dataclass
class BenchmarkSpec:
    sequences: list
    adapter: CodecAdapter
    workflows: tuple = WORKFLOWS
    metrics: tuple = ("psnr-y",)
    hooks: dict = field(default_factory=dict)
    imports: list = field(default_factory=list)
    niqe_model: str | None = None
    workers: int | None = None
    keep: str = "all"

    def __post_init__(self):
        if not self.sequences:
            raise ConfigurationError("benchmark needs at least one sequence")
        ids = [s.id for s in self.sequences]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("duplicate sequence ids")
        bad = [w for w in self.workflows if w not in WORKFLOWS]
        if bad or not self.workflows:
            raise ConfigurationError(f"workflows must be a nonempty subset of {WORKFLOWS}")
        for m in self.metrics:
            if m not in FR_METRICS and m not in NR_METRICS:
                raise ConfigurationError(f"unknown metric {m!r}")
        for w in ("pre", "post"):
            if w in self.workflows and w not in self.hooks:
                raise ConfigurationError(f"workflow {w!r} needs a filter hook")
        if "niqe" in self.metrics and not self.niqe_model:
            raise ConfigurationError("metric niqe needs niqe_model")
        if self.keep not in ("all", "final"):
            raise ConfigurationError("keep must be 'all' or 'final'")

    @classmethod
    def from_dict(cls, d, base="."):
        base = Path(base)

        def resolve(p):
            return str(p if os.path.isabs(p) else base / p)

        tol = float(d.get("tolerance_pct", 3.0))
        seqs = []
        for s in d.get("sequences", []):
            fmt = None
            if "width" in s:
                fmt = VideoFormat.from_fps(int(s["width"]), int(s["height"]), int(s.get("bit_depth", 8)),
                                           s.get("fps", "30"), int(s.get("frames", 0)))
            rates = s.get("rates") or d.get("rates", {}).get(s["id"])
            if rates is None:
                raise ConfigurationError(f"sequence {s['id']} has no rate plan")
            seqs.append(Sequence(str(s["id"]), resolve(s["path"]), fmt, RatePlan(str(s["id"]), rates, tol),
                                 s.get("gop"), s.get("intra_period")))
        if "adapter" not in d:
            raise ConfigurationError("benchmark spec lacks an adapter")
        hooks = {k: FilterHook.from_dict(v) for k, v in d.get("hooks", {}).items()}
        imports = [ScoreImport(resolve(i["path"]), i["metric"]) for i in d.get("imports", [])]
        return cls(
            seqs, CodecAdapter.from_dict(d["adapter"]), tuple(d.get("workflows", WORKFLOWS)),
            tuple(m.lower() for m in d.get("metrics", ("psnr-y",))), hooks, imports,
            resolve(d["niqe_model"]) if d.get("niqe_model") else None, d.get("workers"), d.get("keep", "all"),
        )

    @classmethod
    def load(cls, path):
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                d = tomllib.load(fh)
        else:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        return cls.from_dict(d, path.parent)


@dataclass
class Cell:
    sequence: str
    rate_label: str
    target_kbps: float
    workflow: str
    run: RunResult | None = None
    output_path: str | None = None
    scores: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def key(self):
        return (self.sequence, self.rate_label, self.workflow)

    def to_dict(self):
        return {
            "sequence": self.sequence, "rate_label": self.rate_label, "target_kbps": self.target_kbps,
            "workflow": self.workflow, "run": self.run.to_dict() if self.run else None,
            "output_path": self.output_path,
            "scores": {m: s.to_dict() for m, s in self.scores.items()}, "error": self.error,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["sequence"], d["rate_label"], d["target_kbps"], d["workflow"],
                   RunResult.from_dict(d["run"]) if d.get("run") else None, d.get("output_path"),
                   {m: SequenceScore.from_dict(s) for m, s in d.get("scores", {}).items()}, d.get("error"))


@dataclass
class ResultSet:
    cells: list
    sequences: list
    workflows: list
    metrics: list
    failures: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def sort(self):
        wf = {w: i for i, w in enumerate(WORKFLOWS)}
        self.cells.sort(key=lambda c: (self.sequences.index(c.sequence), c.target_kbps, wf[c.workflow]))

    def score_count(self):
        return sum(len(c.scores) for c in self.cells)

    def curves(self, metrics=None, skipped=None) -> list:
        """One rate-quality curve per (sequence, workflow, metric) with every
        rate point scored; curves that fail validation are reported in ``skipped``."""
        out = []
        for seq in self.sequences:
            for wf in self.workflows:
                cells = [c for c in self.cells if c.sequence == seq and c.workflow == wf]
                for m in metrics or self.metrics:
                    pts = [(c.run.bitrate_kbps, c.scores[m].pooled) for c in cells
                           if c.run is not None and m in c.scores]
                    if not pts:
                        continue
                    try:
                        out.append(RQCurve(wf, m, pts, seq))
                    except CurveError as e:
                        if skipped is not None:
                            skipped.append(f"{seq}/{wf}/{m}: {e}")
        return out

    def to_dict(self):
        return {"sequences": self.sequences, "workflows": self.workflows, "metrics": self.metrics,
                "cells": [c.to_dict() for c in self.cells], "failures": self.failures, "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        return cls([Cell.from_dict(c) for c in d["cells"]], list(d["sequences"]), list(d["workflows"]),
                   list(d["metrics"]), list(d.get("failures", [])), dict(d.get("meta", {})))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _prepare_source(seq: Sequence, workdir: Path):
    """Raw YUV path and its format; Y4M sources are unwrapped once."""
    reader = open_video(seq.path, seq.format.with_frames(0) if seq.format else None)
    if Path(seq.path).suffix.lower() == ".y4m":
        raw = workdir / "sources" / f"{seq.id}.yuv"
        raw.parent.mkdir(parents=True, exist_ok=True)
        if not raw.exists():
            write_video(raw, reader)
        return str(raw), reader.format.with_frames(len(reader))
    return seq.path, reader.format.with_frames(len(reader))


def _score(metric, ref_path, out_path, fmt, model):
    out = open_yuv(out_path, fmt)
    if metric in FR_METRICS:
        return fr_sequence(metric, open_yuv(ref_path, fmt), out)
    return nr_sequence(out, metric, model)


def run_benchmark(spec: BenchmarkSpec, workdir=None, workers=None, log=None) -> ResultSet:
    """Run every (sequence, rate, workflow) cell and score it against the
    unfiltered source. Cell failures are recorded, not raised."""
    workdir = Path(workdir or default_workdir())
    workdir.mkdir(parents=True, exist_ok=True)
    cache = EncodeCache(workdir)
    model = NiqeModel.load(spec.niqe_model) if spec.niqe_model else None
    sources, constraints = {}, {}
    for seq in spec.sequences:
        sources[seq.id] = _prepare_source(seq, workdir)
        if seq.gop is not None and seq.intra_period is not None:
            rep = validate_coding_constraints(seq.gop, seq.intra_period, sources[seq.id][1].fps)
            constraints[seq.id] = {"passed": rep.passed, "rules": rep.lines()}

    cells = [Cell(seq.id, label, t, wf)
             for seq in spec.sequences
             for label, t in zip(seq.plan.labels, seq.plan.targets)
             for wf in spec.workflows]
    plans = {seq.id: seq.plan for seq in spec.sequences}

    def job(cell: Cell):
        src, fmt = sources[cell.sequence]
        tol = plans[cell.sequence].tolerance_pct
        try:
            if cell.workflow == "pre":
                src_in = apply_cached(spec.hooks["pre"], src, fmt, cache)
            else:
                src_in = src
            cell.run = hit_target_rate(spec.adapter, src_in, fmt, cell.target_kbps, tol, cache)
            out = cell.run.decoded_path
            if cell.workflow == "post":
                out = apply_cached(spec.hooks["post"], out, fmt, cache)
            cell.output_path = out
            for m in spec.metrics:
                cell.scores[m] = _score(m, src, out, fmt, model)
        except (DarkbenchError, OSError) as e:
            cell.error = f"{type(e).__name__}: {e}"
        if log:
            log(f"{cell.sequence} {cell.rate_label} {cell.workflow}: "
                + (cell.error or f"{cell.run.bitrate_kbps:.1f} kbps qp={cell.run.qp} qpif={cell.run.qpif_frame}"))
        return cell

    n = workers or spec.workers or os.cpu_count() or 1
    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            list(ex.map(job, cells))
    else:
        for c in cells:
            job(c)

    results = ResultSet(cells, [s.id for s in spec.sequences], list(spec.workflows), list(spec.metrics))
    for imp in spec.imports:
        expected = {s: (sources[s][1].frame_count, plans[s].labels) for s in sources}
        imported = import_scores(imp.path, imp.metric, expected)
        by_key = {c.key: c for c in cells}
        for key, score in imported.items():
            if key not in by_key:
                raise ImportScoresError(f"imported cell {key} is not part of the benchmark")
            by_key[key].scores[imp.metric] = score
        if imp.metric not in results.metrics:
            results.metrics.append(imp.metric)
    results.sort()
    results.failures = [f"{c.sequence}/{c.rate_label}/{c.workflow}: {c.error}" for c in results.cells if c.error]
    results.meta = {"adapter": spec.adapter.name, "constraints": constraints,
                    "encoder_invocations": cache.invocations, "workdir": str(workdir)}
    if spec.keep == "final":
        keep = {c.run.cache_key for c in cells if c.run}
        results.meta["pruned_bytes"] = cache.prune(keep)
    results.save(workdir / "results.json")
    return results


# --- score import -----------------------------------------------------------

IMPORT_COLUMNS = ("sequence_id", "rate_label", "metric", "value")


def import_scores(path, metric_id, expected=None, workflow="anchor") -> dict:
    """Read externally computed scores for ``metric_id``.

    Columns: sequence_id, rate_label, metric, value, plus optional ``frame``
    and ``workflow`` (rows without a workflow belong to ``workflow``).
    Rows with a frame index are pooled by mean; otherwise each cell needs
    exactly one row. ``expected`` maps sequence id to ``(frame_count,
    rate_labels)`` and turns unknown ids, missing rates and wrong row counts
    into :class:`ImportScoresError`.
    Returns ``{(sequence_id, rate_label, workflow): SequenceScore}``.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        missing = set(IMPORT_COLUMNS) - cols
        if missing:
            raise ImportScoresError(f"{path}: missing columns {sorted(missing)}")
        groups = {}
        for row in reader:
            if row["metric"] != metric_id:
                continue
            key = (row["sequence_id"], row["rate_label"], row.get("workflow") or workflow)
            frame = row.get("frame")
            try:
                value = float(row["value"])
                frame = int(frame) if frame not in (None, "") else None
            except ValueError as e:
                raise ImportScoresError(f"{path}: bad row {row}: {e}") from None
            groups.setdefault(key, []).append((frame, value))
    if not groups:
        raise ImportScoresError(f"{path}: no rows for metric {metric_id!r}")
    out = {}
    for key, rows in groups.items():
        seq = key[0]
        if expected is not None and seq not in expected:
            raise ImportScoresError(f"{path}: unknown sequence id {seq!r}")
        per_frame = [r for r in rows if r[0] is not None]
        if per_frame and len(per_frame) != len(rows):
            raise ImportScoresError(f"{path}: {key} mixes per-frame and pooled rows")
        if per_frame:
            frames = sorted(per_frame)
            idx = [f for f, _ in frames]
            if len(set(idx)) != len(idx):
                raise ImportScoresError(f"{path}: {key} repeats frame indices")
            if expected is not None and len(frames) != expected[seq][0]:
                raise ImportScoresError(f"{path}: {key} has {len(frames)} frame rows, sequence has {expected[seq][0]}")
            vals = [v for _, v in frames]
            score = SequenceScore(metric_id, "y", [FrameScore(f, v) for f, v in frames], mean_pool(vals),
                                  "mean", {"imported": str(path)})
        else:
            if len(rows) != 1:
                raise ImportScoresError(f"{path}: {key} has {len(rows)} pooled rows, expected 1")
            score = SequenceScore(metric_id, "y", [], rows[0][1], "mean", {"imported": str(path)})
        out[key] = score
    if expected is not None:
        for seq, wf in {(k[0], k[2]) for k in out}:
            have = {k[1] for k in out if k[0] == seq and k[2] == wf}
            want = set(expected[seq][1])
            if have != want:
                raise ImportScoresError(f"{path}: {seq}/{wf} has rates {sorted(have)}, expected {sorted(want)}")
    return out


def export_scores_csv(results: ResultSet, metric, per_frame=False) -> str:
    """Native scores in the import layout (round-trips through import_scores)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence_id", "rate_label", "workflow", "metric", "value"] + (["frame"] if per_frame else []))
    for c in results.cells:
        s = c.scores.get(metric)
        if s is None:
            continue
        if per_frame:
            for fs in s.per_frame:
                w.writerow([c.sequence, c.rate_label, c.workflow, metric, fmt_float(fs.value), fs.frame_index])
        else:
            w.writerow([c.sequence, c.rate_label, c.workflow, metric, fmt_float(s.pooled)])
    return buf.getvalue()
