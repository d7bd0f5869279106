"""``darkbench`` command line: noise probing, denoising, metrics, BD-rate,
encoding and benchmark runs."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigurationError, DarkbenchError
from .serial import dumps, fmt_float, write_text


def _geometry_args(p):
    g = p.add_argument_group("raw YUV geometry (else read from Y4M header or <file>.json)")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--bit-depth", type=int, default=8)
    g.add_argument("--fps", default="30")


def _format(a):
    from .yuv import VideoFormat

    if a.width is None and a.height is None:
        return None
    if a.width is None or a.height is None:
        raise ConfigurationError("give both --width and --height")
    return VideoFormat.from_fps(a.width, a.height, a.bit_depth, a.fps)


def _open(path, a):
    from .yuv import open_video

    return open_video(path, _format(a))


def _out_dir(a):
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pct(v, decimals=1):
    r = round(v, decimals)
    return f"{0.0 if r == 0 else r:.{decimals}f}%"


# --- subcommands ------------------------------------------------------------

def cmd_probe_noise(a):
    from .noise import default_probes, load_probes, profile_delta, save_probes, temporal_profile
    from .report import plot_profile_svg

    video = _open(a.video, a)
    fmt = video.format
    if a.probes:
        probes = load_probes(a.probes)
    else:
        region = tuple(a.region) if a.region else None
        probes = default_probes(fmt, region)
    prof = temporal_profile(video, probes, a.window)
    out = _out_dir(a)
    write_text(out / "profile.csv", prof.to_csv())
    write_text(out / "summary.csv", prof.summary_csv())
    write_text(out / "profile.svg", plot_profile_svg(prof, (fmt.width, fmt.height)))
    save_probes(out / "probes.json", probes)
    print(f"{'probe':<8} {'x':>5} {'y':>5} {'MAE (x1e-3)':>12}")
    for i, p in enumerate(prof.probes):
        print(f"{p.name(i):<8} {p.x:>5} {p.y:>5} {prof.mae[i] * 1e3:>12.3f}")
    if a.compare:
        other = temporal_profile(_open(a.compare, a), probes, a.window)
        d = profile_delta(prof, other)
        write_text(out / "compare_summary.csv", other.summary_csv())
        for lab, delta in zip(d.labels, d.deltas):
            print(f"{lab:<8} delta {delta * 1e3:+.3f}e-3")
        print(f"improved {d.improved}, worsened {d.worsened}, unchanged {d.unchanged}")
    return 0


def cmd_denoise(a):
    from .noise import DenoiseConfig, denoise_to_file
    from .yuv import save_geometry

    video = _open(a.input, a)
    weights = tuple(float(w) for w in a.weights.split(",")) if a.weights else None
    cfg = DenoiseConfig(a.kind, a.window, weights, a.spatial_sigma)
    fmt = denoise_to_file(video, cfg, a.output)
    save_geometry(str(a.output) + ".json", fmt)
    print(f"wrote {len(video)} frames to {a.output}")
    return 0


def cmd_metric_fr(a):
    from .fr import fr_sequence, scores_to_csv, scores_to_json

    ref, dist = _open(a.reference, a), _open(a.distorted, a)
    scores = [fr_sequence(m, ref, dist, a.pooling if m.startswith("psnr") else "mean", a.workers)
              for m in a.metric]
    for s in scores:
        print(f"{s.metric_id}: {fmt_float(s.pooled)}")
    if a.out:
        out = _out_dir(a)
        write_text(out / "scores.csv", scores_to_csv(scores))
        write_text(out / "scores.json", scores_to_json(scores))
    return 0


def cmd_metric_nr(a):
    from .fr import scores_to_csv, scores_to_json
    from .nr import NiqeModel, nr_sequence

    video = _open(a.video, a)
    model = NiqeModel.load(a.model) if a.model else None
    scores = [nr_sequence(video, m, model, a.workers) for m in a.metric]
    for s in scores:
        print(f"{s.metric_id}: {fmt_float(s.pooled)}")
    if a.out:
        out = _out_dir(a)
        write_text(out / "scores.csv", scores_to_csv(scores))
        write_text(out / "scores.json", scores_to_json(scores))
    return 0


def cmd_fit_niqe(a):
    import numpy as np

    from .nr import fit_niqe_model, luma_255

    paths = []
    for entry in a.corpus:
        if os.path.isdir(entry):
            paths += sorted(str(p) for p in Path(entry).iterdir() if p.suffix.lower() in (".yuv", ".y4m", ".npy"))
        else:
            paths.append(entry)
    if not paths:
        raise ConfigurationError("NIQE corpus is empty")
    planes = []
    for path in paths:
        if str(path).endswith(".npy"):
            planes.append(np.load(path).astype(np.float64))
            continue
        video = _open(path, a)
        for i in range(0, len(video), a.stride):
            planes.append(luma_255(video.read_frame(i)))
    model = fit_niqe_model(planes, {"sources": paths, "stride": a.stride})
    model.save(a.out)
    print(f"fitted NIQE model on {len(planes)} planes -> {a.out}")
    return 0


def cmd_bd(a):
    from .bd import METHODS, bd_rate, load_curves

    anchors, tests = load_curves(a.anchor), load_curves(a.test)
    methods = METHODS if a.method == "both" else (a.method,)
    pairs = []
    for t in tests:
        if a.metric and t.metric_id != a.metric:
            continue
        match = [c for c in anchors if c.metric_id == t.metric_id and c.sequence == t.sequence]
        if not match:
            raise ConfigurationError(f"no anchor curve for metric {t.metric_id!r} {t.sequence}".rstrip())
        pairs.append((match[0], t))
    if not pairs:
        raise ConfigurationError("no matching curves")
    rows = []
    for anc, t in pairs:
        for m in methods:
            r = bd_rate(anc, t, m, a.allow_three)
            name = " ".join(x for x in (t.sequence, t.metric_id, m) if x)
            print(f"BD-rate {name}: {_pct(r.bd_rate_pct)}")
            rows.append(r.to_dict() | {"metric": t.metric_id, "sequence": t.sequence})
    if a.json:
        write_text(a.json, dumps(rows))
    return 0


def _adapter(a):
    from .pipeline import CodecAdapter, mock_adapter

    if a.mock:
        return mock_adapter(counter=a.mock_counter)
    if not a.adapter:
        raise ConfigurationError("give --adapter ADAPTER.json or --mock")
    with open(a.adapter, encoding="utf-8") as fh:
        return CodecAdapter.from_dict(json.load(fh))


def cmd_encode(a):
    from .pipeline import EncodeCache, default_workdir, encode, hit_target_rate

    if str(a.input).lower().endswith(".y4m"):
        raise ConfigurationError("encode takes raw YUV input")
    video = _open(a.input, a)
    fmt = video.format.with_frames(len(video))
    adapter = _adapter(a)
    cache = EncodeCache(a.workdir or default_workdir())
    if (a.qp is None) == (a.target is None):
        raise ConfigurationError("give exactly one of --qp or --target")
    if a.qp is not None:
        res = encode(adapter, a.input, fmt, a.qp, a.qpif, cache=cache)
    else:
        res = hit_target_rate(adapter, a.input, fmt, a.target, a.tolerance, cache)
    print(dumps({k: v for k, v in res.to_dict().items() if k not in ("encode_log", "trace")}), end="")
    if a.target is not None and not res.in_tolerance:
        print(f"warning: rate {res.bitrate_kbps:.2f} kbps outside the tolerance band", file=sys.stderr)
    return 0


def _write_report(results, out, method, metrics=None, workflows=None):
    from .report import bd_table, export_curves, plot_svg

    out.mkdir(parents=True, exist_ok=True)
    table = bd_table(results, metrics, workflows, method)
    write_text(out / "bd_table.txt", table.to_text())
    write_text(out / "bd_table.csv", table.to_csv())
    write_text(out / "bd_table.json", table.to_json())
    curves = results.curves(metrics)
    write_text(out / "curves.csv", export_curves(curves, "csv"))
    write_text(out / "curves.json", export_curves(curves, "json"))
    for seq in dict.fromkeys(c.sequence for c in curves):
        for m in dict.fromkeys(c.metric_id for c in curves):
            sel = [c for c in curves if c.sequence == seq and c.metric_id == m]
            if sel:
                write_text(out / f"rq_{seq}_{m}.svg", plot_svg(sel, title=f"{seq} {m}", ylabel=m))
    return table


def cmd_benchmark(a):
    from .pipeline import BenchmarkSpec, run_benchmark

    if not os.path.exists(a.spec):
        raise ConfigurationError(f"benchmark spec {a.spec} not found")
    spec = BenchmarkSpec.load(a.spec)
    log = (lambda s: print(s, file=sys.stderr)) if a.verbose else None
    results = run_benchmark(spec, a.workdir, a.workers, log)
    out = Path(a.out) if a.out else Path(results.meta["workdir"]) / "report"
    table = _write_report(results, out, a.method)
    print(table.to_text(), end="")
    for f in results.failures:
        print(f"failed: {f}", file=sys.stderr)
    print(f"results: {Path(results.meta['workdir']) / 'results.json'}; report: {out}")
    return 1 if results.failures and a.strict else 0


def cmd_report(a):
    from .pipeline import ResultSet

    results = ResultSet.load(a.results)
    table = _write_report(results, Path(a.out), a.method, a.metric, a.workflow)
    print(table.to_text(), end="")
    return 0


# --- parser -----------------------------------------------------------------

def build_parser():
    from .fr import FR_METRICS

    p = argparse.ArgumentParser(prog="darkbench", description=__doc__)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    s = sub.add_parser("probe-noise", help="temporal noise profile at probe pixels")
    s.add_argument("video")
    _geometry_args(s)
    s.add_argument("--probes", help="JSON list of {x, y, label}")
    s.add_argument("--region", type=int, nargs=4, metavar=("X0", "Y0", "X1", "Y1"),
                   help="background region for the default 3x3 probe grid")
    s.add_argument("--window", type=int, default=20)
    s.add_argument("--compare", help="second video (e.g. denoised) profiled at the same probes")
    s.add_argument("--out", default="noise-profile")
    s.set_defaults(func=cmd_probe_noise)

    s = sub.add_parser("denoise", help="temporal / spatiotemporal denoising")
    s.add_argument("input")
    s.add_argument("output")
    _geometry_args(s)
    s.add_argument("--kind", default="temporal-moving-average",
                   choices=("temporal-moving-average", "spatiotemporal-gaussian"))
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--weights", help="comma-separated tap weights summing to 1")
    s.add_argument("--spatial-sigma", type=float, default=1.0)
    s.set_defaults(func=cmd_denoise)

    s = sub.add_parser("metric-fr", help="full-reference metrics")
    s.add_argument("reference")
    s.add_argument("distorted")
    _geometry_args(s)
    s.add_argument("--metric", action="append", choices=FR_METRICS)
    s.add_argument("--pooling", default="mean", choices=("mean", "psnr-of-mean-mse"))
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_metric_fr, metric_default=["psnr-y"])

    s = sub.add_parser("metric-nr", aliases=["nr"], help="no-reference metrics")
    s.add_argument("video")
    _geometry_args(s)
    s.add_argument("--metric", action="append", choices=("piqe", "niqe", "aqi"))
    s.add_argument("--model", help="NIQE model JSON from fit-niqe")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_metric_nr, metric_default=["piqe"])

    s = sub.add_parser("fit-niqe", help="fit a NIQE model on pristine content")
    s.add_argument("--corpus", nargs="+", required=True,
                   help="videos, .npy luma planes, or directories of them (raw .yuv needs a sidecar)")
    _geometry_args(s)
    s.add_argument("--stride", type=int, default=8, help="use every Nth frame of each video")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit_niqe)

    s = sub.add_parser("bd", help="BD-rate between curve CSVs")
    s.add_argument("--anchor", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--method", default="cubic-fit", choices=("cubic-fit", "pchip", "both"))
    s.add_argument("--metric")
    s.add_argument("--allow-three", action="store_true", help="accept 3-point curves")
    s.add_argument("--json", help="also write results as JSON")
    s.set_defaults(func=cmd_bd)

    s = sub.add_parser("encode", help="encode at a QP or hit a target bitrate")
    s.add_argument("input")
    _geometry_args(s)
    s.add_argument("--adapter", help="adapter JSON {name, encode, decode, supports_qpif}")
    s.add_argument("--mock", action="store_true", help="use the built-in mock codec")
    s.add_argument("--mock-counter", help=argparse.SUPPRESS)
    s.add_argument("--qp", type=int)
    s.add_argument("--qpif", type=int)
    s.add_argument("--target", type=float, help="target rate in kbps")
    s.add_argument("--tolerance", type=float, default=3.0)
    s.add_argument("--workdir")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("benchmark", help="run anchor/pre/post workflows from a spec file")
    s.add_argument("spec", help="benchmark spec (JSON or TOML)")
    s.add_argument("--workdir", help=f"working directory root (default ${{DARKBENCH_WORKDIR}} or ./darkbench-work)")
    s.add_argument("--workers", type=int)
    s.add_argument("--method", default="cubic-fit", choices=("cubic-fit", "pchip"))
    s.add_argument("--out", help="report directory (default <workdir>/report)")
    s.add_argument("--strict", action="store_true", help="exit 1 if any cell failed")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("report", help="BD table, curves and plots from results.json")
    s.add_argument("results")
    s.add_argument("--out", default="report")
    s.add_argument("--method", default="cubic-fit", choices=("cubic-fit", "pchip"))
    s.add_argument("--metric", action="append")
    s.add_argument("--workflow", action="append")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    a = parser.parse_args(argv)
    if not getattr(a, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    if getattr(a, "metric", None) is None and hasattr(a, "metric_default"):
        a.metric = a.metric_default
    try:
        return a.func(a)
    except (DarkbenchError, OSError) as e:
        print(f"darkbench: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
