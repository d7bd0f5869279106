import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from darkbench.bd import RQCurve, bd_rate
from darkbench.errors import ConfigurationError, CurveError
from darkbench.noise import ProbeLocation, temporal_profile
from darkbench.report import bd_table, export_curves, import_curves, plot_profile_svg, plot_svg
from darkbench.yuv import MemoryVideo, VideoFormat

SVG = "{http://www.w3.org/2000/svg}"
RATES = np.array([1000.0, 2000.0, 4000.0, 8000.0])
SEQS = [f"S{i}" for i in range(1, 7)]
METRICS = ["psnr-y", "ms-ssim", "vmaf", "piqe"]


def grid_curves():
    out = []
    for k, s in enumerate(SEQS):
        for m in METRICS:
            q = 30 + 3 * np.log2(RATES / 1000) + k
            for wf, scale in (("anchor", 1.0), ("pre", 0.9 + 0.02 * k), ("post", 1.05)):
                out.append(RQCurve.from_arrays(wf, m, RATES * scale, q, s))
    return out


def test_table_layout_and_average():
    t = bd_table(grid_curves())
    assert t.rows == [(m, wf) for m in METRICS for wf in ("pre", "post")]
    lines = t.to_text().splitlines()
    assert lines[1].split() == ["Metric", "Method"] + SEQS + ["Avg"]
    assert len(lines) == 3 + 8
    pre = [t.value("psnr-y", "pre", s) for s in SEQS]
    assert pre[0] == pytest.approx(-10.0, abs=1e-9)
    assert t.average("psnr-y", "pre") == pytest.approx(np.mean(pre), abs=1e-12)
    assert t.average("vmaf", "post") == pytest.approx(5.0, abs=1e-9)
    assert t.to_csv().splitlines()[0] == "metric,workflow," + ",".join(SEQS) + ",avg"
    d = json.loads(t.to_json())
    assert len(d["rows"]) == 8 and d["rows"][0]["cells"]["S1"] == pytest.approx(-10.0)


def test_table_blank_cell_footnote():
    curves = grid_curves()
    curves = [c for c in curves if not (c.sequence == "S2" and c.label == "pre" and c.metric_id == "vmaf")]
    t = bd_table(curves)
    assert t.value("vmaf", "pre", "S2") is None and len(t.footnotes) == 1
    row = next(line for line in t.to_text().splitlines() if line.startswith("vmaf") and "pre" in line)
    assert "[1]" in row
    assert t.average("vmaf", "pre") == pytest.approx(np.mean([t.value("vmaf", "pre", s) for s in SEQS if s != "S2"]))


def test_table_pchip_and_needs_anchor():
    curves = grid_curves()
    t = bd_table(curves, method="pchip")
    a = next(c for c in curves if c.label == "anchor" and c.sequence == "S3" and c.metric_id == "piqe")
    p = next(c for c in curves if c.label == "pre" and c.sequence == "S3" and c.metric_id == "piqe")
    assert t.value("piqe", "pre", "S3") == bd_rate(a, p, "pchip").bd_rate_pct
    with pytest.raises(CurveError):
        bd_table([c for c in curves if c.label != "anchor"])


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_curve_export_round_trip(fmt):
    curves = grid_curves()[:6]
    back = import_curves(export_curves(curves, fmt), fmt)
    assert [(c.sequence, c.label, c.metric_id) for c in back] == [(c.sequence, c.label, c.metric_id) for c in curves]
    for a, b in zip(curves, back):
        assert np.array_equal(a.rates, b.rates) and np.array_equal(a.qualities, b.qualities)


def test_export_empty():
    with pytest.raises(ConfigurationError):
        export_curves([])


def parse(svg):
    return ET.fromstring(svg)


def test_svg_polylines_and_bounds():
    curves = [c for c in grid_curves() if c.sequence == "S1" and c.metric_id == "psnr-y"]
    root = parse(plot_svg(curves, "S1"))
    assert len(root.findall(f".//{SVG}polyline")) == 3
    assert len(root.findall(f".//{SVG}circle")) == 12
    g = root.find(f".//{SVG}g[@class='chart']")
    assert g.get("data-xscale") == "log"
    assert float(g.get("data-xmin")) <= min(c.rates.min() for c in curves)
    assert float(g.get("data-xmax")) >= max(c.rates.max() for c in curves)
    assert float(g.get("data-ymin")) <= min(c.qualities.min() for c in curves)
    assert float(g.get("data-ymax")) >= max(c.qualities.max() for c in curves)
    frame = g.find(f"{SVG}rect")
    x0, y0 = float(frame.get("x")), float(frame.get("y"))
    x1, y1 = x0 + float(frame.get("width")), y0 + float(frame.get("height"))
    for c in root.findall(f".//{SVG}circle"):
        assert x0 <= float(c.get("cx")) <= x1 and y0 <= float(c.get("cy")) <= y1


def test_svg_single_point_and_errors():
    one = RQCurve.from_arrays("anchor", "psnr-y", [1000.0], [30.0])
    root = parse(plot_svg([one]))
    assert not root.findall(f".//{SVG}polyline") and len(root.findall(f".//{SVG}circle")) == 1
    with pytest.raises(ConfigurationError):
        plot_svg([])
    with pytest.raises(ConfigurationError):
        plot_svg([RQCurve("a", "m", [])])


def test_profile_svg():
    fmt = VideoFormat(8, 8, 10)
    ys = (np.arange(12)[:, None, None] % 3 * 100 + np.zeros((1, 8, 8))).astype(np.uint16)
    prof = temporal_profile(MemoryVideo.from_planes(fmt, ys), [ProbeLocation(1, 1), ProbeLocation(6, 5)], window=3)
    root = parse(plot_profile_svg(prof, (8, 8)))
    assert len(root.findall(f".//{SVG}polyline")) == 4
    assert root.find(f".//{SVG}g[@class='probe-map']") is not None
