import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_video
from darkbench.bd import RQCurve, save_curves
from darkbench.cli import main
from darkbench.mockcodec import rate_kbps
from darkbench.pipeline import identity_filter_command, mock_adapter
from darkbench.synthetic import natural_image
from darkbench.yuv import VideoFormat, save_geometry, write_video, write_y4m

RATES = [1000.0, 2000.0, 4000.0, 8000.0]
PSNR = [32.0, 35.0, 37.5, 39.5]


@pytest.fixture
def raw(tmp_path, rng):
    fmt = VideoFormat.from_fps(16, 16, 10, "60", 24)
    path = tmp_path / "v.yuv"
    fmt = write_video(path, random_video(fmt, 24, rng))
    save_geometry(str(path) + ".json", fmt)
    return str(path), fmt


def test_no_command_exits_2(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("probe-noise", "denoise", "metric-fr", "metric-nr", "fit-niqe", "bd", "encode", "benchmark", "report"):
        assert cmd in out


def test_console_script_runs():
    exe = shutil.which("darkbench")
    argv = [exe] if exe else [sys.executable, "-m", "darkbench.cli"]
    proc = subprocess.run(argv + ["bd", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--anchor" in proc.stdout


def test_bd_identical_curves(tmp_path, capsys):
    save_curves(tmp_path / "a.csv", [RQCurve.from_arrays("anchor", "psnr-y", RATES, PSNR)])
    save_curves(tmp_path / "t.csv", [RQCurve.from_arrays("test", "psnr-y", RATES, PSNR)])
    assert main(["bd", "--anchor", str(tmp_path / "a.csv"), "--test", str(tmp_path / "t.csv")]) == 0
    assert capsys.readouterr().out.strip() == "BD-rate psnr-y cubic-fit: 0.0%"


def test_bd_both_methods_json(tmp_path, capsys):
    save_curves(tmp_path / "a.csv", [RQCurve.from_arrays("anchor", "psnr-y", RATES, PSNR)])
    save_curves(tmp_path / "t.csv", [RQCurve.from_arrays("test", "psnr-y", np.array(RATES) * 2, PSNR)])
    rc = main(["bd", "--anchor", str(tmp_path / "a.csv"), "--test", str(tmp_path / "t.csv"),
               "--method", "both", "--json", str(tmp_path / "bd.json")])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["BD-rate psnr-y cubic-fit: 100.0%", "BD-rate psnr-y pchip: 100.0%"]
    assert len(json.loads((tmp_path / "bd.json").read_text())) == 2


def test_bd_three_points_rejected(tmp_path, capsys):
    save_curves(tmp_path / "a.csv", [RQCurve.from_arrays("anchor", "psnr-y", RATES[:3], PSNR[:3])])
    assert main(["bd", "--anchor", str(tmp_path / "a.csv"), "--test", str(tmp_path / "a.csv")]) == 1
    assert main(["bd", "--anchor", str(tmp_path / "a.csv"), "--test", str(tmp_path / "a.csv"),
                 "--allow-three"]) == 0


def test_missing_benchmark_spec(tmp_path, capsys):
    assert main(["benchmark", str(tmp_path / "nope.json")]) == 1
    assert "not found" in capsys.readouterr().err


def test_probe_noise_and_denoise(raw, tmp_path, capsys):
    path, fmt = raw
    out = tmp_path / "prof"
    den = tmp_path / "d.yuv"
    assert main(["denoise", path, str(den), "--window", "5"]) == 0
    assert main(["probe-noise", path, "--window", "8", "--compare", str(den), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "improved 9, worsened 0" in text
    for name in ("profile.csv", "summary.csv", "profile.svg", "probes.json", "compare_summary.csv"):
        assert (out / name).exists()


def test_metric_fr_and_nr(raw, tmp_path, capsys):
    path, fmt = raw
    assert main(["metric-fr", path, path, "--out", str(tmp_path / "fr")]) == 0
    assert capsys.readouterr().out.strip() == "psnr-y: 100"
    assert main(["nr", path, "--metric", "aqi", "--metric", "piqe"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(":")[0] for line in lines] == ["aqi", "piqe"]
    assert main(["metric-nr", path, "--metric", "niqe"]) == 1


def test_fit_niqe(tmp_path, rng, capsys):
    for i in range(2):
        np.save(tmp_path / f"p{i}.npy", natural_image((96, 96), rng))
    model = tmp_path / "m.json"
    assert main(["fit-niqe", "--corpus", str(tmp_path), "--out", str(model)]) == 0
    d = json.loads(model.read_text())
    assert len(d["mean"]) == 36


def test_encode_mock(raw, tmp_path, capsys):
    path, fmt = raw
    wd = str(tmp_path / "w")
    assert main(["encode", path, "--mock", "--qp", "30", "--workdir", wd]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["bitrate_kbps"] == pytest.approx(rate_kbps(30), rel=1e-3)
    t = rate_kbps(33.3)
    assert main(["encode", path, "--mock", "--target", str(t), "--workdir", wd]) == 0
    d = json.loads(capsys.readouterr().out)
    assert 0.95 * t <= d["bitrate_kbps"] <= 1.03 * t
    assert main(["encode", path, "--mock", "--workdir", wd]) == 1


def test_encode_rejects_y4m(raw, tmp_path):
    path, fmt = raw
    from darkbench.yuv import open_yuv

    y4m = tmp_path / "v.y4m"
    write_y4m(y4m, open_yuv(path, fmt))
    assert main(["encode", str(y4m), "--mock", "--qp", "30"]) == 1


def test_benchmark_and_report(raw, tmp_path, capsys):
    path, fmt = raw
    spec = {
        "sequences": [{"id": "S", "path": path, "width": 16, "height": 16, "bit_depth": 10, "fps": "60",
                       "rates": [500, 1000, 2000, 4000]}],
        "adapter": mock_adapter().to_dict(),
        "workflows": ["anchor", "post"], "metrics": ["psnr-y"],
        "hooks": {"post": {"kind": "external-command", "command": identity_filter_command()}},
    }
    sp = tmp_path / "spec.json"
    sp.write_text(json.dumps(spec))
    wd = tmp_path / "w"
    assert main(["benchmark", str(sp), "--workdir", str(wd), "--strict"]) == 0
    text = capsys.readouterr().out
    row = next(line for line in text.splitlines() if line.startswith("psnr-y"))
    assert row.split()[2:] == ["0.00", "0.00"]
    for name in ("bd_table.txt", "bd_table.csv", "curves.csv", "rq_S_psnr-y.svg"):
        assert (wd / "report" / name).exists()
    assert main(["report", str(wd / "results.json"), "--out", str(tmp_path / "r"), "--method", "pchip"]) == 0
    assert (tmp_path / "r" / "bd_table.json").exists()
