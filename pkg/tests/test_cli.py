"""End-to-end CLI runs against the bundled feeder and synthetic inputs."""

import contextlib
import io
import json

import pytest

from harmflow import __version__
from harmflow.cli import main
from harmflow.feeder import bundled_data_dir, bundled_feeder_path, feeder_sha256
from harmflow.kernels import available_backends


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def _read_summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


def test_scan_bundled(tmp_path):
    code, out, _ = _run(["scan", "--bus", "844", "--out", str(tmp_path)])
    assert code == 0
    assert "peaks at 1500" in out
    rows = (tmp_path / "scan_844.csv").read_text().splitlines()
    assert rows[0] == "frequency_hz,z_real_ohm,z_imag_ohm,z_mag_ohm"
    assert len(rows) == 1 + 295  # 60..3000 Hz in 10 Hz steps
    doc = _read_summary(tmp_path)
    assert doc["command"] == "scan"
    assert doc["points"] == 295
    assert doc["peak"]["frequency_hz"] == 1500.0
    # provenance block
    assert doc["tool_version"] == __version__
    assert doc["feeder_sha256"] == feeder_sha256(bundled_feeder_path())
    assert doc["backend"] in available_backends()


def test_scan_unknown_bus(tmp_path):
    code, _, err = _run(["scan", "--bus", "zz", "--out", str(tmp_path)])
    assert code == 2
    assert "zz" in err


def test_scan_bad_range(tmp_path):
    code, _, err = _run(["scan", "--bus", "844", "--fmin", "900",
                         "--fmax", "300", "--out", str(tmp_path)])
    assert code == 2
    assert "--fmin" in err


def test_missing_feeder_file(tmp_path):
    code, _, err = _run(["solve", "--feeder", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path)])
    assert code == 2
    assert "does not exist" in err


def test_missing_resources_flagged(tmp_path):
    empty = tmp_path / "resources"
    empty.mkdir()
    code, _, err = _run(["solve", "--resources", str(empty),
                         "--out", str(tmp_path)])
    assert code == 2
    assert "references missing" in err


def test_infeasible_feeder_numerical_exit(tmp_path):
    doc = {
        "buses": [
            {"id": "s", "nominal_kv": 12.47, "slack": True},
            {"id": "a", "nominal_kv": 12.47},
        ],
        "branches": [{"from": "s", "to": "a", "r_ohm": 30.0, "x_ohm": 60.0}],
        "source": {"bus": "s"},
        "loads": [{"bus": "a", "p_kw": 100e3, "q_kvar": 20e3}],
    }
    feeder = tmp_path / "weak.json"
    feeder.write_text(json.dumps(doc))
    code, _, err = _run(["solve", "--feeder", str(feeder),
                         "--out", str(tmp_path / "out")])
    assert code == 3
    assert "numerical failure" in err


def test_solve_bundled(tmp_path):
    code, out, _ = _run(["solve", "--out", str(tmp_path)])
    assert code == 0
    doc = _read_summary(tmp_path)
    assert doc["command"] == "solve"
    assert set(doc["thd_pct"]) == set(
        r.split(",")[0] for r in
        (tmp_path / "fundamental.csv").read_text().splitlines()[1:]
    )
    # one harmonics file per order plus the fundamental
    assert len(doc["files"]) == len(doc["options"]["orders"]) + 1
    for name in doc["files"]:
        assert (tmp_path / name).is_file()
    assert "max THD" in out


def test_qsts_reruns_identical(tmp_path):
    args = ["qsts", "--steps", "5", "--monitors", "800,844,892"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(args + ["--out", str(a)])[0] == 0
    assert _run(args + ["--out", str(b)])[0] == 0
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_qsts_unknown_monitor(tmp_path):
    code, _, err = _run(["qsts", "--steps", "2", "--monitors", "nope",
                         "--out", str(tmp_path)])
    assert code == 2
    assert "nope" in err


def test_propagate_rejects_unknown_placement(tmp_path):
    code, _, err = _run(["propagate", "--placements", "848,zz",
                         "--steps", "3", "--out", str(tmp_path)])
    assert code == 2
    assert "zz" in err


def test_propagate_rejects_empty_placements(tmp_path):
    code, _, err = _run(["propagate", "--placements", ",",
                         "--steps", "3", "--out", str(tmp_path)])
    assert code == 2
    assert "placements" in err


def test_propagate_short_run(tmp_path):
    code, out, _ = _run([
        "propagate", "--placements", "848,844", "--steps", "30",
        "--out", str(tmp_path),
    ])
    assert code == 0
    doc = _read_summary(tmp_path)
    peaks = doc["substation_peaks_pct"]
    assert len(peaks) == 3  # baseline stage plus one per placement
    assert peaks[0] < peaks[1] < peaks[2]
    rows = (tmp_path / "propagation.csv").read_text().splitlines()
    assert rows[0] == "stage,bus,peak_thd_pct"
    assert "propagate:" in out


def test_spectrum_bundled_waveform(tmp_path):
    waveform = bundled_data_dir() / "waveforms" / "sample_nonlinear.csv"
    code, out, _ = _run(["spectrum", "--waveform", str(waveform),
                         "--out", str(tmp_path)])
    assert code == 0
    doc = _read_summary(tmp_path)
    assert doc["orders"][0] == 1
    assert doc["thd_pct"] == pytest.approx(20.2741214, abs=1e-3)
    assert (tmp_path / "spectrum_sample_nonlinear.csv").is_file()
    assert "THD" in out


def test_spectrum_missing_file(tmp_path):
    code, _, err = _run(["spectrum", "--waveform", str(tmp_path / "w.csv"),
                         "--out", str(tmp_path)])
    assert code == 2
    assert "does not exist" in err
