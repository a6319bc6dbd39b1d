"""CLI subcommands: wiring, output formats, exit codes."""

import json

import pytest

from occtool.cli import run_cli
from occtool.occ_sim import (
    OccSimulator,
    WorkloadSignal,
    config_to_dict,
    standard_config,
)

from conftest import single_sensor_config


@pytest.fixture
def image_file(tmp_path):
    sim = OccSimulator(standard_config())
    sim.advance(0.123)
    path = tmp_path / "image.bin"
    path.write_bytes(sim.snapshot_image())
    return path


@pytest.fixture
def sim_trace(tmp_path):
    config = single_sensor_config(WorkloadSignal.constant(250.0))
    config_path = tmp_path / "sim.json"
    config_path.write_text(json.dumps(config_to_dict(config)))
    trace_path = tmp_path / "trace.csv"
    code = run_cli(["simulate", "--config", str(config_path), "--sensor", "PWRPROC",
                    "--duration", "6", "--readout-interval", "0.002",
                    "--out", str(trace_path)])
    assert code == 0
    return trace_path


def read_json(capsys):
    return json.loads(capsys.readouterr().out)


# ---------------------------------------------------------------- basics

def test_help_exits_zero():
    assert run_cli(["--help"]) == 0
    assert run_cli(["simulate", "--help"]) == 0


def test_usage_error_exits_two():
    assert run_cli([]) == 2
    assert run_cli(["simulate", "--bogus"]) == 2


def test_dump_prints_sensor_table(image_file, capsys):
    assert run_cli(["dump", "--image", str(image_file)]) == 0
    out = capsys.readouterr().out
    assert "PWRSYS" in out
    assert "block 0: 6 sensors" in out


def test_dump_missing_file_exits_one(capsys):
    assert run_cli(["dump", "--image", "/nonexistent/image.bin"]) == 1
    assert "error" in capsys.readouterr().err


def test_image_path_env_fallback(image_file, capsys, monkeypatch):
    monkeypatch.setenv("OCCTOOL_IMAGE_PATH", str(image_file))
    assert run_cli(["dump"]) == 0
    assert "PWRSYS" in capsys.readouterr().out


# ---------------------------------------------------------------- monitor / simulate

def test_monitor_writes_csv(image_file, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = run_cli(["monitor", "--image", str(image_file), "--sensor", "PWRSYS",
                    "--count", "20", "--mode", "naive", "--out", str(out)])
    assert code == 0
    summary = read_json(capsys)
    assert summary["entries"] == 20
    assert out.read_text().count("\n") == 21


def test_simulate_writes_trace_and_frames(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    frames = tmp_path / "frames.bin"
    code = run_cli(["simulate", "--sensor", "PWRPROC", "--duration", "0.5",
                    "--readout-interval", "0.01", "--out", str(trace),
                    "--frames", str(frames)])
    assert code == 0
    summary = read_json(capsys)
    assert summary["entries"] == 50
    assert summary["frames"] == 50
    assert frames.stat().st_size == 50 * 153_600


def test_monitor_replays_recorded_frames(tmp_path, capsys):
    frames = tmp_path / "frames.bin"
    run_cli(["simulate", "--sensor", "PWRPROC", "--duration", "0.5",
             "--readout-interval", "0.01", "--out", str(tmp_path / "unused.csv"),
             "--frames", str(frames)])
    capsys.readouterr()
    out = tmp_path / "replayed.csv"
    code = run_cli(["monitor", "--replay", str(frames), "--sensor", "PWRPROC",
                    "--count", "50", "--out", str(out)])
    assert code == 0
    assert read_json(capsys)["entries"] == 50


# ---------------------------------------------------------------- analyses

def test_update_rate_json(sim_trace, capsys):
    code = run_cli(["update-rate", "--trace", str(sim_trace), "--window-ms", "60"])
    assert code == 0
    payload = read_json(capsys)
    assert abs(payload["rate_sa_s"] - 24.95) <= 0.05
    assert abs(payload["mean_interval_ms"] - 40.08) <= 0.08
    assert payload["dropped_gaps"] == 0


def test_bench_latency_json_and_data(sim_trace, tmp_path, capsys):
    data = tmp_path / "hist.txt"
    code = run_cli(["bench-latency", "--trace", str(sim_trace),
                    "--bin-width-us", "1000", "--data", str(data)])
    assert code == 0
    payload = read_json(capsys)
    assert abs(payload["mean_s"] - 0.002) < 1e-6
    assert sum(payload["bins"].values()) == payload["count"]
    assert len(data.read_text().splitlines()) == len(payload["bins"])


def test_analyze_aliasing_json(tmp_path, capsys):
    sig = WorkloadSignal.square(1996.0, 225.0, 285.0)
    config = single_sensor_config(sig, clock_skew=0.99812)
    config_path = tmp_path / "sim.json"
    config_path.write_text(json.dumps(config_to_dict(config)))
    trace = tmp_path / "alias.csv"
    assert run_cli(["simulate", "--config", str(config_path), "--sensor", "PWRPROC",
                    "--duration", "14", "--readout-interval", "0.005",
                    "--out", str(trace)]) == 0
    capsys.readouterr()
    pattern_file = tmp_path / "pattern.txt"
    code = run_cli(["analyze-aliasing", "--trace", str(trace),
                    "--low", "225", "--high", "285", "--workload-hz", "1996",
                    "--pattern-data", str(pattern_file)])
    assert code == 0
    payload = read_json(capsys)
    assert payload["aliasing_detected"] is True
    assert payload["spread_ratio"] <= 1.2
    assert abs(payload["f_pattern_hz"] - 0.24) < 0.05
    assert abs(payload["rate_estimate"]["f_sampling_sa_s"] - 1996.24) < 0.05
    assert pattern_file.exists()


def test_fit_json(tmp_path, capsys):
    data = tmp_path / "xy.csv"
    data.write_text("x,y\n" + "".join(f"{x},{1 + x * x}\n" for x in range(8)))
    curve = tmp_path / "curve.txt"
    code = run_cli(["fit", "--data", str(data), "--curve", str(curve)])
    assert code == 0
    payload = read_json(capsys)
    assert payload["c0"] == pytest.approx(1.0, abs=1e-9)
    assert payload["c2"] == pytest.approx(1.0, abs=1e-9)
    assert payload["residual_mae_w"] < 1e-9
    assert len(curve.read_text().splitlines()) == 200


def test_sum_check_recovers_unaccounted_offset(tmp_path, capsys):
    signals = {
        "PWRSYS": WorkloadSignal.constant(180.0),
        "PWRPROC": WorkloadSignal.constant(100.0),
        "PWRMEM": WorkloadSignal.constant(50.0),
        "PWRGPU": WorkloadSignal.constant(30.0),
    }
    config = standard_config(signals=signals, unaccounted_bulk=25.0)
    config_path = tmp_path / "sim.json"
    config_path.write_text(json.dumps(config_to_dict(config)))
    paths = {}
    for name in ("PWRSYS", "PWRPROC", "PWRMEM", "PWRGPU"):
        paths[name] = tmp_path / f"{name}.csv"
        assert run_cli(["simulate", "--config", str(config_path), "--sensor", name,
                        "--duration", "4", "--readout-interval", "0.005",
                        "--out", str(paths[name])]) == 0
    capsys.readouterr()
    residuals = tmp_path / "residuals.txt"
    code = run_cli(["sum-check", "--bulk", str(paths["PWRSYS"]),
                    "--component", str(paths["PWRPROC"]),
                    "--component", str(paths["PWRMEM"]),
                    "--component", str(paths["PWRGPU"]),
                    "--residuals", str(residuals)])
    assert code == 0
    payload = read_json(capsys)
    assert payload["mae_w"] == pytest.approx(25.0, abs=0.5)
    assert residuals.exists()


def test_out_flag_writes_json_file(sim_trace, tmp_path, capsys):
    out = tmp_path / "rate.json"
    code = run_cli(["update-rate", "--trace", str(sim_trace), "--out", str(out)])
    assert code == 0
    assert capsys.readouterr().out == ""
    assert "rate_sa_s" in json.loads(out.read_text())
