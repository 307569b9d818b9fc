"""Config parsing, unit conversion, CLI behaviour."""

import pytest

from rf_intermit_sim.cli import main
from rf_intermit_sim.config import AppConfig, ConfigError, load_config, parse_config_file
from rf_intermit_sim.harness import CSV_VERSION_LINE


def test_defaults_build_valid_objects():
    app = AppConfig.defaults()
    params = app.channel_params()
    assert params.p_t_w == pytest.approx(1.0)  # 30 dBm
    assert params.g_t == pytest.approx(7.943282, rel=1e-6)
    assert params.lambda_m == pytest.approx(0.328540, rel=1e-5)
    cfg = app.device_config()
    assert cfg.c_f == pytest.approx(900e-6)
    assert cfg.p_transmit_w == cfg.p_active_w  # 0 sentinel follows active draw
    task = app.task_spec()
    assert task.fragments == 40
    assert task.total_work_us == 1_056_000


def test_config_file_parse_and_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment line\n"
        "channel.eta = 0.4   # trailing comment\n"
        "policy = iem\n"
        "readme.measure_during_task = true\n"
        "task.total_bytes = 64\n"
    )
    app = load_config(path)
    assert app["channel.eta"] == 0.4
    assert app["policy"] == "iem"
    assert app["readme.measure_during_task"] is True
    assert app["task.total_bytes"] == 64
    # cli-style overrides win over the file
    app2 = load_config(path, {"channel.eta": 0.5})
    assert app2["channel.eta"] == 0.5


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("channel.nonsense = 3\n")
    with pytest.raises(ConfigError):
        parse_config_file(path)


def test_bad_value_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("channel.eta = notanumber\n")
    with pytest.raises(ConfigError):
        parse_config_file(path)


def test_dump_round_trips(tmp_path):
    app = AppConfig.defaults().with_overrides({"channel.eta": 0.123})
    path = tmp_path / "dump.cfg"
    path.write_text(app.dump())
    again = load_config(path)
    assert again["channel.eta"] == 0.123
    assert again.values.keys() == app.values.keys()


def test_cli_benchmark_requires_seed(tmp_path, capsys):
    rc = main(["benchmark", "--out", str(tmp_path)])
    assert rc == 2
    assert "--seed" in capsys.readouterr().err


def test_cli_sweep_end_to_end(tmp_path):
    out = tmp_path / "out"
    rc = main(
        ["sweep", "--seed", "3", "--out", str(out), "--distances", "0.2,0.5", "--plot"]
    )
    assert rc == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == CSV_VERSION_LINE
    assert len(lines) == 4
    assert (out / "report.txt").exists()
    assert (out / "sweep.svg").exists()


def test_cli_set_override_and_policy_flag(tmp_path):
    out = tmp_path / "bench"
    rc = main(
        [
            "benchmark",
            "--seed",
            "3",
            "--out",
            str(out),
            "--distances",
            "0.2",
            "--trials",
            "2",
            "--set",
            "bench.warmup_s=1.0",
        ]
    )
    assert rc == 0
    lines = (out / "benchmark.csv").read_text().splitlines()
    assert lines[1] == "policy,d_m,trial,success,latency_ms,brownouts"
    assert len(lines) == 2 + 3 * 2  # header lines + 3 policies x 2 trials


def test_cli_unknown_set_key_fails(tmp_path):
    rc = main(["sweep", "--seed", "1", "--out", str(tmp_path), "--set", "bogus=1"])
    assert rc == 2


def test_cli_calibrate_infeasible_exits_nonzero(tmp_path, capsys):
    rc = main(
        [
            "calibrate",
            "--seed",
            "1",
            "--out",
            str(tmp_path),
            "--set",
            "calibrate.plateau_rate=900",
        ]
    )
    assert rc == 1
    assert "infeasible" in capsys.readouterr().err
    assert (tmp_path / "report.txt").exists()


def test_cli_correlate_prints_coefficient(tmp_path, capsys):
    rc = main(
        ["correlate", "--seed", "2", "--out", str(tmp_path), "--distances", "0.2,0.4,0.6"]
    )
    assert rc == 0
    assert "pearson" in capsys.readouterr().out
