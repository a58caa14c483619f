import json

import pytest

from diskspdc.cli import main

TINY_CFG = """
seed = 777

[source]
pump_power_uw = 10.0
signal_losses_db = 3.0
idler_losses_db = 3.0
jitter_sigma_ps = 5.0
dark_rate_hz = 0.0

[sweep]
powers_uw = 0.5, 1.0
duration_s = 0.05
losses_db = 3.0
parallelism = 1

[g2]
pump_power_uw = 5.0
duration_s = 0.2
window_ps = 400
tau_max_ns = 2.0
tau_points = 5
losses_db = 2.0

[franson]
duration_s = 0.3
integration_s = 0.9
xi_points = 12
"""


def run_cli(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def table_lines(out):
    return [ln for ln in out.splitlines() if not ln.startswith("#")]


def write_cfg(tmp_path, text=TINY_CFG):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_help_includes_config_reference(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for name in ("modes", "match", "trace", "scan", "simulate", "coinc",
                 "g2", "franson", "spectrum", "sweep", "run"):
        assert name in out
    assert "pump_power_uw" in out
    assert "[resonator.family]" in out


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "diskspdc" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[source]\nnot_a_key = 1\n")
    rc, out, err = run_cli(["modes", "-c", str(path)], capsys)
    assert rc == 2
    assert err.startswith("config error:")
    assert "bad.cfg:2" in err


def test_missing_config_file(capsys):
    rc, out, err = run_cli(["modes", "-c", "/no/such/file.cfg"], capsys)
    assert rc == 2
    assert err.startswith("config error:")


def test_seed_range_check(capsys):
    rc, out, err = run_cli(["modes", "--family", "pump", "--seed", "-1"],
                           capsys)
    assert rc == 2
    assert "--seed" in err


def test_missing_events_file(capsys):
    rc, out, err = run_cli(["coinc", "--events", "/no/such/events.bin"],
                           capsys)
    assert rc == 3
    assert err.startswith("error:")


def test_run_without_experiment_key(capsys):
    rc, out, err = run_cli(["run"], capsys)
    assert rc == 2
    assert "experiment" in err


def test_modes_csv_output(capsys):
    rc, out, err = run_cli(["modes", "--family", "pump"], capsys)
    assert rc == 0
    assert err == ""
    lines = table_lines(out)
    assert lines[0] == "family,m,wavelength_nm,frequency_ghz,fsr_nm," \
                       "linewidth_ghz"
    assert len(lines) == 12  # header + 11 pump resonances
    assert all(ln.startswith("pump,") for ln in lines[1:])
    assert any(ln.startswith("#") for ln in out.splitlines())


def test_json_output(capsys):
    rc, out, err = run_cli(["modes", "--family", "pump", "-f", "json"],
                           capsys)
    assert rc == 0
    doc = json.loads("\n".join(table_lines(out)))
    assert doc["columns"][:2] == ["family", "m"]
    assert len(doc["rows"]) == 11


def test_reruns_byte_identical(capsys):
    rc_a, out_a, _ = run_cli(["scan"], capsys)
    rc_b, out_b, _ = run_cli(["scan"], capsys)
    assert rc_a == rc_b == 0
    assert out_a == out_b


def test_seed_changes_spectrum_counts(capsys):
    rc_a, out_a, _ = run_cli(["spectrum", "--seed", "7"], capsys)
    rc_b, out_b, _ = run_cli(["spectrum", "--seed", "8"], capsys)
    assert rc_a == rc_b == 0
    assert out_a != out_b


def test_out_file(tmp_path, capsys):
    rc, out, err = run_cli(["modes", "--family", "pump"], capsys)
    assert rc == 0
    table = "\n".join(table_lines(out)) + "\n"
    out_path = tmp_path / "modes.csv"
    rc, out2, err = run_cli(["modes", "--family", "pump", "-o",
                             str(out_path)], capsys)
    assert rc == 0
    assert f"# wrote {out_path}" in out2
    assert out_path.read_text() == table


def test_trace_options(capsys):
    rc, out, err = run_cli(["trace", "--delta-m", "-1", "--turns", "2"],
                           capsys)
    assert rc == 0
    lines = table_lines(out)
    assert lines[0] == "theta_rad,re_amplitude,im_amplitude,intensity"
    assert len(lines) == 2 * 4096 + 2
    assert "delta_m = -1" in out


def test_simulate_coinc_roundtrip(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    ev = str(tmp_path / "ev.ttps")
    rc, out, err = run_cli(["simulate", "-c", cfg, "--events", ev,
                            "--duration", "0.02"], capsys)
    assert rc == 0
    assert (tmp_path / "ev.ttps").exists()

    rc, out, err = run_cli(["coinc", "-c", cfg, "--events", ev], capsys)
    assert rc == 0
    lines = table_lines(out)
    assert lines[0].startswith("n1,n2,n12,")
    n12 = int(lines[1].split(",")[2])
    assert n12 > 100


def test_simulate_csv_events(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    ev = str(tmp_path / "ev.csv")
    rc, out, err = run_cli(["simulate", "-c", cfg, "--events", ev,
                            "--events-format", "csv", "--duration", "0.01"],
                           capsys)
    assert rc == 0
    first = (tmp_path / "ev.csv").read_text().splitlines()[0]
    assert first == "channel,timestamp_ps"
    rc, out, err = run_cli(["coinc", "-c", cfg, "--events", ev], capsys)
    assert rc == 0


def test_run_dispatches_configured_experiment(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "experiment = scan\n")
    rc_run, out_run, _ = run_cli(["run", "-c", cfg], capsys)
    rc_scan, out_scan, _ = run_cli(["scan", "-c", cfg], capsys)
    assert rc_run == rc_scan == 0
    assert out_run == out_scan


def test_each_experiment_runs(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    for argv in (["match", "-c", cfg],
                 ["spectrum", "-c", cfg],
                 ["sweep", "-c", cfg],
                 ["g2", "-c", cfg],
                 ["franson", "-c", cfg],
                 ["coinc", "-c", cfg, "--duration", "0.02"]):
        rc, out, err = run_cli(argv, capsys)
        assert rc == 0, (argv, err)
        assert table_lines(out), argv
