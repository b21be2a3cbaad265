from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jflow import cli, herm
from jflow import geometry as geo
from jflow.config import RunConfig, load_config, parse_config, replace_config
from jflow.errors import ConfigError
from jflow.functionals import FunctionalLedger


# -- config ------------------------------------------------------------------------


def test_default_config_roundtrip():
    cfg = RunConfig()
    assert parse_config(cfg.to_text()) == cfg


positive = st.floats(1e-12, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=60)
@given(st.sampled_from(["strict", "boundary", "trivial"]), st.integers(2, 64).map(lambda k: 2 * k),
       st.sampled_from(["rk4", "explicit-euler"]), positive, positive, positive, st.booleans(),
       st.one_of(st.none(), positive), st.integers(0, 1000), st.text("abcxyz_/", min_size=1, max_size=12))
def test_config_roundtrip_property(name, N, method, t_max, tol, interval, solve, dt0, seed, out):
    cfg = RunConfig(scenario=name, N=N, method=method, t_max=t_max, tol_converge=tol,
                    record_interval=interval, solve_stationary=solve, dt0=dt0, seed=seed, out_dir=out)
    once = parse_config(cfg.to_text())
    assert once == cfg
    assert parse_config(once.to_text()) == once


def test_config_error_names_field_and_line():
    text = "[scenario]\nname = strict\n[flow]\ntol_converge = -1e-3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "tol_converge" and info.value.line == 4


@pytest.mark.parametrize("text, field", [
    ("[scenario]\nN = 7\n", "N"),
    ("[scenario]\nn = 6\n", "n"),
    ("[scenario]\nn = 2\nm = 2\n", "m"),
    ("[flow]\nmethod = leapfrog\n", "method"),
    ("[flow]\nt_max = soon\n", "t_max"),
    ("[stationary]\nsolve = maybe\n", "solve_stationary"),
    ("[flow]\nbogus = 1\n", "bogus"),
])
def test_config_rejections(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_config_unknown_section_and_syntax():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[extras]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("no section header\n")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_replace_config_validates():
    with pytest.raises(ConfigError):
        replace_config(RunConfig(), t_max=0.0)


# -- run ---------------------------------------------------------------------------


def _write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return p


def test_run_trivial(tmp_path, capsys):
    cfg = _write(tmp_path, "[scenario]\nname = trivial\nN = 16\n[flow]\nt_max = 1.0\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("config.ini", "setup.bin", "psi.bin", "ledger.jsonl", "monitor.json", "phi_final.bin"):
        assert (out / name).exists()
    ledger = FunctionalLedger.read_jsonl(out / "ledger.jsonl")
    assert len(ledger) == 1 and ledger.rows[-1]["converged"] is True
    assert load_config(out / "config.ini") == replace_config(load_config(cfg), out_dir=str(out))
    head, arrays = geo.read_snapshot(out / "setup.bin")
    assert head["kind"] == "setup" and set(arrays) == {"chi", "chi_tilde", "omega", "phi0"}


def test_run_strict_converges(tmp_path):
    cfg = _write(tmp_path, "[scenario]\nname = strict\nN = 16\n[flow]\nt_max = 30\nrecord_interval = 1.0\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    ledger = FunctionalLedger.read_jsonl(out / "ledger.jsonl")
    assert ledger.rows[-1]["converged"] is True
    summary = json.loads((out / "monitor.json").read_text())
    assert summary["violations"] == [] and summary["converged"] is True
    assert summary["stationary"]["spread"] < 1e-6


def test_run_negative_tol_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, "[scenario]\nname = trivial\n[flow]\ntol_converge = -1\n")
    assert cli.main(["run", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "tol_converge" in err and "line 4" in err


def test_run_solver_error_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path, "[scenario]\nname = conformal\nN = 8\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "CalibrationError" in capsys.readouterr().err


def test_run_is_deterministic(tmp_path):
    cfg = _write(tmp_path, "[scenario]\nname = strict\nN = 16\n[flow]\nt_max = 0.05\nrecord_interval = 0.01\n"
                           "[stationary]\nsolve = false\n")
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / d), "--threads", "1"]) == 0
    assert (tmp_path / "a" / "ledger.jsonl").read_bytes() == (tmp_path / "b" / "ledger.jsonl").read_bytes()


def test_threads_env_fallback(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "[scenario]\nname = trivial\nN = 8\n")
    monkeypatch.setenv("JFLOW_THREADS", "two")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    monkeypatch.setenv("JFLOW_THREADS", "2")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_seed_flag_changes_initial_potential(tmp_path):
    cfg = _write(tmp_path, "[scenario]\nname = strict\nN = 8\n[flow]\nt_max = 0.001\n"
                           "[stationary]\nsolve = false\n")
    phis = []
    for s in ("1", "2"):
        out = tmp_path / s
        assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--seed", s]) == 0
        phis.append(geo.read_snapshot(out / "setup.bin")[1]["phi0"])
    assert not np.array_equal(*phis)


# -- report --------------------------------------------------------------------------


def test_report_from_trivial_run(tmp_path):
    cfg = _write(tmp_path, "[scenario]\nname = trivial\nN = 8\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["report", str(out / "ledger.jsonl")]) == 0
    with open(out / "ledger.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) - 1 == len(FunctionalLedger.read_jsonl(out / "ledger.jsonl"))
    plot = np.loadtxt(out / "plot.dat", ndmin=2)
    assert np.all(plot[:, 2] == 0.0) and np.all(plot[:, 3] == 0.0)


def test_report_row_count(tmp_path):
    led = FunctionalLedger(2)
    for k in range(5):
        led.append({"t": 0.1 * k, "dt": 0.1, "sup_dphidt": 0.0, "inf_dphidt": 0.0, "ratio_min": 1.0,
                    "ratio_max": 1.0, "phi_min": 0.0, "phi_max": 0.0, "w_max": 2.0, "J": [0.0, 0.0, k],
                    "combined": 0.0, "dissipation": 0.0, "theorem_norm": 0.0, "violations": []})
    p = tmp_path / "ledger.jsonl"
    led.write_jsonl(p)
    assert cli.main(["report", str(p), "--out", str(tmp_path / "rep")]) == 0
    with open(tmp_path / "rep" / "ledger.csv") as fh:
        assert len(list(csv.reader(fh))) == 6
    drift = np.loadtxt(tmp_path / "rep" / "plot.dat")[:, 2]
    assert np.array_equal(drift, np.arange(5.0))


def test_report_truncated_ledger(tmp_path, capsys):
    cfg = _write(tmp_path, "[scenario]\nname = strict\nN = 8\n[flow]\nt_max = 0.002\nrecord_interval = 0.001\n"
                           "[stationary]\nsolve = false\n")
    out = tmp_path / "out"
    cli.main(["run", "--config", str(cfg), "--out", str(out)])
    p = out / "ledger.jsonl"
    raw = p.read_bytes()
    p.write_bytes(raw[:-20])
    offset = raw[:-1].rindex(b"\n") + 1
    assert cli.main(["report", str(p)]) == 1
    assert f"byte offset {offset}" in capsys.readouterr().err


def test_report_missing_file(tmp_path):
    assert cli.main(["report", str(tmp_path / "none.jsonl")]) == 1


# -- verify ---------------------------------------------------------------------------


def test_verify_default_suite(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 10 and "FAIL" not in out


def test_verify_detects_injected_sign_bug(monkeypatch, capsys):
    real = herm.elem_sym_partial

    def broken(k, i, values):
        v = real(k, i, values)
        return -v if k >= 1 else v

    monkeypatch.setattr(herm, "elem_sym_partial", broken)
    assert cli.main(["verify"]) == 2
    out = capsys.readouterr().out
    assert "failing properties" in out and "elem_sym_partial_identity" in out


def test_verify_with_bad_config(tmp_path):
    cfg = _write(tmp_path, "[flow]\nt_max = -1\n")
    assert cli.main(["verify", str(cfg)]) == 1
