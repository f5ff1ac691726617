import csv
import json

import numpy as np
import pytest

from dephasing import cli, runner
from dephasing.analytic import ou_quadratic_derived
from dephasing.errors import DomainError
from dephasing.noise import OuParams
from dephasing.runner import CSV_COLUMNS, RunConfig


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return header, rows


def test_run_config_validation():
    with pytest.raises(DomainError):
        RunConfig(noise="rtn", k=2, solver="volterra")
    with pytest.raises(DomainError):
        RunConfig(noise="oun", k=2, solver="tcl")
    with pytest.raises(DomainError):
        RunConfig(t_max=1.0, dt=0.3)
    with pytest.raises(DomainError):
        RunConfig(solver="euler")
    with pytest.raises(DomainError):
        RunConfig(b=1.0)


def test_run_writes_exact_columns(tmp_path):
    out = tmp_path / "rtn.csv"
    rc = cli.main(["run", "--noise", "rtn", "--k", "2", "--c", "0.5", "--nu", "2", "--a", "0.3",
                   "--t-max", "1", "--dt", "0.1", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert any(h == "# solver = analytic" for h in header)
    assert all(float(r["abs_F"]) == 1.0 for r in rows)
    assert all(float(r["shift"]) == -2.0 for r in rows)
    assert all(r["se_re"] == "" and r["se_im"] == "" for r in rows)


def test_full_precision_round_trip(tmp_path):
    cfg = RunConfig(noise="oun", sigma=2.0, chi=1.0, b=0.3, t_max=1.0, dt=0.1)
    trace = runner.run_solver(cfg)
    runner.write_csv(trace, tmp_path / "a.csv", cfg)
    _, rows = read_csv(tmp_path / "a.csv")
    re = np.array([float(r["re_F"]) for r in rows])
    np.testing.assert_array_equal(re, trace.F.real)


def test_mc_runs_are_reproducible(tmp_path):
    args = ["run", "--noise", "oun", "--sigma", "2", "--chi", "1", "--b", "0.5", "--solver", "mc",
            "--n-traj", "40000", "--seed", "7", "--t-max", "1", "--dt", "0.25"]
    cli.main(args + ["--out", str(tmp_path / "a.csv"), "--threads", "1"])
    cli.main(args + ["--out", str(tmp_path / "b.csv"), "--threads", "3"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    _, rows = read_csv(tmp_path / "a.csv")
    assert rows[1]["se_re"] != ""


def test_config_file_and_flag_override(tmp_path):
    conf = tmp_path / "case.conf"
    conf.write_text("# OU linear\nnoise = oun\nsigma = 2\nchi = 1\nb = 0.5\nc = 1\nt_max = 1\ndt = 0.5\n")
    out = tmp_path / "x.csv"
    assert cli.main(["run", "--config", str(conf), "--b", "0.2", "--out", str(out)]) == 0
    header, _ = read_csv(out)
    assert "# b = 0.2" in header and "# sigma = 2.0" in header
    bad = tmp_path / "bad.conf"
    bad.write_text("nosuchkey = 3\n")
    assert cli.main(["run", "--config", str(bad)]) == 1


def test_header_reproduces_run(tmp_path, capsys):
    out = tmp_path / "x.csv"
    cli.main(["run", "--noise", "rtn", "--c", "3", "--a", "0.5", "--t-max", "2", "--dt", "0.5", "--out", str(out)])
    header, _ = read_csv(out)
    conf = tmp_path / "echo.conf"
    conf.write_text("\n".join(h[2:] for h in header) + "\n")
    out2 = tmp_path / "y.csv"
    cli.main(["run", "--config", str(conf), "--out", str(out2)])
    assert out.read_bytes() == out2.read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert cli.main(["run", "--noise", "oun", "--k", "2", "--solver", "tcl"]) == 1
    assert "tcl" in capsys.readouterr().err
    assert cli.main(["run", "--out", str(tmp_path / "no" / "such" / "dir.csv")]) == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--noise", "pink"])
    assert exc.value.code == 1
    assert cli.main(["figure", "fig9z"]) == 1
    assert "fig1a" in capsys.readouterr().err


def test_compare_exact_routes(capsys):
    rc = cli.main(["compare", "--noise", "oun", "--sigma", "2", "--chi", "1", "--b", "0.5",
                   "--solvers", "analytic,tcl,analytic,volterra", "--t-max", "2", "--dt", "0.1"])
    report = json.loads(capsys.readouterr().out)
    assert rc == 0 and report["pass"]
    assert "volterra" in report["incompatible"]
    assert report["max_abs_dev"] < 1e-8
    assert set(report) >= {"case", "solvers", "max_abs_dev", "rms_dev", "tolerance", "pass"}
    same = [p for p in report["pairs"] if p["solvers"] == ["analytic", "analytic"]][0]
    assert same["max_abs_dev"] == 0.0


def test_compare_sle_and_mc(tmp_path):
    out = tmp_path / "r.json"
    rc = cli.main(["compare", "--noise", "oun", "--sigma", "2", "--chi", "1", "--b", "0.5", "--k", "2",
                   "--solvers", "analytic,sle,mc", "--n-traj", "100000", "--t-max", "2", "--dt", "0.25",
                   "--out", str(out)])
    report = json.loads(out.read_text())
    assert rc == 0 and report["pass"]
    assert all("fraction_within" in p for p in report["pairs"] if "mc" in p["solvers"])


def test_compare_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(runner, "EXACT_TOL", 0.0)
    rc = cli.main(["compare", "--noise", "rtn", "--c", "0.8", "--a", "0.6", "--solvers", "analytic,volterra",
                   "--t-max", "1", "--dt", "0.1"])
    assert rc == 2
    assert json.loads(capsys.readouterr().out)["pass"] is False


def test_compare_rejects_mismatched_grids():
    a = RunConfig(dt=0.1, t_max=1.0)
    b = RunConfig(dt=0.2, t_max=1.0, solver="tcl")
    with pytest.raises(DomainError):
        runner.compare([a, b])


def test_steady_command(capsys):
    assert cli.main(["steady", "--noise", "oun", "--c", "1", "--sigma", "2", "--gamma", "1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"gamma_steady": 4.0, "shift_steady": 0.0}
    cli.main(["steady", "--noise", "rtn", "--k", "2", "--c", "0.5", "--nu", "2"])
    assert json.loads(capsys.readouterr().out) == {"gamma_steady": 0.0, "shift_steady": -2.0}
    cli.main(["steady", "--noise", "rtn", "--c", "3"])
    assert json.loads(capsys.readouterr().out)["gamma_steady"] is None


def test_numerical_failure_exit_code(monkeypatch, capsys):
    from dephasing.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("non-finite field")

    monkeypatch.setattr(runner, "run_solver", boom)
    assert cli.main(["run"]) == 3


@pytest.mark.parametrize("preset", runner.FIGURE_PRESETS)
def test_every_preset_writes_csvs(preset, tmp_path):
    paths = runner.figure(preset, str(tmp_path))
    assert len(paths) >= 2
    for p in paths:
        _, rows = read_csv(p)
        assert len(rows) > 100
        assert float(rows[0]["abs_F"]) == 1.0


def _column(path, name):
    _, rows = read_csv(path)
    return np.array([float(r[name]) for r in rows])


def test_fig5b_revival_and_monotone_edge(tmp_path):
    paths = {p.split("_")[-1][:-4]: p for p in runner.figure("fig5b", str(tmp_path))}
    f0 = _column(paths["a+0.0"], "abs_F")
    f1 = _column(paths["a+1.0"], "abs_F")
    assert np.any(np.diff(f0) > 0)
    assert np.all(np.diff(f1) <= 1e-15)


def test_fig2c_shift_approaches_steady(tmp_path):
    d = ou_quadratic_derived(OuParams(1.0, 2.0), 1.0)
    for p in runner.figure("fig2c", str(tmp_path)):
        s = _column(p, "shift")
        assert abs(s[-1] + d.beta / 2) < 1e-3


def test_fig1a_curves_decrease(tmp_path):
    for p in runner.figure("fig1a", str(tmp_path)):
        assert np.all(np.diff(_column(p, "abs_F")) < 0)
