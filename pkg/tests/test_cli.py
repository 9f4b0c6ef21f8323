from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from degenfrac import acceptance, cli
from degenfrac.errors import SingularSymbol
from degenfrac.reports import decode
from degenfrac.spectral_calculus import read_snapshot

REPORT_KEYS = {"check", "anchor", "tolerance", "observed", "pass", "model", "grid", "seed"}


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestMl:
    def test_exponential_row(self, capsys):
        code, out, _ = run(capsys, "ml", "--beta", "1", "--gamma", "1", "--z", "1")
        assert code == 0
        header, row = out.splitlines()
        assert header.split(",")[4] == "value_re"
        assert row.split(",")[4] == "2.718281828459045"

    def test_several_points(self, capsys):
        code, out, _ = run(capsys, "ml", "--beta", "2", "--z=-1,-4", "--z", "0")
        rows = [r.split(",") for r in out.splitlines()[1:]]
        assert code == 0 and len(rows) == 3
        np.testing.assert_allclose([float(r[4]) for r in rows], [np.cos(1), np.cos(2), 1.0], rtol=1e-14)

    def test_csv_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "ml", "--beta", "1", "--z", "1i", "--out", str(tmp_path), "--csv", "e.csv")
        row = (tmp_path / "e.csv").read_text().splitlines()[1].split(",")
        assert code == 0
        assert float(row[4]) == pytest.approx(np.cos(1.0), rel=1e-15)
        assert float(row[5]) == pytest.approx(np.sin(1.0), rel=1e-15)

    @pytest.mark.parametrize("argv", [["ml", "--beta", "1"], ["ml", "--beta", "0", "--z", "1"],
                                      ["ml", "--beta", "1", "--z", "one"], ["ml"]])
    def test_bad_input(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2


class TestConfigErrors:
    def test_unknown_model_names_registry(self, capsys):
        code, _, err = run(capsys, "verify", "--model", "rosby")
        assert code == 2
        for name in ("rossby", "sobolev", "boussinesq", "gravity_gyroscopic", "rotating_viscous"):
            assert name in err

    def test_unknown_model_in_solve(self, capsys, tmp_path):
        code, _, err = run(capsys, "solve", "--model", "rosby", "--out", str(tmp_path))
        assert code == 2 and "rossby" in err

    @pytest.mark.parametrize("argv", [
        ["verify", "--model", "rossby", "--grid", "31x32"],
        ["verify", "--model", "rossby", "--grid", "16x16x16"],
        ["verify", "--grid", "32x32"],
        ["verify", "--criteria", "99"],
        ["verify", "--criteria", "11", "--tolerance", "nu_bound_ceiling=-1"],
        ["solve", "--model", "rossby", "--param", "beta=-1"],
        ["solve", "--model", "rossby", "--data", "missing.dfrc"],
        ["contour", "--problem", "missing.json"],
        ["contour", "--problem", "{not json"],
        ["contour", "--scenario", "triangle"],
        ["nonsense"],
        [],
    ])
    def test_exit_two(self, capsys, tmp_path, argv):
        assert run(capsys, *argv, *(["--out", str(tmp_path)] if argv and argv[0] in cli.COMMANDS else []))[0] == 2

    def test_thread_variable_validated(self, capsys, monkeypatch):
        monkeypatch.setenv("DEGENFRAC_THREADS", "many")
        assert run(capsys, "ml", "--beta", "1", "--z", "1")[0] == 2
        monkeypatch.setenv("DEGENFRAC_THREADS", "2")
        assert run(capsys, "ml", "--beta", "1", "--z", "1")[0] == 0


class TestConfigFile:
    def test_key_value_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# Mittag-Leffler at two points\ncommand=ml\nbeta=1\nz=[\"1\", \"0\"]\n")
        code, out, _ = run(capsys, "--config", str(cfg))
        rows = out.splitlines()[1:]
        assert code == 0 and rows[0].split(",")[4] == "2.718281828459045" and len(rows) == 2

    def test_command_line_wins(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("beta=2\ngamma=1\n")
        code, out, _ = run(capsys, "ml", "--config", str(cfg), "--beta", "1", "--z", "1")
        assert code == 0 and out.splitlines()[1].startswith("1.0,1.0,")

    def test_json_matrices(self, capsys, tmp_path):
        doc = {"q": [0, 1], "zeta": 1.0, "theta": 0.4 * np.pi, "r": 0.5, "a": 0.75, "nu_prime": -0.5,
               "matrices": [[[0.25]], [[1.0]]], "C": [[1.0]]}
        cfg = tmp_path / "pencil.cfg"
        cfg.write_text(f"command=contour\nproblem={json.dumps(doc)}\nout={tmp_path}\n")
        code, _, _ = run(capsys, "--config", str(cfg))
        assert code == 0
        written = json.loads((tmp_path / "contour_problem.json").read_text())
        assert written["q"] == [0, 1] and written["matrices"][0] == [[0.25]]

    @pytest.mark.parametrize("text", ["beta 1\n", "colour=blue\ncommand=ml\n", "command=ml\nbeta=1\nbeta=2\n",
                                      "command=fly\n"])
    def test_malformed(self, capsys, tmp_path, text):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(text)
        assert run(capsys, "--config", str(cfg))[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "--config", str(tmp_path / "none.cfg"), "ml", "--beta", "1", "--z", "1")[0] == 2


class TestVerify:
    def test_rossby_example(self, capsys, tmp_path):
        code, out, _ = run(capsys, "verify", "--model", "rossby", "--grid", "32x32", "--seed", "7",
                           "--out", str(tmp_path))
        assert code == 0
        lines = decode((tmp_path / "verify_report.jsonl").read_text())
        assert lines and all(line["pass"] for line in lines)
        assert all(REPORT_KEYS <= set(line) for line in lines)
        assert {line["seed"] for line in lines} == {7}
        assert {line["criterion"] for line in lines} == set(range(1, 14))
        assert {line["grid"] for line in lines if line["check"] == "route_equivalence"} == {"32x32"}
        assert out.count("PASS") == 13

    def test_failure_exit_one(self, capsys, tmp_path):
        code, _, _ = run(capsys, "verify", "--criteria", "12", "--tolerance", "norm_bound_ratio=0.5",
                         "--out", str(tmp_path))
        lines = decode((tmp_path / "verify_report.jsonl").read_text())
        assert code == 1
        assert {line["tolerance"] for line in lines} == {0.5}

    def test_numerical_error_exit_three(self, capsys, tmp_path, monkeypatch):
        def broken(opts, emit):
            raise SingularSymbol("det P2 vanishes", xi=(0.0, 0.0))

        crit = acceptance.CRITERIA[11]
        monkeypatch.setitem(acceptance.CRITERIA, 11, acceptance.Criterion(11, crit.name, crit.budget, broken))
        code, _, _ = run(capsys, "verify", "--criteria", "11,12", "--out", str(tmp_path))
        lines = decode((tmp_path / "verify_report.jsonl").read_text())
        assert code == 3
        err = [line for line in lines if line["check"] == "numerical_error"]
        assert err[0]["detail"]["xi"] == [0.0, 0.0] and err[0]["detail"]["error"] == "SingularSymbol"
        assert any(line["criterion"] == 12 and line["pass"] for line in lines)


class TestSolve:
    def test_snapshots(self, capsys, tmp_path):
        code, _, _ = run(capsys, "solve", "--model", "rossby", "--grid", "8x8", "--times", "0,1",
                         "--out", str(tmp_path))
        assert code == 0
        index = decode((tmp_path / "solve_index.jsonl").read_text())
        assert [row["t"] for row in index] == [[0.0, 0.0], [1.0, 0.0]]
        snap = read_snapshot(str(tmp_path / "u_001.dfrc"))
        assert snap.grid.sizes == (8, 8) and snap.m == 1
        assert (tmp_path / "u_001.csv").read_text().startswith("x0,x1,re0,im0\n")

    def test_deterministic_and_routes_agree(self, capsys, tmp_path):
        outs = []
        for k, route in enumerate(("modewise", "modewise", "series")):
            d = tmp_path / str(k)
            assert run(capsys, "solve", "--model", "sobolev", "--grid", "8x8x8", "--times", "1,1+1i",
                       "--route", route, "--seed", "3", "--out", str(d))[0] == 0
            outs.append(d)
        for name in ("u_000.dfrc", "u_001.csv", "solve_index.jsonl"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        a = read_snapshot(str(outs[0] / "u_001.dfrc")).data
        b = read_snapshot(str(outs[2] / "u_001.dfrc")).data
        assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))

    def test_data_from_snapshot(self, capsys, tmp_path):
        run(capsys, "solve", "--model", "rossby", "--grid", "8x8", "--times", "0", "--out", str(tmp_path / "a"))
        code, _, _ = run(capsys, "solve", "--model", "rossby", "--data", str(tmp_path / "a" / "u_000.dfrc"),
                         "--times", "0.5", "--out", str(tmp_path / "b"))
        assert code == 0

    def test_numerical_error_context(self, capsys, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise SingularSymbol("det P2 vanishes", xi=(1.0, -2.0))

        monkeypatch.setattr(cli, "solve_modewise", broken)
        code, _, _ = run(capsys, "solve", "--model", "rossby", "--grid", "8x8", "--out", str(tmp_path))
        line = decode((tmp_path / "solve_report.jsonl").read_text())[0]
        assert code == 3
        assert line["detail"]["xi"] == [1.0, -2.0] and line["model"] == "rossby" and not line["pass"]


class TestDispersion:
    def test_rossby_mode(self, capsys):
        code, out, _ = run(capsys, "dispersion", "--model", "rossby", "--xi", "1,2")
        assert code == 0
        row = out.splitlines()[1].split(",")
        assert float(row[3]) == 0.0 and float(row[4]) == pytest.approx(0.4, rel=1e-15)

    def test_lattice_skips_origin(self, capsys):
        code, out, _ = run(capsys, "dispersion", "--model", "sobolev", "--grid", "4x4x4")
        rows = out.splitlines()[1:]
        assert code == 0 and len(rows) == 2 * (64 - 1)

    def test_wrong_dimension(self, capsys):
        assert run(capsys, "dispersion", "--model", "sobolev", "--xi", "1,2")[0] == 2


class TestContour:
    @pytest.mark.parametrize("scenario, zeta", [("scalar", "1"), ("scalar", "1.5"), ("second_order", "1"),
                                                ("diagonal3x3", "0.8")])
    def test_scenarios_pass(self, capsys, tmp_path, scenario, zeta):
        code, _, _ = run(capsys, "contour", "--scenario", scenario, "--zeta", zeta, "--out", str(tmp_path))
        lines = decode((tmp_path / "contour_report.jsonl").read_text())
        assert code == 0
        checks = {line["check"] for line in lines}
        assert {"contour_pde_residual", "contour_doubling_shift", "initial_limit_extrapolated"} <= checks
        rows = (tmp_path / "contour_u.csv").read_text().splitlines()
        assert rows[0] == "t,component,re,im" and len(rows) > 1

    def test_degenerate_flags_sector_hypothesis(self, capsys, tmp_path):
        code, _, _ = run(capsys, "contour", "--scenario", "degenerate2x2", "--out", str(tmp_path))
        lines = {line["check"]: line for line in decode((tmp_path / "contour_report.jsonl").read_text())}
        assert code == 1
        assert not lines["contour_sector_growth"]["pass"]
        assert lines["contour_pde_residual"]["pass"]

    def test_deterministic(self, capsys, tmp_path):
        for d in ("a", "b"):
            run(capsys, "contour", "--scenario", "diagonal3x3", "--seed", "5", "--out", str(tmp_path / d))
        for name in ("contour_report.jsonl", "contour_u.csv", "contour_problem.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_epsilon_below_floor(self, capsys, tmp_path):
        assert run(capsys, "contour", "--epsilons", "0.1,0.0001", "--out", str(tmp_path))[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "degenfrac", "ml", "--beta", "1", "--z", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].split(",")[4] == "2.718281828459045"
