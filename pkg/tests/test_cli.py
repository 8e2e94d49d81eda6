import json
import os

import numpy as np
import pytest

from chnsopt import write_snapshot, write_vector_snapshot
from chnsopt import synth
from chnsopt.cli import main


def base_config(outdir, problem="simulate", **sections):
    cfg = {
        "problem": problem,
        "seed": 7,
        "grid": {"n": 16},
        "solver": {"nu": 0.1, "dt": 1e-3, "T": 5e-3},
        "output": {"directory": str(outdir)},
    }
    cfg.update(sections)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return str(p)


def read_csv(path):
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    return header, rows


def column(header, rows, name):
    i = header.index(name)
    return [float(r[i]) for r in rows]


class TestErrorPaths:
    def test_unreadable_config(self, tmp_path, capsys):
        rc = main(["simulate", "--config", str(tmp_path / "nope.json")])
        assert rc == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json", encoding="utf-8")
        rc = main(["simulate", "--config", str(p)])
        assert rc == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_missing_viscosity(self, tmp_path, capsys):
        cfg = base_config(tmp_path / "out")
        del cfg["solver"]["nu"]
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 2
        assert "missing config key solver.nu" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = base_config(tmp_path / "out")
        cfg["solver"]["typo_key"] = 1
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 2
        assert "unknown config key solver.typo_key" in capsys.readouterr().err

    def test_problem_command_mismatch(self, tmp_path, capsys):
        cfg = base_config(tmp_path / "out", problem="ocp")
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "problem" in err

    def test_model_assumption_gate(self, tmp_path, capsys):
        cfg = base_config(tmp_path / "out")
        cfg["kernel"] = {"family": "gaussian", "epsilon": 0.5, "mass": 1.0}
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 2
        assert "model assumption (2) violated" in capsys.readouterr().err


class TestSimulate:
    def test_artifacts_and_diagnostics(self, tmp_path):
        out = tmp_path / "out"
        cfg = base_config(out)
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 0
        header, rows = read_csv(out / "diagnostics.csv")
        assert header == ["t", "energy", "kinetic", "enstrophy", "mass", "residual"]
        assert len(rows) == 6
        masses = column(header, rows, "mass")
        assert np.max(np.abs(np.array(masses) - masses[0])) <= 1e-13
        energies = column(header, rows, "energy")
        assert all(b < a for a, b in zip(energies, energies[1:]))
        for name in ("u_final_x.fld", "u_final_y.fld", "phi_final.fld"):
            assert (out / name).exists()

    def test_runs_are_deterministic(self, tmp_path):
        cfg1 = base_config(tmp_path / "a")
        cfg1["initial"] = {
            "u": {"type": "random-divfree", "amplitude": 0.5, "k_cut": 3.0}
        }
        cfg2 = json.loads(json.dumps(cfg1))
        cfg2["output"]["directory"] = str(tmp_path / "b")
        rc1 = main(["simulate", "--config", write_config(tmp_path, cfg1, "a.json")])
        rc2 = main(["simulate", "--config", write_config(tmp_path, cfg2, "b.json")])
        assert rc1 == 0 and rc2 == 0
        for name in ("diagnostics.csv", "phi_final.fld", "u_final_x.fld"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, name

    def test_seed_override_changes_random_fields(self, tmp_path):
        cfg = base_config(tmp_path / "a")
        cfg["initial"] = {
            "u": {"type": "random-divfree", "amplitude": 0.5, "k_cut": 3.0}
        }
        path = write_config(tmp_path, cfg)
        assert main(["simulate", "--config", path, "--seed", "1"]) == 0
        first = (tmp_path / "a" / "u_final_x.fld").read_bytes()
        assert main(["simulate", "--config", path, "--seed", "2"]) == 0
        second = (tmp_path / "a" / "u_final_x.fld").read_bytes()
        assert first != second

    def test_output_flag_overrides_config(self, tmp_path):
        cfg = base_config(tmp_path / "ignored")
        rc = main(
            [
                "simulate",
                "--config",
                write_config(tmp_path, cfg),
                "--output",
                str(tmp_path / "chosen"),
            ]
        )
        assert rc == 0
        assert (tmp_path / "chosen" / "diagnostics.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_snapshot_dumps(self, tmp_path):
        out = tmp_path / "out"
        cfg = base_config(out)
        cfg["solver"]["T"] = 4e-3
        cfg["output"]["dump_every"] = 2
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 0
        for n in (0, 2, 4):
            assert (out / f"u_{n:06d}_x.fld").exists()
            assert (out / f"phi_{n:06d}.fld").exists()
        assert not (out / "phi_000001.fld").exists()

    def test_initial_fields_from_files(self, tmp_path, g16, rng):
        u = synth.random_divfree_velocity(g16, rng, amplitude=0.4, k_cut=3.0)
        phi = synth.sine_scalar(g16, (1, 1), 0.1, mean=0.2)
        write_vector_snapshot(str(tmp_path / "u0"), u)
        write_snapshot(str(tmp_path / "phi0.fld"), phi)
        out = tmp_path / "out"
        cfg = base_config(out)
        cfg["initial"] = {
            "u": {"type": "file", "path": str(tmp_path / "u0")},
            "phi": {"type": "file", "path": str(tmp_path / "phi0.fld")},
        }
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 0
        header, rows = read_csv(out / "diagnostics.csv")
        assert column(header, rows, "mass")[0] == pytest.approx(0.2, abs=1e-12)

    def test_grid_mismatch_in_field_file(self, tmp_path, g32, rng, capsys):
        u = synth.taylor_green(g32, 0.4)
        write_vector_snapshot(str(tmp_path / "u0"), u)
        cfg = base_config(tmp_path / "out")
        cfg["initial"] = {"u": {"type": "file", "path": str(tmp_path / "u0")}}
        rc = main(["simulate", "--config", write_config(tmp_path, cfg)])
        assert rc == 2


class TestGradientTestCommand:
    def test_orders_written_and_printed(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = base_config(out, problem="gradient-test")
        cfg["cost"] = {"control": 1e-2}
        rc = main(["gradient-test", "--config", write_config(tmp_path, cfg)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "observed order" in text
        header, rows = read_csv(out / "gradient_test.csv")
        assert header == ["h", "remainder", "order"]
        assert len(rows) == 3
        rem = column(header, rows, "remainder")
        assert rem[0] > rem[1] > rem[2]
        assert float(rows[1][2]) >= 1.7


class TestOptimizeCommand:
    def test_twin_problem_descends(self, tmp_path):
        out = tmp_path / "out"
        cfg = base_config(out, problem="ocp")
        cfg["solver"]["T"] = 5e-3
        cfg["cost"] = {"control": 1e-3}
        cfg["optimizer"] = {"max_iters": 4, "grad_tol": 1e-10}
        rc = main(["optimize", "--config", write_config(tmp_path, cfg)])
        assert rc == 0
        header, rows = read_csv(out / "history.csv")
        costs = column(header, rows, "cost")
        assert costs[-1] < costs[0]
        report = (out / "report.txt").read_text(encoding="utf-8")
        assert "problem: ocp" in report
        assert "cost_ratio" in report
        header, rows = read_csv(out / "control_index.csv")
        assert len(rows) == 6
        assert (out / "control_000000_x.fld").exists()
        assert (out / "control_000005_y.fld").exists()

    def test_history_is_reproducible(self, tmp_path):
        cfg = base_config(tmp_path / "a", problem="ocp")
        cfg["optimizer"] = {"max_iters": 3, "grad_tol": 1e-10}
        outs = []
        for sub in ("a", "b"):
            cfg["output"]["directory"] = str(tmp_path / sub)
            rc = main(["optimize", "--config", write_config(tmp_path, cfg, f"{sub}.json")])
            assert rc == 0
            outs.append((tmp_path / sub / "history.csv").read_bytes())
        assert outs[0] == outs[1]


class TestAssimilateCommand:
    def test_twin_recovery_report(self, tmp_path):
        out = tmp_path / "out"
        cfg = base_config(out, problem="da")
        cfg["solver"]["T"] = 0.01
        cfg["cost"] = {"control": 1e-3}
        cfg["optimizer"] = {"max_iters": 10, "grad_tol": 1e-7}
        cfg["targets"] = {"truth": {"type": "taylor-green", "amplitude": 0.4}}
        rc = main(["assimilate", "--config", write_config(tmp_path, cfg)])
        assert rc == 0
        report = (out / "report.txt").read_text(encoding="utf-8")
        assert "problem: da" in report
        fields = dict(
            (k.strip(), v.strip())
            for k, v in (
                line.split(":", 1) for line in report.splitlines() if ":" in line
            )
        )
        assert float(fields["final_cost"]) < float(fields["initial_cost"])
        assert float(fields["recovery_error"]) < 0.5
        assert (out / "u_recovered_x.fld").exists()
        header, rows = read_csv(out / "history.csv")
        costs = column(header, rows, "cost")
        assert all(b < a for a, b in zip(costs, costs[1:]))


class TestCheckCommand:
    def test_all_checks_pass_on_a_sound_config(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = base_config(out, problem="check")
        cfg["grid"] = {"n": 32}
        cfg["solver"] = {"nu": 0.1, "dt": 1e-3, "T": 0.01}
        rc = main(["check", "--config", write_config(tmp_path, cfg)])
        text = capsys.readouterr().out
        assert rc == 0, text
        assert "FAIL" not in text
        assert text.count("PASS") == 14
        report = (out / "report.txt").read_text(encoding="utf-8")
        assert report.count("PASS") == 14
