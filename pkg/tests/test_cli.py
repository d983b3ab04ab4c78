"""Runner contract: flags and config files, exit codes, CSV/JSON shape,
fixture override, and byte-identical reruns.
"""

import json
import os
from pathlib import Path

import pytest

from ceres import cli
from ceres.report import read_csv


def run_cli(args):
    return cli.main([str(a) for a in args])


def tree_bytes(root):
    root = Path(root)
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


class TestArgumentHandling:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli([])
        assert exc.value.code == 2

    def test_bad_knob_exits_2(self, tmp_path, capsys):
        code = run_cli(["membank-exp", "--kappa", "-1", "--out", tmp_path])
        assert code == 2
        assert "kappa" in capsys.readouterr().err

    def test_bad_tau_grid_exits_2(self, tmp_path):
        assert run_cli(["qp-verify", "--tau-grid", "0.1,0.3", "--out", tmp_path]) == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"sneed": 1}))
        assert run_cli(["nwgm-gap", "--config", cfg, "--out", tmp_path / "o"]) == 2

    def test_flags_override_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 3, "trials": 150}))
        out = tmp_path / "o"
        assert run_cli(["nwgm-gap", "--config", cfg, "--seed", 9, "--out", out]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["seed"] == 9          # flag wins
        assert summary["config"]["trials"] == 150      # file value kept


class TestOutputs:
    def test_csv_comment_header_and_verdicts(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert run_cli(["nwgm-gap", "--seed", 5, "--out", out]) == 0
        printed = capsys.readouterr().out
        assert "[PASS] C3-nwgm-exactness" in printed

        comment, header, rows = read_csv(out / "nwgm_exactness.csv")
        assert comment.startswith("# config=") and "seed=5" in comment
        assert header == ["trial", "gap_single_z", "gap_z_constant",
                          "gap_additive_identity"]
        assert len(rows) == 100

        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdicts"][0]["criterion"] == "C3-nwgm-exactness"
        assert summary["verdicts"][0]["passed"] is True
        assert "out" not in summary["config"] and "jobs" not in summary["config"]

    def test_rerun_is_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(["qp-verify", "--seed", 11, "--out", out1]) == 0
        assert run_cli(["qp-verify", "--seed", 11, "--out", out2]) == 0
        assert tree_bytes(out1) == tree_bytes(out2)

    def test_different_seeds_differ(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(["nwgm-gap", "--seed", 1, "--out", out1]) == 0
        assert run_cli(["nwgm-gap", "--seed", 2, "--out", out2]) == 0
        assert tree_bytes(out1) != tree_bytes(out2)

    def test_gamma_sweep_csvs_have_contract_columns(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["qp-verify", "--seed", 4, "--out", out,
                        "--tau-grid", "1,0.3,0.1,0.03,0.01"]) == 0
        sweeps = sorted(out.glob("gamma_sweep_*.csv"))
        assert len(sweeps) == 3
        _, header, rows = read_csv(sweeps[0])
        assert header == ["tau", "distance", "monotone_flag"]
        assert len(rows) == 5
        distances = [float(r[1]) for r in rows]
        assert all(b <= a + 1e-9 for a, b in zip(distances, distances[1:]))
        assert distances[-1] < 1e-3

    def test_backdoor_exp_checks_no_confounder_fixture(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["backdoor-exp", "--seed", 6, "--trials", 20,
                        "--out", out]) == 0
        summary = json.loads((out / "summary.json").read_text())
        by_name = {v["criterion"]: v for v in summary["verdicts"]}
        assert by_name["C1-backdoor-identity-fixture"]["passed"] is True
        assert by_name["C2-frontdoor-identity-fixture"]["passed"] is True
        assert summary["studies"]["spec_identity"]["spec"] == "scm_noconf.json"
        assert (out / "spec_identity.csv").exists()

    def test_robustness_csv_has_contract_columns(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["frontdoor-exp", "--seed", 2, "--trials", 25,
                        "--out", out]) == 0
        _, header, rows = read_csv(out / "mediator_robustness.csv")
        assert header == ["seed", "rho", "n_samples", "err_visual_only",
                          "err_depth_guided", "winner"]
        assert len(rows) == 50  # both corruption levels
        assert {r[1] for r in rows} == {"0.0", "0.5"}

    def test_convergence_csv_has_contract_columns(self, tmp_path):
        out = tmp_path / "o"
        assert run_cli(["membank-exp", "--seed", 2, "--trials", 40,
                        "--out", out]) == 0
        _, header, rows = read_csv(out / "convergence.csv")
        assert header == ["W", "seed_count", "mean_err_unweighted",
                          "mean_err_weighted", "slope"]
        assert [r[0] for r in rows] == ["4", "16", "64", "256", "1024", "4096"]


class TestFailurePath:
    def test_failed_criterion_exits_1_and_is_named(self, tmp_path, capsys):
        # At rho=0 the corrupted and clean channels are exchangeable, so
        # the 70% win-rate criterion cannot hold.
        out = tmp_path / "o"
        code = run_cli(["frontdoor-exp", "--seed", 3, "--rho", 0.0,
                        "--trials", 40, "--out", out])
        assert code == 1
        captured = capsys.readouterr()
        assert "C7-robust-mediator" in captured.err
        summary = json.loads((out / "summary.json").read_text())
        by_name = {v["criterion"]: v["passed"] for v in summary["verdicts"]}
        assert by_name["C7-robust-mediator"] is False
        assert by_name["C2-frontdoor-identity"] is True


class TestFixtureOverride:
    def test_env_var_redirects_fixture_lookup(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CERES_FIXTURES", str(tmp_path / "nowhere"))
        out = tmp_path / "o"
        code = run_cli(["frontdoor-exp", "--seed", 1, "--trials", 5, "--out", out])
        assert code != 0  # fixture spec cannot be found

    def test_env_var_with_copied_fixtures_works(self, tmp_path, monkeypatch):
        import shutil

        src = cli.fixtures_dir()
        dst = tmp_path / "fx"
        shutil.copytree(src, dst)
        monkeypatch.setenv("CERES_FIXTURES", str(dst))
        out = tmp_path / "o"
        assert run_cli(["qp-verify", "--seed", 1, "--out", out]) == 0


class TestConsoleScript:
    def test_entry_point_is_wired(self):
        import importlib.metadata as md

        entry_points = md.entry_points(group="console_scripts")
        names = {ep.name: ep.value for ep in entry_points}
        assert names.get("ceres") == "ceres.cli:main"
