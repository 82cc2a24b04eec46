"""End-to-end tests for the command-line interface."""

from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from farmgrid.cli import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    build_parser,
    main,
)

DATA = Path(__file__).parent / "data"


@pytest.fixture
def scenario_dir(tmp_path):
    out = tmp_path / "scenario"
    assert main(["synth", "--agents", "3", "--days", "2", "--seed", "1", "-o", str(out)]) == EXIT_OK
    return out


class TestSynthAndValidate:
    def test_synth_writes_scenario(self, scenario_dir):
        assert (scenario_dir / "scenario.toml").exists()
        assert (scenario_dir / "loads.csv").exists()
        assert (scenario_dir / "generation.csv").exists()

    def test_validate_ok(self, scenario_dir, capsys):
        assert main(["validate", "--scenario", str(scenario_dir)]) == EXIT_OK
        assert "OK: 3 agents" in capsys.readouterr().out

    def test_validate_rejects_broken(self, scenario_dir, capsys):
        loads = scenario_dir / "loads.csv"
        lines = loads.read_text().splitlines()
        lines[7] = lines[7].rsplit(",", 1)[0] + ",-1.0"
        loads.write_text("\n".join(lines) + "\n")
        assert main(["validate", "--scenario", str(scenario_dir)]) == EXIT_VALIDATION
        assert "row 7" in capsys.readouterr().err


class TestRun:
    def test_smoke_run_writes_artifacts(self, scenario_dir, tmp_path):
        out = tmp_path / "run"
        code = main(
            [
                "run",
                "--scenario", str(scenario_dir),
                "--policy", "rulebased",
                "--mode", "p2p",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        ledger = json.loads((out / "ledger.json").read_text())
        assert ledger["kind"] == "farmgrid-run-ledger"
        for value in ledger["kpis"].values():
            assert math.isfinite(value)
        assert ledger["config"]["seed"] == 0  # reproducibility echo
        trace = (out / "trace.csv").read_text().splitlines()
        assert trace[0].startswith("# farmgrid-run config=")
        assert trace[1] == "hour,agent,action,buy,sell,soc,price"
        assert (out / "trades.csv").exists()

    def test_missing_scenario_no_artifacts(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            ["run", "--scenario", str(tmp_path / "nope"), "--out", str(out)]
        )
        assert code == EXIT_VALIDATION
        assert "error:" in capsys.readouterr().err
        assert not out.exists()

    def test_flags_echoed_into_ledger(self, scenario_dir, tmp_path):
        """Ablation and auction-mode flags land in the config echo."""
        out = tmp_path / "run"
        code = main(
            [
                "run",
                "--scenario", str(scenario_dir),
                "--mode", "p2p",
                "--ablate", "advisor",
                "--ablate", "priming",
                "--strict-paper-mode",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        config = json.loads((out / "ledger.json").read_text())["config"]
        assert config["strict_paper_mode"] is True
        assert config["ablations"] == {
            "advisor_on": False,
            "priming_on": False,
            "dairy_constraints_on": True,
        }
        assert config["label"] == "rulebased-p2p-noadvisor-nopriming"

    def test_rl_policy_requires_checkpoint(self, scenario_dir, tmp_path, capsys):
        code = main(
            [
                "run",
                "--scenario", str(scenario_dir),
                "--policy", "dqn",
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == EXIT_VALIDATION
        assert "--checkpoint" in capsys.readouterr().err


class TestTrainThenRun:
    def test_train_run_roundtrip(self, scenario_dir, tmp_path):
        ckpt = tmp_path / "policy.json"
        code = main(
            [
                "train",
                "--scenario", str(scenario_dir),
                "--algo", "qtable",
                "--episodes", "50",
                "--seed", "1",
                "--out", str(ckpt),
            ]
        )
        assert code == EXIT_OK
        assert ckpt.exists()
        assert ckpt.with_suffix(".curve.csv").exists()
        out = tmp_path / "run"
        code = main(
            [
                "run",
                "--scenario", str(scenario_dir),
                "--policy", "qtable",
                "--checkpoint", str(ckpt),
                "--mode", "p2p",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        assert (out / "ledger.json").exists()

    def test_checkpoint_algo_mismatch(self, scenario_dir, tmp_path, capsys):
        ckpt = tmp_path / "policy.json"
        main(
            [
                "train",
                "--scenario", str(scenario_dir),
                "--algo", "qtable",
                "--episodes", "10",
                "--out", str(ckpt),
            ]
        )
        code = main(
            [
                "run",
                "--scenario", str(scenario_dir),
                "--policy", "dqn",
                "--checkpoint", str(ckpt),
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == EXIT_VALIDATION
        assert "does not match" in capsys.readouterr().err


class TestCompare:
    def test_compare_dominance_end_to_end(self, scenario_dir, tmp_path):
        out = tmp_path / "cmp"
        code = main(
            [
                "compare",
                "--scenario", str(scenario_dir),
                "--policy", "rulebased",
                "--modes", "p2p,gridonly",
                "--jobs", "2",
                "--markdown",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        cost = next(d for d in report["deltas"] if d["metric"] == "cost_bought_eur")
        assert cost["p2p"] <= cost["gridonly"]
        assert (out / "report.md").exists()

    def test_compare_deterministic_bytes(self, scenario_dir, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(
                [
                    "compare",
                    "--scenario", str(scenario_dir),
                    "--modes", "p2p,gridonly",
                    "--seed", "7",
                    "--out", str(out),
                ]
            ) == EXIT_OK
            outs.append((out / "report.json").read_bytes())
        assert outs[0] == outs[1]


class TestUsage:
    def test_unknown_flag_rejected(self, capsys):
        assert main(["synth", "--agents", "1", "--days", "1", "--bogus"]) == EXIT_USAGE

    def test_unknown_subcommand_rejected(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == EXIT_OK

    def test_help_golden(self):
        """Every flag of every subcommand is documented; frozen as a golden
        file so accidental interface changes surface in review."""
        parser = build_parser()
        sections = [parser.format_help()]
        for name, sub in parser._subparsers._group_actions[0].choices.items():
            sections.append("=" * 30 + f" {name} " + "=" * 30)
            sections.append(sub.format_help())
        text = "\n".join(sections) + "\n"
        assert text == (DATA / "cli_help.txt").read_text()

    def test_every_documented_flag_in_help(self):
        helps = (DATA / "cli_help.txt").read_text()
        for flag in (
            "--scenario", "--policy", "--algo", "--mode", "--modes", "--seed",
            "--jobs", "--out", "--ablate", "--strict-paper-mode", "--checkpoint",
            "--episodes", "--curve", "--agents", "--days", "--min-load",
            "--markdown",
        ):
            assert flag in helps, flag
