"""Tests for the slepassage command-line interface."""

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from slepassage.cli import EXIT_DOMAIN, EXIT_STATISTICAL, cli

FAST_GRID = ["--dt", "1e-3", "--growth", "0.05", "--t-max", "1000"]


def invoke(runner: CliRunner, output_dir: Path, *args: str):
    return runner.invoke(cli, ["--output-dir", str(output_dir), "--threads", "1", *args])


def manifests(output_dir: Path) -> list[Path]:
    return sorted(output_dir.glob("*.manifest.json"))


class TestCliBasics:
    """Tests for basic CLI functionality."""

    def test_help(self, runner: CliRunner) -> None:
        """Test that --help works."""
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        for command in ("eval", "mc", "integrate", "verify", "replay"):
            assert command in result.output

    def test_version(self, runner: CliRunner) -> None:
        """Test that --version works."""
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.output

    def test_unknown_command_is_usage_error(self, runner: CliRunner) -> None:
        result = runner.invoke(cli, ["bogus"])
        assert result.exit_code == EXIT_DOMAIN

    def test_unknown_option_is_usage_error(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "verify", "--bogus")
        assert result.exit_code == EXIT_DOMAIN

    def test_unknown_root_option(self, runner: CliRunner) -> None:
        result = runner.invoke(cli, ["--nope"])
        assert result.exit_code == EXIT_DOMAIN


class TestEval:
    """Tests for the eval command."""

    def test_two_path_at_i(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "two_path_one_point", "--z", "0+1i")
        assert result.exit_code == 0, result.output
        assert result.output.splitlines()[0] == "0.8"

    def test_left_passage(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_one", "--z", "1+1i")
        assert result.exit_code == 0
        assert result.output.splitlines()[0] == "0.853553390593274"

    def test_negative_real_part(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_two", "--z", "-0.5+1i", "--w=1+2i")
        assert result.exit_code == 0, result.output
        assert 0.0 < float(result.output.splitlines()[0]) < 1.0

    def test_g_at_one(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "G", "--sigma", "1")
        assert result.exit_code == 0
        assert result.output.splitlines()[0] == "0"

    def test_complex_result(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "mobius_f_eps", "--z", "0+1i", "--eps", "1")
        assert result.exit_code == 0
        assert result.output.splitlines()[0] == "-0.5+0.5i"

    def test_writes_manifest(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "G", "--sigma", "0.5")
        assert result.exit_code == 0
        (path,) = manifests(output_dir)
        data = json.loads(path.read_text())
        assert data["subcommand"] == "eval"
        assert data["argv"][-4:] == ["eval", "G", "--sigma", "0.5"]
        assert data["parameters"]["formula_name"] == "G"
        assert "Manifest:" in result.output

    def test_list(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "--list")
        assert result.exit_code == 0
        assert "left_passage_one --z:" in result.output
        assert "hyp2f1 --a --b --c --x:" in result.output

    def test_unknown_formula(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "no_such_formula", "--z", "0+1i")
        assert result.exit_code == EXIT_DOMAIN
        assert "unknown formula" in result.output

    def test_unknown_parameter(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_one", "--q", "1")
        assert result.exit_code == EXIT_DOMAIN

    def test_missing_parameter(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_two", "--z", "0+1i")
        assert result.exit_code == EXIT_DOMAIN
        assert "--w" in result.output

    def test_bad_point(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_one", "--z", "abc")
        assert result.exit_code == EXIT_DOMAIN

    def test_point_below_axis(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_one", "--z", "1-1i")
        assert result.exit_code == EXIT_DOMAIN

    def test_domain_error(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "touch_radius_one_point", "--z", "0+2i")
        assert result.exit_code == EXIT_DOMAIN
        assert "unit half-disk" in result.output

    def test_grid(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_one", "--grid", "-1:1:3,0.5:1:2")
        assert result.exit_code == 0, result.output
        assert "Wrote 6 grid values" in result.output
        (path,) = output_dir.glob("*.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["re", "im", "left_passage_one"]
        assert len(rows) == 7

    def test_grid_marks_invalid_points(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "touch_radius_one_point", "--grid", "0:0:1,0.5:1.5:2")
        assert result.exit_code == 0
        (path,) = output_dir.glob("*.csv")
        values = [row[2] for row in csv.reader(path.open())][1:]
        assert values == ["0.6", "nan"]

    def test_grid_complex_formula(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "joukowsky", "--grid", "-0.5:0.5:3,0.1:0.5:3")
        assert result.exit_code == 0, result.output
        assert "Wrote 9 grid values" in result.output
        (path,) = output_dir.glob("*.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["re", "im", "re_joukowsky", "im_joukowsky"]
        assert len(rows) == 10
        assert rows[8][:2] == ["0", "0.5"]
        assert float(rows[8][2]) == pytest.approx(0.0, abs=1e-15)
        assert float(rows[8][3]) == pytest.approx(-1.5)

    def test_grid_mobius_image(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "mobius_f_eps", "--eps", "1", "--grid", "0:0:1,1:1:1")
        assert result.exit_code == 0, result.output
        (path,) = output_dir.glob("*.csv")
        _, row = list(csv.reader(path.open()))
        assert [float(v) for v in row] == pytest.approx([0.0, 1.0, -0.5, 0.5])

    def test_bad_grid(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "eval", "left_passage_one", "--grid", "1:2")
        assert result.exit_code == EXIT_DOMAIN

    def test_output_dir_from_environment(self, runner: CliRunner, tmp_path: Path) -> None:
        target = tmp_path / "from-env"
        result = runner.invoke(cli, ["eval", "G", "--sigma", "1"], env={"SLEPASSAGE_OUTPUT_DIR": str(target)})
        assert result.exit_code == 0
        assert manifests(target)


class TestMonteCarlo:
    """Tests for the mc commands."""

    def test_one_point(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "one-point", "--z", "0+1i", "--n", "1e3", *FAST_GRID)
        assert result.exit_code in (0, EXIT_STATISTICAL), result.output
        assert "one-point-000" in result.output
        (records,) = output_dir.glob("*.jsonl")
        data = json.loads(records.read_text())
        assert data["n_samples"] == 1000
        assert data["manifest"] == manifests(output_dir)[0].name

    def test_too_few_samples(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "one-point", "--z", "0+1i", "--n", "10")
        assert result.exit_code == EXIT_DOMAIN
        assert "1000" in result.output

    def test_bad_count(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "one-point", "--z", "0+1i", "--n", "1.5")
        assert result.exit_code == EXIT_DOMAIN

    def test_invalid_config(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "one-point", "--z", "0+1i", "--ratio-threshold", "2")
        assert result.exit_code == EXIT_DOMAIN
        assert "ratio_threshold" in result.output

    def test_refine_ratio_recorded(self, runner: CliRunner, output_dir: Path) -> None:
        args = ("mc", "one-point", "--z", "0.2+0.05i", "--n", "1e3", "--refine-ratio", "400", *FAST_GRID)
        result = invoke(runner, output_dir, *args)
        assert result.exit_code in (0, EXIT_STATISTICAL), result.output
        (records,) = output_dir.glob("*.jsonl")
        data = json.loads(records.read_text())
        assert data["config"]["refine_ratio"] == 400.0

    def test_negative_refine_ratio(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "one-point", "--z", "0+1i", "--refine-ratio", "-1")
        assert result.exit_code == EXIT_DOMAIN
        assert "refine_ratio" in result.output

    def test_two_point_needs_pairs(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "two-point", "--z", "0+1i", "--z", "1+1i", "--w", "0+2i")
        assert result.exit_code == EXIT_DOMAIN

    def test_martingale_at_time_zero(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(
            runner, output_dir, "mc", "martingale", "--z", "0+1i", "--w", "1+1i", "--times", "0", "--n", "100",
            *FAST_GRID,
        )
        assert result.exit_code == 0, result.output
        assert "martingale-000" in result.output
        assert "PASS" in result.output

    def test_martingale_bad_times(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "mc", "martingale", "--z", "0+1i", "--w", "1+1i", "--times", "a,b")
        assert result.exit_code == EXIT_DOMAIN


class TestIntegrate:
    """Tests for the integrate commands."""

    def test_first(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "integrate", "first")
        assert result.exit_code == 0, result.output
        assert "0.314159" in result.output
        assert "pi/10" in result.output
        assert len(manifests(output_dir)) == 1

    def test_first_bad_tolerance(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "integrate", "first", "--tol", "-1")
        assert result.exit_code == EXIT_DOMAIN

    def test_second_small_budget(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "integrate", "second", "--budget", "2e4", "--slice", "0.2+0.5i", "--slice-n", "11")
        assert result.exit_code in (0, EXIT_STATISTICAL), result.output
        assert "E[A^2] / E[A]^2" in result.output
        assert len(list(output_dir.glob("*-slice.csv"))) == 1
        (manifest,) = manifests(output_dir)
        assert json.loads(manifest.read_text())["seeds"] == [0]

    @pytest.mark.parametrize(("mc_value", "exit_code"), [(0.1055, 0), (0.108, EXIT_STATISTICAL)])
    def test_second_two_percent_criterion(
        self, runner: CliRunner, output_dir: Path, monkeypatch: pytest.MonkeyPatch, mc_value: float, exit_code: int
    ) -> None:
        """Overlapping error bars are not enough when the methods differ by 2% or more."""
        from slepassage import quadrature
        from slepassage.models import IntegralResult

        report = quadrature.SecondMomentReport(
            IntegralResult(0.105, 0.01, 100, "deterministic"),
            IntegralResult(mc_value, 0.01, 100, "stratified-mc", seed=0),
        )
        monkeypatch.setattr(quadrature, "integrate_second_moment", lambda *args, **kwargs: report)
        result = invoke(runner, output_dir, "integrate", "second")
        assert report.agree
        assert result.exit_code == exit_code, result.output
        assert "limit 2%" in result.output


class TestVerify:
    """Tests for the verify command."""

    def test_quick(self, runner: CliRunner, output_dir: Path) -> None:
        result = invoke(runner, output_dir, "verify", "--quick")
        assert result.exit_code == 0, result.output
        assert "[PASS] hyp2f1_scipy" in result.output
        assert "21/21 checks passed." in result.output
        assert "[FAIL]" not in result.output

    def test_failure_exit_code(self, runner: CliRunner, output_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        from slepassage import formulas

        monkeypatch.setattr(formulas, "C0", formulas.C0 * 1.01)
        result = invoke(runner, output_dir, "verify", "--quick")
        assert result.exit_code == EXIT_STATISTICAL
        assert "[FAIL] green_limit" in result.output


class TestReplay:
    """Tests for replaying manifests."""

    def test_replay_reproduces_output(self, runner: CliRunner, output_dir: Path) -> None:
        first = invoke(runner, output_dir, "eval", "G", "--sigma", "0.25")
        assert first.exit_code == 0
        (path,) = manifests(output_dir)
        result = runner.invoke(cli, ["replay", str(path)])
        assert result.exit_code == 0, result.output
        assert "Replaying:" in result.output
        assert first.output.splitlines()[0] in result.output.splitlines()
        assert len(manifests(output_dir)) == 2

    def test_replay_propagates_exit_code(self, runner: CliRunner, output_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        from slepassage import formulas

        invoke(runner, output_dir, "verify", "--quick")
        (path,) = manifests(output_dir)
        monkeypatch.setattr(formulas, "C0", formulas.C0 * 1.01)
        result = runner.invoke(cli, ["replay", str(path)])
        assert result.exit_code == EXIT_STATISTICAL

    def test_replay_rejects_non_manifest(self, runner: CliRunner, tmp_path: Path) -> None:
        path = tmp_path / "x.json"
        path.write_text("{}")
        result = runner.invoke(cli, ["replay", str(path)])
        assert result.exit_code == EXIT_DOMAIN

    def test_replay_missing_file(self, runner: CliRunner, tmp_path: Path) -> None:
        result = runner.invoke(cli, ["replay", str(tmp_path / "none.json")])
        assert result.exit_code == EXIT_DOMAIN
