"""Shared test fixtures for slepassage tests."""

from pathlib import Path

import pytest
from click.testing import CliRunner

from slepassage.models import Estimate, ExperimentRecord, HalfPlanePoint, SimConfig


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def output_dir(tmp_path: Path) -> Path:
    """Directory passed to ``--output-dir`` in CLI tests."""
    return tmp_path / "runs"


@pytest.fixture
def short_config() -> SimConfig:
    """A short-horizon configuration for fast flow tests."""
    return SimConfig(dt=1e-3, growth=0.05, t_max=10.0, seed=7)


@pytest.fixture
def uniform_config() -> SimConfig:
    """Uniform capacity grid: 1000 steps of 1e-3."""
    return SimConfig(dt=1e-3, growth=0.0, t_max=1.0, seed=3)


@pytest.fixture
def sample_points() -> list[HalfPlanePoint]:
    return [HalfPlanePoint(0.0, 1.0), HalfPlanePoint(1.0, 1.0), HalfPlanePoint(-1.0, 1.0)]


@pytest.fixture
def sample_record() -> ExperimentRecord:
    """A hand-built one-point record, no simulation involved."""
    return ExperimentRecord(
        experiment_id="one-point-000",
        kind="one-point",
        config=SimConfig(seed=11),
        points=[HalfPlanePoint(1.0, 1.0)],
        formula="left_passage_one",
        estimate=Estimate(mean=0.85, std_error=0.01, n=1000, n_undecided=3, bracket_low=0.848, bracket_high=0.851),
        formula_value=0.8535533905932737,
        z_score=0.25,
        wall_clock=1.5,
        code_version="0.1.0",
        n_samples=1000,
    )
