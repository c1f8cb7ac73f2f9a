"""Result writers for experiment records, integrals, grids and run manifests.

Record files are JSON lines (one experiment per line, each carrying
``schema_version``); summaries are CSV tables.
"""

from __future__ import annotations

import csv
import json
import re
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

from slepassage.errors import SchemaError
from slepassage.models import (
    Estimate,
    ExperimentRecord,
    HalfPlanePoint,
    IntegralResult,
    RunManifest,
    SimConfig,
)

SCHEMA_VERSION = 1

SUMMARY_COLUMNS = ["id", "points", "formula", "estimate", "SE", "z", "undecided_frac", "dt", "n"]
INTEGRAL_COLUMNS = ["method", "value", "error", "n", "budget", "seed"]


def slugify(name: str) -> str:
    """Convert a label to a filesystem-safe slug.

    :param name: Label to slugify
    :return: Lowercase slug with hyphens
    """
    slug = name.lower().strip()
    slug = re.sub(r"[^\w\s.+-]", "", slug)
    slug = re.sub(r"[\s_]+", "-", slug)
    return slug.strip("-")


def record_to_dict(record: ExperimentRecord) -> dict[str, Any]:
    data = asdict(record)
    data["config"] = record.config.to_dict()
    data["points"] = [[p.x, p.y] for p in record.points]
    return {"schema_version": SCHEMA_VERSION, **data}


def record_from_dict(data: dict[str, Any]) -> ExperimentRecord:
    """Rebuild a record from its JSON form.

    :raises SchemaError: On a wrong schema version or missing/invalid fields
    """
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    try:
        halved = data.get("halved_estimate")
        return ExperimentRecord(
            experiment_id=str(data["experiment_id"]),
            kind=str(data["kind"]),
            config=SimConfig(**data["config"]),
            points=[HalfPlanePoint(float(x), float(y)) for x, y in data["points"]],
            formula=str(data["formula"]),
            estimate=Estimate(**data["estimate"]),
            formula_value=float(data["formula_value"]),
            z_score=float(data["z_score"]),
            wall_clock=float(data["wall_clock"]),
            code_version=str(data["code_version"]),
            n_samples=int(data["n_samples"]),
            time=data.get("time"),
            halved_estimate=Estimate(**halved) if halved else None,
            extra=dict(data.get("extra") or {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed experiment record: {e}") from e


def read_records(path: Path) -> list[ExperimentRecord]:
    """Load a JSON-lines record file.

    :param path: File written by :class:`JsonLinesWriter`
    :return: The records in file order
    :raises SchemaError: If any line is not a valid record
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{lineno}: not valid JSON ({e.msg})") from e
            if not isinstance(data, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            records.append(record_from_dict(data))
    return records


class ResultWriter(ABC):
    """Base class for all result writers.

    Subclasses must implement :meth:`write`.
    """

    extension: str = ""

    @abstractmethod
    def write(self, payload: Any, output_path: Path) -> Path:
        """Write ``payload`` to ``output_path``.

        :param payload: What the writer serialises
        :param output_path: Target file
        :return: Path to the written file
        """
        ...

    @staticmethod
    def _prepare(output_path: Path) -> Path:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        return output_path


class JsonLinesWriter(ResultWriter):
    """Writes experiment records, one JSON object per line.

    :param manifest: Name of the run manifest to reference from every record
    """

    extension = ".jsonl"

    def __init__(self, manifest: str | None = None) -> None:
        self.manifest = manifest

    def write(self, payload: list[ExperimentRecord], output_path: Path) -> Path:
        output_path = self._prepare(output_path)
        with open(output_path, "w", encoding="utf-8") as fh:
            for record in payload:
                data = record_to_dict(record)
                if self.manifest:
                    data["manifest"] = self.manifest
                fh.write(json.dumps(data, allow_nan=True) + "\n")
        return output_path


class CsvSummaryWriter(ResultWriter):
    """Writes one summary row per experiment record."""

    extension = ".csv"

    def write(self, payload: list[ExperimentRecord], output_path: Path) -> Path:
        output_path = self._prepare(output_path)
        with open(output_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_COLUMNS)
            for r in payload:
                writer.writerow(
                    [
                        r.experiment_id,
                        " ".join(str(p) for p in r.points),
                        r.formula,
                        f"{r.estimate.mean:.15g}",
                        f"{r.estimate.std_error:.6g}",
                        f"{r.z_score:.4g}",
                        f"{r.estimate.undecided_fraction:.6g}",
                        f"{r.config.dt:g}",
                        r.n_samples,
                    ]
                )
        return output_path


class IntegralCsvWriter(ResultWriter):
    """Writes (method, value, error, n, budget, seed) rows for integration results."""

    extension = ".csv"

    def write(self, payload: list[IntegralResult], output_path: Path) -> Path:
        output_path = self._prepare(output_path)
        with open(output_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(INTEGRAL_COLUMNS)
            for res in payload:
                writer.writerow(
                    [
                        res.method,
                        f"{res.value:.15g}",
                        f"{res.error_estimate:.6g}",
                        res.n_evaluations,
                        "" if res.budget is None else res.budget,
                        "" if res.seed is None else res.seed,
                    ]
                )
        return output_path


class GridCsvWriter(ResultWriter):
    """Writes (re, im, value...) rows of a function sampled on a grid.

    :param value_column: Header of the value column, or one header per value of a row
    """

    extension = ".csv"

    def __init__(self, value_column: str | Sequence[str] = "value") -> None:
        self.value_columns = [value_column] if isinstance(value_column, str) else list(value_column)

    def write(self, payload: Sequence[tuple[float, ...]], output_path: Path) -> Path:
        output_path = self._prepare(output_path)
        with open(output_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re", "im", *self.value_columns])
            for row in payload:
                if len(row) != 2 + len(self.value_columns):
                    raise ValueError(f"grid row {row!r} does not match columns {self.value_columns}")
                writer.writerow([f"{v:.15g}" for v in row])
        return output_path


def create_writer(kind: str, **kwargs: Any) -> ResultWriter:
    """Factory function to create a writer for the given output kind.

    :param kind: One of 'records', 'summary', 'integrals', 'grid'
    :param kwargs: Passed to the writer constructor
    :return: A writer instance
    :raises ValueError: If the kind is not supported
    """
    writers: dict[str, type[ResultWriter]] = {
        "records": JsonLinesWriter,
        "summary": CsvSummaryWriter,
        "integrals": IntegralCsvWriter,
        "grid": GridCsvWriter,
    }
    if kind not in writers:
        raise ValueError(f"Unsupported output kind: '{kind}'. Supported kinds: {', '.join(writers)}")
    return writers[kind](**kwargs)


def write_manifest(manifest: RunManifest, output_path: Path) -> Path:
    """Write a run manifest as indented JSON."""
    output_path = ResultWriter._prepare(output_path)
    data = {"schema_version": SCHEMA_VERSION, **asdict(manifest)}
    output_path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return output_path


def read_manifest(path: Path) -> RunManifest:
    """Read a manifest written by :func:`write_manifest`.

    :raises SchemaError: If the file is not a manifest of this schema version
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e.msg})") from e
    if not isinstance(data, dict) or data.pop("schema_version", None) != SCHEMA_VERSION:
        raise SchemaError(f"{path}: not a slepassage manifest of schema version {SCHEMA_VERSION}")
    try:
        return RunManifest(**data)
    except TypeError as e:
        raise SchemaError(f"{path}: malformed manifest: {e}") from e
