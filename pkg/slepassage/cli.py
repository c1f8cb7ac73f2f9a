"""Command-line interface for slepassage.

Provides ``slepassage eval``, ``mc``, ``integrate``, ``verify`` and ``replay``.
Exit codes: 0 when every check passes, 2 on a statistical or invariant
failure, 3 on a domain or usage error. Every command writes a run manifest
into the output directory.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import click
import numpy as np

from slepassage import harness, quadrature
from slepassage._version import __version__
from slepassage.errors import MethodDisagreementWarning, SlePassageError
from slepassage.models import ExperimentRecord, HalfPlanePoint, IntegralResult, RunManifest, SimConfig
from slepassage.registry import FormulaSpec, get_formula_registry
from slepassage.verify import InvariantSuite
from slepassage.writers import create_writer, read_manifest, slugify, write_manifest

logger = logging.getLogger(__name__)

EXIT_STATISTICAL = 2
EXIT_DOMAIN = 3


class DomainFailure(click.ClickException):
    """A library precondition failed; reported with exit code 3."""

    exit_code = EXIT_DOMAIN


class SlePassageGroup(click.Group):
    """Group that reports usage errors with exit code 3 and keeps the raw argv."""

    def make_context(
        self,
        info_name: str | None,
        args: list[str],
        parent: click.Context | None = None,
        **extra: Any,
    ) -> click.Context:
        argv = list(args)
        try:
            ctx = super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = EXIT_DOMAIN
            raise
        ctx.meta["slepassage.argv"] = argv
        return ctx

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_DOMAIN
            raise


class CountType(click.ParamType):
    """Positive integer that also accepts float notation such as ``1e7``."""

    name = "count"

    def convert(self, value: Any, param: click.Parameter | None, ctx: click.Context | None) -> int:
        if isinstance(value, int):
            return value
        try:
            number = float(value)
        except ValueError:
            self.fail(f"{value!r} is not a number", param, ctx)
        if not number.is_integer() or number < 1:
            self.fail(f"{value!r} is not a positive whole number", param, ctx)
        return int(number)


class PointType(click.ParamType):
    """Half-plane point in ``a+bi`` notation."""

    name = "a+bi"

    def convert(self, value: Any, param: click.Parameter | None, ctx: click.Context | None) -> HalfPlanePoint:
        if isinstance(value, HalfPlanePoint):
            return value
        try:
            return HalfPlanePoint.parse(value)
        except SlePassageError as e:
            self.fail(str(e), param, ctx)


COUNT = CountType()
POINT = PointType()


@dataclass
class CliState:
    output_dir: Path
    threads: int


def _stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


def _output_stem(ctx: click.Context, label: str) -> Path:
    state = ctx.find_object(CliState)
    state.output_dir.mkdir(parents=True, exist_ok=True)
    return state.output_dir / f"{slugify(label)}-{_stamp()}"


def _write_manifest(ctx: click.Context, stem: Path, seeds: list[int], outputs: list[Path]) -> Path:
    root = ctx.find_root()
    parameters: dict[str, Any] = {}
    for c in reversed(list(_context_chain(ctx))):
        parameters.update({k: _jsonable(v) for k, v in c.params.items()})
    manifest = RunManifest(
        subcommand=" ".join(_command_path(ctx)),
        parameters=parameters,
        argv=list(root.meta.get("slepassage.argv", [])),
        seeds=seeds,
        outputs=[str(p) for p in outputs],
        code_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    path = write_manifest(manifest, stem.with_suffix(".manifest.json"))
    click.echo(f"Manifest: {path}")
    return path


def _context_chain(ctx: click.Context):
    while ctx is not None:
        yield ctx
        ctx = ctx.parent


def _command_path(ctx: click.Context) -> list[str]:
    return [c.info_name or "" for c in reversed(list(_context_chain(ctx)))][1:]


def _jsonable(value: Any) -> Any:
    if isinstance(value, HalfPlanePoint):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def _format_value(value: Any) -> str:
    if isinstance(value, HalfPlanePoint):
        value = value.z
    if isinstance(value, complex):
        return f"{value.real:.15g}{value.imag:+.15g}i"
    return f"{float(value):.15g}"


@click.group(cls=SlePassageGroup)
@click.version_option(version=__version__, prog_name="slepassage")
@click.option("-v", "--verbose", count=True, help="Log progress (-v) or details (-vv) to stderr")
@click.option(
    "--output-dir",
    type=click.Path(file_okay=False),
    envvar="SLEPASSAGE_OUTPUT_DIR",
    default="slepassage-runs",
    show_default=True,
    help="Directory for records, tables and manifests",
)
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=os.cpu_count() or 1,
    show_default="machine parallelism",
    help="Worker threads for simulations and integrals",
)
@click.pass_context
def cli(ctx: click.Context, verbose: int, output_dir: str, threads: int) -> None:
    """slepassage - exact SLE(8/3) passage formulas and their numerical verification."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    logging.getLogger("slepassage").setLevel(level)
    ctx.obj = CliState(output_dir=Path(output_dir), threads=threads)


def _parse_formula_args(spec: FormulaSpec, tokens: list[str]) -> dict[str, Any]:
    """Turn ``--name value`` tokens into keyword arguments of ``spec``."""
    kwargs: dict[str, Any] = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--"):
            raise click.UsageError(f"unexpected argument {token!r}; use --name value")
        name, sep, value = token[2:].partition("=")
        if not sep:
            if i + 1 >= len(tokens):
                raise click.UsageError(f"option --{name} needs a value")
            value = tokens[i + 1]
            i += 1
        i += 1
        if name not in spec.params:
            raise click.UsageError(f"{spec.name} takes {', '.join('--' + p for p in spec.params)}; got --{name}")
        if name in spec.points:
            kwargs[name] = POINT.convert(value, None, None).z
        else:
            try:
                kwargs[name] = float(value)
            except ValueError:
                raise click.UsageError(f"--{name} must be a number, got {value!r}") from None
    return kwargs


def _parse_grid(text: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        re_part, im_part = text.split(",")
        axes = []
        for part in (re_part, im_part):
            lo, hi, n = part.split(":")
            if int(n) < 1:
                raise ValueError
            axes.append(np.linspace(float(lo), float(hi), int(n)))
    except ValueError:
        raise click.UsageError(f"--grid must look like re_min:re_max:n,im_min:im_max:n, got {text!r}") from None
    return axes[0], axes[1]


@cli.command(
    "eval",
    context_settings={"ignore_unknown_options": True, "allow_extra_args": True},
)
@click.argument("formula_name", metavar="FORMULA", required=False)
@click.option("--list", "list_formulas", is_flag=True, help="List registered formulas and exit")
@click.option("--grid", default=None, help="Sweep a point over re_min:re_max:n,im_min:im_max:n and write a CSV")
@click.option("--over", default=None, help="Point parameter swept by --grid (default: the first one)")
@click.pass_context
def eval_formula(
    ctx: click.Context,
    formula_name: str | None,
    list_formulas: bool,
    grid: str | None,
    over: str | None,
) -> None:
    """Evaluate a registered formula, e.g. ``eval left_passage_one --z 1+1i``."""
    registry = get_formula_registry()
    if list_formulas:
        for name in sorted(registry):
            spec = registry[name]
            args = " ".join(f"--{p}" for p in spec.required())
            click.echo(f"{name} {args}: {spec.description}")
        return
    if formula_name is None:
        raise click.UsageError("missing FORMULA (see --list)")
    if formula_name not in registry:
        raise click.UsageError(f"unknown formula {formula_name!r}; see 'slepassage eval --list'")
    spec = registry[formula_name]
    kwargs = _parse_formula_args(spec, list(ctx.args))
    stem = _output_stem(ctx, f"eval-{formula_name}")
    outputs: list[Path] = []

    if grid is None:
        missing = [p for p in spec.required() if p not in kwargs]
        if missing:
            raise click.UsageError(f"{formula_name} needs {', '.join('--' + p for p in missing)}")
        try:
            value = spec(**kwargs)
        except SlePassageError as e:
            raise DomainFailure(str(e)) from None
        click.echo(_format_value(value))
    else:
        sweep = over or (spec.points[0] if spec.points else None)
        if sweep is None or sweep not in spec.points:
            raise click.UsageError(f"--over must name a point parameter of {formula_name}: {', '.join(spec.points)}")
        missing = [p for p in spec.required() if p not in kwargs and p != sweep]
        if missing:
            raise click.UsageError(f"{formula_name} needs {', '.join('--' + p for p in missing)}")
        xs, ys = _parse_grid(grid)
        sampled: list[tuple[float, float, complex]] = []
        for y in ys:
            if y <= 0:
                continue
            for x in xs:
                try:
                    value = complex(spec(**{**kwargs, sweep: complex(x, y)}))
                except SlePassageError:
                    value = complex(math.nan, 0.0)
                sampled.append((float(x), float(y), value))
        if any(v.imag != 0 for _, _, v in sampled):
            columns: str | tuple[str, ...] = (f"re_{formula_name}", f"im_{formula_name}")
            rows: list[tuple[float, ...]] = [
                (x, y, v.real, math.nan if math.isnan(v.real) else v.imag) for x, y, v in sampled
            ]
        else:
            columns = formula_name
            rows = [(x, y, v.real) for x, y, v in sampled]
        path = create_writer("grid", value_column=columns).write(rows, stem.with_suffix(".csv"))
        outputs.append(path)
        click.echo(f"Wrote {len(rows)} grid values: {path}")
    _write_manifest(ctx, stem, [], outputs)


def _sim_options(f: Any) -> Any:
    options = [
        click.option("--n", "n_samples", type=COUNT, default=100_000, show_default=True, help="Number of drivers"),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True),
        click.option("--dt", type=float, default=SimConfig.dt, show_default=True, help="Initial capacity step"),
        click.option("--growth", type=float, default=SimConfig.growth, show_default=True, help="Geometric step growth"),
        click.option("--t-max", type=float, default=SimConfig.t_max, show_default=True, help="Capacity horizon"),
        click.option(
            "--ratio-threshold", type=float, default=SimConfig.ratio_threshold, show_default=True,
            help="Decision threshold on |x|/y",
        ),
        click.option(
            "--refine-ratio", type=float, default=SimConfig.refine_ratio, show_default=True,
            help="Bisect a step while a point is within refine_ratio * kappa * dt of the tip (0 disables)",
        ),
        click.option("--shard-size", type=COUNT, default=harness.DEFAULT_SHARD_SIZE, show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _sim_config(params: dict[str, Any]) -> SimConfig:
    try:
        return SimConfig(
            dt=params["dt"],
            growth=params["growth"],
            t_max=params["t_max"],
            ratio_threshold=params["ratio_threshold"],
            refine_ratio=params["refine_ratio"],
            seed=params["seed"],
        )
    except SlePassageError as e:
        raise DomainFailure(str(e)) from None


def _report_records(ctx: click.Context, label: str, records: list[ExperimentRecord], seed: int) -> None:
    stem = _output_stem(ctx, label)
    manifest_name = stem.with_suffix(".manifest.json").name
    records_path = create_writer("records", manifest=manifest_name).write(records, stem.with_suffix(".jsonl"))
    summary_path = create_writer("summary").write(records, stem.with_suffix(".csv"))

    click.echo(f"{'id':<26} {'estimate':>10} {'SE':>9} {'formula':>10} {'z':>7} {'undecided':>9}  verdict")
    for r in records:
        verdict = "PASS" if r.passed else "FAIL"
        click.echo(
            f"{r.experiment_id:<26} {r.estimate.mean:>10.6f} {r.estimate.std_error:>9.2e} "
            f"{r.formula_value:>10.6f} {r.z_score:>7.2f} {r.estimate.undecided_fraction:>9.2e}  {verdict}"
        )
        if r.halved_estimate is not None:
            click.echo(f"{'  dt halved':<26} {r.halved_estimate.mean:>10.6f} {r.halved_estimate.std_error:>9.2e}")
    note = harness.bonferroni_note(records)
    if note:
        click.echo(note)
    click.echo(f"Records: {records_path}")
    click.echo(f"Summary: {summary_path}")
    _write_manifest(ctx, stem, [seed], [records_path, summary_path])
    if not all(r.passed for r in records):
        ctx.exit(EXIT_STATISTICAL)


@cli.group()
def mc() -> None:
    """Monte Carlo experiments against the exact formulas."""


@mc.command("one-point")
@click.option("--z", "points", type=POINT, multiple=True, required=True, help="Point a+bi (repeatable)")
@click.option("--dt-halving", is_flag=True, help="Also run with dt0 and growth halved")
@_sim_options
@click.pass_context
def mc_one_point(ctx: click.Context, points: tuple[HalfPlanePoint, ...], dt_halving: bool, **params: Any) -> None:
    """Left-passage frequencies of single points."""
    cfg = _sim_config(params)
    state = ctx.find_object(CliState)
    try:
        records = harness.run_one_point(
            list(points), params["n_samples"], cfg, state.threads, params["shard_size"], dt_halving
        )
    except SlePassageError as e:
        raise DomainFailure(str(e)) from None
    _report_records(ctx, "mc-one-point", records, cfg.seed)


@mc.command("two-point")
@click.option("--z", "zs", type=POINT, multiple=True, required=True, help="First point of each pair (repeatable)")
@click.option("--w", "ws", type=POINT, multiple=True, required=True, help="Second point of each pair (repeatable)")
@click.option("--dt-halving", is_flag=True, help="Also run with dt0 and growth halved")
@_sim_options
@click.pass_context
def mc_two_point(
    ctx: click.Context,
    zs: tuple[HalfPlanePoint, ...],
    ws: tuple[HalfPlanePoint, ...],
    dt_halving: bool,
    **params: Any,
) -> None:
    """Joint passage frequencies of point pairs under common drivers."""
    if len(zs) != len(ws):
        raise click.UsageError(f"--z and --w must be given equally often ({len(zs)} vs {len(ws)})")
    cfg = _sim_config(params)
    state = ctx.find_object(CliState)
    try:
        records = harness.run_two_point(
            list(zip(zs, ws)), params["n_samples"], cfg, state.threads, params["shard_size"], dt_halving
        )
    except SlePassageError as e:
        raise DomainFailure(str(e)) from None
    _report_records(ctx, "mc-two-point", records, cfg.seed)


@mc.command("martingale")
@click.option("--z", "z", type=POINT, required=True, help="First tracked point")
@click.option("--w", "w", type=POINT, required=True, help="Second tracked point")
@click.option("--times", default="0.01,0.1,1", show_default=True, help="Comma-separated capacity times")
@_sim_options
@click.pass_context
def mc_martingale(ctx: click.Context, z: HalfPlanePoint, w: HalfPlanePoint, times: str, **params: Any) -> None:
    """Mean of the two-point observable along the flow at several times."""
    try:
        sample_times = [float(t) for t in times.split(",")]
    except ValueError:
        raise click.UsageError(f"--times must be comma-separated numbers, got {times!r}") from None
    cfg = _sim_config(params)
    state = ctx.find_object(CliState)
    try:
        records = harness.run_martingale_test(
            z, w, sample_times, params["n_samples"], cfg, state.threads, params["shard_size"]
        )
    except SlePassageError as e:
        raise DomainFailure(str(e)) from None
    _report_records(ctx, "mc-martingale", records, cfg.seed)


@cli.group()
def integrate() -> None:
    """Moments of the area of the bubble touching the unit circle."""


def _echo_integral(result: IntegralResult, target: float, label: str) -> None:
    click.echo(
        f"{result.method:<14} {result.value:.10f} +- {result.error_estimate:.2e} "
        f"({result.n_evaluations} evaluations; {label} = {target:.10f}, "
        f"relative difference {result.value / target - 1.0:+.3%})"
    )


@integrate.command("first")
@click.option("--tol", type=float, default=1e-3, show_default=True, help="Absolute tolerance")
@click.pass_context
def integrate_first(ctx: click.Context, tol: float) -> None:
    """Integral of the touch-radius one-point function over the half-disk."""
    stem = _output_stem(ctx, "integrate-first")
    try:
        result = quadrature.integrate_first_moment(tol)
    except SlePassageError as e:
        _write_manifest(ctx, stem, [], [])
        raise DomainFailure(str(e)) from None
    _echo_integral(result, quadrature.FIRST_MOMENT, "pi/10")
    path = create_writer("integrals").write([result], stem.with_suffix(".csv"))
    click.echo(f"Results: {path}")
    _write_manifest(ctx, stem, [], [path])


@integrate.command("second")
@click.option("--budget", type=COUNT, default=10_000_000, show_default=True, help="Evaluations per method")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--delta-diag", type=float, default=quadrature.DEFAULT_DELTA_DIAG, show_default=True)
@click.option("--mix", type=float, default=quadrature.DEFAULT_MIX, show_default=True, help="Kernel weight near z = w")
@click.option("--slice", "slice_w", type=POINT, default=None, help="Also dump f(., w) for this w")
@click.option("--slice-n", type=COUNT, default=101, show_default=True, help="Grid points per axis of the dump")
@click.pass_context
def integrate_second(
    ctx: click.Context,
    budget: int,
    seed: int,
    delta_diag: float,
    mix: float,
    slice_w: HalfPlanePoint | None,
    slice_n: int,
) -> None:
    """Second moment by a tensor rule and by stratified Monte Carlo."""
    state = ctx.find_object(CliState)
    stem = _output_stem(ctx, "integrate-second")
    outputs: list[Path] = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", MethodDisagreementWarning)
            report = quadrature.integrate_second_moment(budget, seed, delta_diag, mix, state.threads)
        if slice_w is not None:
            rows = quadrature.slice_grid(slice_w.z, slice_n)
            outputs.append(create_writer("grid", value_column="f").write(rows, stem.with_name(stem.name + "-slice.csv")))
    except SlePassageError as e:
        _write_manifest(ctx, stem, [seed], outputs)
        raise DomainFailure(str(e)) from None

    for result in report.results:
        _echo_integral(result, quadrature.AIRY_SECOND_MOMENT, "pi/30")
    click.echo(
        f"methods differ by {report.discrepancy:.3%} (limit {quadrature.MAX_DISCREPANCY:.0%}); "
        f"error bars {'overlap' if report.agree else 'DISAGREE'}"
    )
    click.echo(
        f"E[A^2] / E[A]^2 = {report.airy_ratio:.6f} (Airy: 10/(3 pi) = {quadrature.AIRY_RATIO:.6f}); "
        f"moment bounds {'hold' if report.bounds_hold() else 'VIOLATED'}"
    )
    for w in caught:
        click.echo(f"Warning: {w.message}", err=True)
    outputs.insert(0, create_writer("integrals").write(report.results, stem.with_suffix(".csv")))
    for path in outputs:
        click.echo(f"Wrote: {path}")
    _write_manifest(ctx, stem, [seed], outputs)
    if not report.passed():
        ctx.exit(EXIT_STATISTICAL)


@cli.command()
@click.option("--quick", is_flag=True, help="Run only the sub-second subset")
@click.pass_context
def verify(ctx: click.Context, quick: bool) -> None:
    """Run the invariant suite and print a pass/fail matrix."""
    messages = InvariantSuite(quick=quick).run()
    for msg in messages:
        status = "PASS" if msg.passed else "FAIL"
        click.echo(f"[{status}] {msg.check}: {msg.message}")
    failed = sum(not m.passed for m in messages)
    click.echo(f"{len(messages) - failed}/{len(messages)} checks passed.")
    _write_manifest(ctx, _output_stem(ctx, "verify"), [], [])
    if failed:
        ctx.exit(EXIT_STATISTICAL)


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def replay(ctx: click.Context, manifest: str) -> None:
    """Re-run the command recorded in a manifest."""
    try:
        recorded = read_manifest(Path(manifest))
    except SlePassageError as e:
        raise DomainFailure(str(e)) from None
    if not recorded.argv or "replay" in recorded.argv:
        raise DomainFailure(f"{manifest} does not record a replayable command")
    click.echo(f"Replaying: slepassage {' '.join(recorded.argv)}")
    code = cli.main(args=recorded.argv, prog_name="slepassage", standalone_mode=False)
    if isinstance(code, int) and code:
        ctx.exit(code)
