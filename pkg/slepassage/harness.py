"""Monte Carlo experiments comparing simulated passage events to the exact formulas.

Paths are simulated in shards of ``shard_size`` drivers; shard ``i`` always
uses the random stream (seed, i), so results do not depend on how many worker
threads run the shards. Shard results are merged in shard order by a single
reducer.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, TypeVar

import numpy as np

from slepassage import formulas
from slepassage._version import __version__
from slepassage.errors import DomainError, InvariantViolationError
from slepassage.models import (
    Estimate,
    ExperimentRecord,
    HalfPlanePoint,
    IntArray,
    PassageOutcome,
    SimConfig,
)
from slepassage.simulation import classify_passage, flow_points, sample_driver

logger = logging.getLogger(__name__)

DEFAULT_SHARD_SIZE = 2048
ACCEPT_Z = 3.0
BONFERRONI_THRESHOLD = 10

T = TypeVar("T")

LEFT = PassageOutcome.LEFT
RIGHT = PassageOutcome.RIGHT
UNDECIDED = PassageOutcome.UNDECIDED


@dataclass
class OutcomeTally:
    """Counts of one event over a batch of runs.

    :param hits: Runs in which the event happened
    :param undecided: Runs in which some point of the event stayed undecided
    :param n: Total runs
    """

    hits: int = 0
    undecided: int = 0
    n: int = 0

    @classmethod
    def from_masks(cls, hits: np.ndarray, undecided: np.ndarray) -> OutcomeTally:
        return cls(hits=int(np.sum(hits & ~undecided)), undecided=int(np.sum(undecided)), n=int(hits.size))

    def merge(self, other: OutcomeTally) -> OutcomeTally:
        return OutcomeTally(self.hits + other.hits, self.undecided + other.undecided, self.n + other.n)

    def estimate(self) -> Estimate:
        """Decided-only frequency with the undecided bracket and binomial SE."""
        decided = self.n - self.undecided
        mean = self.hits / decided if decided else 0.5
        low = self.hits / self.n
        high = (self.hits + self.undecided) / self.n
        return Estimate(
            mean=mean,
            std_error=math.sqrt(mean * (1.0 - mean) / self.n),
            n=self.n,
            n_undecided=self.undecided,
            bracket_low=low,
            bracket_high=high,
        )


def _shard_sizes(n_samples: int, shard_size: int) -> list[int]:
    full, rest = divmod(n_samples, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _map_shards(fn: Callable[[int, int], T], n_samples: int, shard_size: int, workers: int) -> list[T]:
    sizes = _shard_sizes(n_samples, shard_size)
    if workers <= 1 or len(sizes) == 1:
        results = [fn(i, size) for i, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map keeps shard order, so the merge is independent of scheduling
            results = list(pool.map(fn, range(len(sizes)), sizes))
    logger.info("finished %d shards of up to %d paths", len(sizes), shard_size)
    return results


def simulate_outcomes(
    points: Sequence[HalfPlanePoint],
    n_samples: int,
    cfg: SimConfig,
    workers: int = 1,
    shard_size: int = DEFAULT_SHARD_SIZE,
) -> IntArray:
    """Passage outcomes of ``points`` under ``n_samples`` common drivers.

    :return: int8 array of shape (n_samples, n_points)
    """

    def shard(index: int, size: int) -> IntArray:
        driver = sample_driver(cfg, n_paths=size, shard=index)
        return classify_passage(points, driver, cfg)

    return np.concatenate(_map_shards(shard, n_samples, shard_size, workers), axis=0)


def _record(
    kind: str,
    index: int,
    cfg: SimConfig,
    points: list[HalfPlanePoint],
    formula_name: str,
    estimate: Estimate,
    target: float,
    started: float,
    n_samples: int,
    **kwargs: Any,
) -> ExperimentRecord:
    return ExperimentRecord(
        experiment_id=f"{kind}-{index:03d}",
        kind=kind,
        config=cfg,
        points=points,
        formula=formula_name,
        estimate=estimate,
        formula_value=float(target),
        z_score=estimate.z_score(target),
        wall_clock=time.perf_counter() - started,
        code_version=__version__,
        n_samples=n_samples,
        **kwargs,
    )


def _coords(points: Sequence[HalfPlanePoint]) -> list[list[float]]:
    return [[p.x, p.y] for p in points]


def _from_coords(coords: Sequence[Sequence[float]]) -> list[HalfPlanePoint]:
    return [HalfPlanePoint(float(x), float(y)) for x, y in coords]


def _halved(cfg: SimConfig) -> SimConfig:
    return replace(cfg, dt=cfg.dt / 2.0, growth=cfg.growth / 2.0)


def run_one_point(
    points: Sequence[HalfPlanePoint],
    n_samples: int,
    cfg: SimConfig,
    workers: int = 1,
    shard_size: int = DEFAULT_SHARD_SIZE,
    dt_halving: bool = False,
) -> list[ExperimentRecord]:
    """Left-passage frequency of each point against ``left_passage_one``.

    :param points: Points of the upper half-plane
    :param n_samples: Number of drivers, at least 1000
    :param cfg: Simulation configuration
    :param workers: Worker threads
    :param shard_size: Drivers per shard
    :param dt_halving: Also run with dt0 and growth halved and store that estimate
    :return: One record per point
    """
    if n_samples < 1000:
        raise DomainError(f"run_one_point requires n_samples >= 1000, got {n_samples}")
    pts = list(points)
    started = time.perf_counter()
    outcomes = simulate_outcomes(pts, n_samples, cfg, workers, shard_size)
    halved = simulate_outcomes(pts, n_samples, _halved(cfg), workers, shard_size) if dt_halving else None

    records = []
    for j, p in enumerate(pts):
        est = OutcomeTally.from_masks(outcomes[:, j] == LEFT, outcomes[:, j] == UNDECIDED).estimate()
        half_est = None
        if halved is not None:
            half_est = OutcomeTally.from_masks(halved[:, j] == LEFT, halved[:, j] == UNDECIDED).estimate()
        records.append(
            _record(
                "one-point",
                j,
                cfg,
                [p],
                "left_passage_one",
                est,
                formulas.left_passage_one(p),
                started,
                n_samples,
                halved_estimate=half_est,
                extra={"tracked": _coords(pts)},
            )
        )
    return records


def crosstab(oz: np.ndarray, ow: np.ndarray) -> dict[str, int]:
    """Counts of the four decided outcome pairs plus runs with an undecided point."""
    undecided = (oz == UNDECIDED) | (ow == UNDECIDED)
    table = {
        "LL": int(np.sum((oz == LEFT) & (ow == LEFT))),
        "LR": int(np.sum((oz == LEFT) & (ow == RIGHT))),
        "RL": int(np.sum((oz == RIGHT) & (ow == LEFT))),
        "RR": int(np.sum((oz == RIGHT) & (ow == RIGHT))),
        "undecided": int(np.sum(undecided)),
    }
    if sum(table.values()) != oz.size:
        raise InvariantViolationError(f"outcome table {table} does not sum to {oz.size}")
    return table


def run_two_point(
    pairs: Sequence[tuple[HalfPlanePoint, HalfPlanePoint]],
    n_samples: int,
    cfg: SimConfig,
    workers: int = 1,
    shard_size: int = DEFAULT_SHARD_SIZE,
    dt_halving: bool = False,
) -> list[ExperimentRecord]:
    """Joint passage frequencies of point pairs under common drivers.

    Each pair yields two records: the both-Left frequency against
    ``left_passage_two`` and the Left-Right frequency against
    L(z) - L(z, w). Both carry the full outcome cross-tabulation.

    :param pairs: Pairs (z, w) of half-plane points
    :param n_samples: Number of drivers, at least 10000
    :return: Two records per pair
    """
    if n_samples < 10_000:
        raise DomainError(f"run_two_point requires n_samples >= 10000, got {n_samples}")
    unique: list[HalfPlanePoint] = []
    for pair in pairs:
        for p in pair:
            if p not in unique:
                unique.append(p)
    started = time.perf_counter()
    outcomes = simulate_outcomes(unique, n_samples, cfg, workers, shard_size)
    halved = simulate_outcomes(unique, n_samples, _halved(cfg), workers, shard_size) if dt_halving else None

    def tallies(table: np.ndarray, i: int, j: int) -> tuple[OutcomeTally, OutcomeTally]:
        oz, ow = table[:, i], table[:, j]
        undecided = (oz == UNDECIDED) | (ow == UNDECIDED)
        both = OutcomeTally.from_masks((oz == LEFT) & (ow == LEFT), undecided)
        split = OutcomeTally.from_masks((oz == LEFT) & (ow == RIGHT), undecided)
        return both, split

    tracked = [_coords(pair) for pair in pairs]
    records = []
    for k, (z, w) in enumerate(pairs):
        i, j = unique.index(z), unique.index(w)
        both, split = tallies(outcomes, i, j)
        table = crosstab(outcomes[:, i], outcomes[:, j])
        extra = {"crosstab": table, "tracked": tracked}
        half_both = half_split = None
        if halved is not None:
            hb, hs = tallies(halved, i, j)
            half_both, half_split = hb.estimate(), hs.estimate()
        l_two = formulas.left_passage_two(z, w)
        records.append(
            _record(
                "two-point-both-left",
                k,
                cfg,
                [z, w],
                "left_passage_two",
                both.estimate(),
                l_two,
                started,
                n_samples,
                halved_estimate=half_both,
                extra=extra,
            )
        )
        records.append(
            _record(
                "two-point-left-right",
                k,
                cfg,
                [z, w],
                "left_passage_one(z) - left_passage_two(z,w)",
                split.estimate(),
                formulas.left_passage_one(z) - l_two,
                started,
                n_samples,
                halved_estimate=half_split,
                extra=extra,
            )
        )
    return records


def run_martingale_test(
    z: HalfPlanePoint,
    w: HalfPlanePoint,
    times: Sequence[float],
    n_samples: int,
    cfg: SimConfig,
    workers: int = 1,
    shard_size: int = DEFAULT_SHARD_SIZE,
) -> list[ExperimentRecord]:
    """Empirical mean of the two-point observable on flowed points at each time.

    The observable is ``left_passage_ansatz`` evaluated at (z_t, w_t); its mean
    is compared to its value at t = 0.

    :param z: First tracked point
    :param w: Second tracked point
    :param times: Increasing capacity times in [0, t_max]
    :param n_samples: Number of drivers
    :return: One record per time, with the sample variance in ``extra``
    """
    if not times:
        raise DomainError("run_martingale_test requires at least one time")
    if n_samples < 2:
        raise DomainError(f"run_martingale_test requires n_samples >= 2, got {n_samples}")
    horizon = max(times)
    if min(times) < 0 or horizon > cfg.t_max:
        raise DomainError(f"times must lie within [0, t_max = {cfg.t_max}]")
    # the grid of the shorter horizon shares its leading steps with cfg's grid
    flow_cfg = replace(cfg, t_max=horizon) if horizon > 0 else cfg
    started = time.perf_counter()

    def shard(index: int, size: int) -> np.ndarray:
        driver = sample_driver(flow_cfg, n_paths=size, shard=index)
        snapshots, _ = flow_points([z, w], driver, flow_cfg, times)
        return np.asarray(formulas.left_passage_ansatz(snapshots[..., 0], snapshots[..., 1]))

    values = np.concatenate(_map_shards(shard, n_samples, shard_size, workers), axis=1)
    target = formulas.left_passage_ansatz(z, w)

    records = []
    for k, t in enumerate(times):
        sample = values[k]
        variance = float(np.var(sample, ddof=1))
        est = Estimate(mean=float(np.mean(sample)), std_error=math.sqrt(variance / n_samples), n=n_samples)
        records.append(
            _record(
                "martingale",
                k,
                cfg,
                [z, w],
                "left_passage_ansatz",
                est,
                target,
                started,
                n_samples,
                time=float(t),
                extra={"variance": variance, "times": [float(s) for s in times]},
            )
        )
    return records


def bonferroni_note(records: Sequence[ExperimentRecord]) -> str | None:
    """Report line for runs with more than ten comparisons, else None."""
    m = len(records)
    if m <= BONFERRONI_THRESHOLD:
        return None
    alpha = math.erfc(ACCEPT_Z / math.sqrt(2.0))
    return (
        f"{m} comparisons at |z| <= {ACCEPT_Z:g}: expect about {m * alpha:.2f} false failures; "
        f"family-wise level {min(1.0, m * alpha):.3g} (Bonferroni)"
    )


def rerun(record: ExperimentRecord, workers: int = 1) -> ExperimentRecord:
    """Re-run the experiment of a stored record with its configuration and seed.

    The points listed under ``extra["tracked"]`` are simulated together again,
    since the refinement of a path depends on every point it carries.

    :param record: A record produced by this module
    :param workers: Worker threads
    :return: The freshly computed record (same id)
    """
    cfg, n = record.config, record.n_samples
    index = int(record.experiment_id.rsplit("-", 1)[-1])
    tracked = record.extra.get("tracked")
    if record.kind == "one-point":
        if tracked:
            fresh = run_one_point(_from_coords(tracked), n, cfg, workers)[index]
        else:
            fresh = run_one_point(record.points, n, cfg, workers)[0]
    elif record.kind in ("two-point-both-left", "two-point-left-right"):
        if tracked:
            pairs = [(z, w) for z, w in map(_from_coords, tracked)]
            records = run_two_point(pairs, n, cfg, workers)
            both, split = records[2 * index], records[2 * index + 1]
        else:
            both, split = run_two_point([(record.points[0], record.points[1])], n, cfg, workers)
        fresh = both if record.kind == "two-point-both-left" else split
    elif record.kind == "martingale":
        times = record.extra.get("times")
        if not times:
            raise DomainError("martingale record does not list its sample times")
        fresh = run_martingale_test(record.points[0], record.points[1], times, n, cfg, workers)[index]
    else:
        raise DomainError(f"unknown experiment kind {record.kind!r}")
    fresh.experiment_id = f"{record.kind}-{index:03d}"
    return fresh


def persist(records: Sequence[ExperimentRecord], path: Path) -> Path:
    """Write records as JSON lines (one experiment per line)."""
    from slepassage.writers import JsonLinesWriter

    return JsonLinesWriter().write(list(records), path)


def load(path: Path) -> list[ExperimentRecord]:
    """Read records written by :func:`persist`.

    :raises SchemaError: If the file is malformed or has another schema version
    """
    from slepassage.writers import read_records

    return read_records(path)
