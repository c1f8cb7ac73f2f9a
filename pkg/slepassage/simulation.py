"""Discretised chordal Loewner flow and left/right passage classification.

Tracked points live in the centred frame z_t = g_t(z) - sqrt(kappa) B_t. Over
each capacity step the driving function is held constant after jumping by the
step's increment, so the exact vertical-slit map applies:

    z <- sqrt((z - delta_k)^2 + 4 dt_k),   root taken in the upper half-plane.

The capacity grid is dt_k = max(dt0, growth * t_k), uniform for growth = 0.
During classification a step is bisected along a Brownian bridge while some
active point of the path is within squared distance refine_ratio * kappa * dt
of the tip, so points that come close to the curve see a driver resolved at
their own scale. Bridge midpoints come from a second stream keyed by
(seed, shard, 1); the coarse increments are untouched.

Im z_t is nonincreasing along the flow. A point is decided once
|x_t| / y_t >= M (Left for positive x_t), frozen from then on, and left
Undecided if the horizon t_max comes first or if its imaginary part drops to
y_min (swallowed by a discretisation slit).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from slepassage.errors import DomainError
from slepassage.models import (
    ComplexArray,
    DriverPath,
    FloatArray,
    FlowState,
    HalfPlanePoint,
    IntArray,
    PassageOutcome,
    SimConfig,
)

logger = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def _capacity_steps(dt: float, growth: float, t_max: float) -> tuple[float, ...]:
    if growth == 0.0:
        n = math.ceil(t_max / dt)
        steps = [dt] * n
        steps[-1] = t_max - dt * (n - 1)
        return tuple(steps)
    steps: list[float] = []
    t = 0.0
    while t < t_max:
        step = min(max(dt, growth * t), t_max - t)
        steps.append(step)
        t += step
    return tuple(steps)


def capacity_grid(cfg: SimConfig) -> FloatArray:
    """Step sizes of the capacity grid of ``cfg``.

    :param cfg: Simulation configuration
    :return: Array of positive step sizes summing to ``cfg.t_max``
    """
    return np.array(_capacity_steps(cfg.dt, cfg.growth, cfg.t_max))


def driver_stream(seed: int, shard: int = 0) -> np.random.Generator:
    """Independent random stream for one shard of an experiment.

    :param seed: Root seed
    :param shard: Shard index
    :return: PCG64 generator keyed by (seed, shard)
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(shard,))))


def refinement_stream(seed: int, shard: int = 0) -> np.random.Generator:
    """Random stream of the Brownian bridge midpoints of one shard."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(shard, 1))))


def sample_driver(cfg: SimConfig, n_paths: int = 1, shard: int = 0) -> DriverPath:
    """Sample ``n_paths`` driving paths on the capacity grid of ``cfg``.

    :param cfg: Simulation configuration (kappa, grid, seed)
    :param n_paths: Number of independent paths
    :param shard: Shard index selecting the random stream
    :return: Driver batch with Normal(0, kappa * dt_k) increments
    """
    if n_paths < 1:
        raise DomainError(f"n_paths must be >= 1, got {n_paths}")
    steps = capacity_grid(cfg)
    rng = driver_stream(cfg.seed, shard)
    # drawn step-major so a longer horizon extends the same paths
    increments = rng.standard_normal((steps.shape[0], n_paths)).T * np.sqrt(cfg.kappa * steps)
    return DriverPath(steps=steps, increments=increments, seed=cfg.seed, shard=shard)


def slit_update(z: ComplexArray, delta: FloatArray | float, dt: float) -> ComplexArray:
    """One exact vertical-slit step of the centred flow.

    :param z: Current centred positions
    :param delta: Driving increment(s) of the step
    :param dt: Capacity step
    :return: sqrt((z - delta)^2 + 4 dt) with non-negative imaginary part
    """
    zeta = z - delta
    root = np.sqrt(zeta * zeta + 4.0 * dt)
    return np.where(root.imag < 0, -root, root)


def flow_step(s: FlowState, driver_increment: float, dt: float, y_min: float = 1e-12) -> FlowState:
    """Advance one tracked point by one capacity step.

    :param s: Current state (must not be blown up)
    :param driver_increment: Driving increment over the step
    :param dt: Capacity step
    :param y_min: Imaginary part below which the point counts as swallowed
    :return: The new state at time t + dt
    """
    if s.blown_up:
        raise DomainError("flow_step requires a state that is not blown up")
    z = complex(slit_update(np.asarray(complex(s.x, s.y)), driver_increment, dt))
    blown = z.imag <= y_min
    return FlowState(x=z.real, y=max(z.imag, 0.0), t=s.t + dt, blown_up=blown)


def _sq_abs(z: ComplexArray) -> FloatArray:
    return z.real * z.real + z.imag * z.imag


def bridge_advance(
    z: ComplexArray,
    active: npt.NDArray[np.bool_],
    delta: FloatArray,
    dt: float,
    cfg: SimConfig,
    rng: np.random.Generator,
    depth: int = 0,
) -> ComplexArray:
    """Advance the points of several paths over one capacity step.

    A path is bisected when one of its moving points is within squared
    distance ``cfg.refine_ratio * kappa * dt`` of the tip at either end of the
    step. The midpoint of the driver is drawn from the Brownian bridge
    Normal(delta / 2, kappa * dt / 4) and both halves are advanced the same
    way, down to ``cfg.max_refine_depth`` bisections.

    :param z: Centred positions, one row per path, shape (n_rows, n_points)
    :param active: Points that move; the others are returned unchanged
    :param delta: Driving increment of each row over the step
    :param dt: Capacity step
    :param cfg: Simulation configuration
    :param rng: Stream of bridge midpoints
    :param depth: Bisections already applied to this step
    :return: Positions at the end of the step
    """
    live = active & (z.imag > cfg.y_min)
    rough = np.zeros(z.shape[0], dtype=bool)
    if cfg.refine_ratio > 0 and depth < cfg.max_refine_depth:
        gap = np.minimum(_sq_abs(z), _sq_abs(z - delta[:, None]))
        rough = np.any(live & (gap < cfg.refine_ratio * cfg.kappa * dt), axis=1)

    out = z.copy()
    smooth = ~rough
    if smooth.any():
        moved = slit_update(z[smooth], delta[smooth, None], dt)
        out[smooth] = np.where(live[smooth], moved, z[smooth])
    if rough.any():
        d = delta[rough]
        first = 0.5 * d + math.sqrt(cfg.kappa * dt / 4.0) * rng.standard_normal(d.shape[0])
        half = bridge_advance(z[rough], active[rough], first, dt / 2.0, cfg, rng, depth + 1)
        out[rough] = bridge_advance(half, active[rough], d - first, dt / 2.0, cfg, rng, depth + 1)
    return out


def _as_points(points: Sequence[HalfPlanePoint | complex]) -> ComplexArray:
    arr = np.array([complex(p) for p in points], dtype=complex)
    if arr.size == 0:
        raise DomainError("at least one point is required")
    if np.any(arr.imag <= 0):
        raise DomainError("points must lie in the upper half-plane (Im z > 0)")
    return arr


def classify_passage(
    points: Sequence[HalfPlanePoint | complex],
    driver: DriverPath,
    cfg: SimConfig,
) -> IntArray:
    """Classify every tracked point as passed on the Left, Right, or Undecided.

    All points of a path share its driver, including the bridge refinement of
    its steps, so joint events can be read off the returned table. Whether a
    step of a path is refined depends on all points tracked on that path, so
    outcomes are reproducible for a fixed list of points.

    :param points: Points of the upper half-plane
    :param driver: Driver batch consistent with ``cfg``
    :param cfg: Simulation configuration
    :return: int8 array of :class:`PassageOutcome` values, shape (n_paths, n_points)
    """
    start = _as_points(points)
    z = np.broadcast_to(start, (driver.n_paths, start.shape[0])).copy()
    outcome = np.full(z.shape, PassageOutcome.UNDECIDED, dtype=np.int8)
    active = np.ones(z.shape, dtype=bool)
    threshold = cfg.ratio_threshold
    rng = refinement_stream(driver.seed, driver.shard)

    for k in range(driver.n_steps):
        paths = np.flatnonzero(active.any(axis=1))
        if paths.size == 0:
            logger.debug("all points decided after %d of %d steps", k, driver.n_steps)
            break
        moving = active[paths]
        moved = bridge_advance(z[paths], moving, driver.increments[paths, k], driver.steps[k], cfg, rng)
        z[paths] = moved

        swallowed = moving & (moved.imag <= cfg.y_min)
        ratio = moved.real / np.where(moved.imag <= cfg.y_min, 1.0, moved.imag)
        left = moving & ~swallowed & (ratio >= threshold)
        right = moving & ~swallowed & (ratio <= -threshold)
        decided = outcome[paths]
        decided[left] = PassageOutcome.LEFT
        decided[right] = PassageOutcome.RIGHT
        outcome[paths] = decided
        active[paths] = moving & ~(left | right | swallowed)

    return outcome


def _nearest_indices(driver: DriverPath, sample_times: Sequence[float], t_max: float) -> list[int]:
    grid = np.concatenate(([0.0], driver.times))
    previous = -math.inf
    indices = []
    for t in sample_times:
        if t < 0 or t > t_max * (1 + 1e-12):
            raise DomainError(f"sample time {t} outside [0, t_max = {t_max}]")
        if t < previous:
            raise DomainError("sample_times must be increasing")
        previous = t
        indices.append(int(np.abs(grid - t).argmin()))
    return indices


def flow_points(
    points: Sequence[HalfPlanePoint | complex],
    driver: DriverPath,
    cfg: SimConfig,
    sample_times: Sequence[float],
) -> tuple[ComplexArray, npt.NDArray[np.bool_]]:
    """Positions of the tracked points at the grid times nearest to ``sample_times``.

    Points are not frozen at decisions. A swallowed point keeps its last position
    with imaginary part raised to ``cfg.y_min``.

    :param points: Points of the upper half-plane
    :param driver: Driver batch consistent with ``cfg``
    :param cfg: Simulation configuration
    :param sample_times: Increasing capacity times in [0, t_max]
    :return: (positions of shape (n_times, n_paths, n_points), swallowed mask of the same shape)
    """
    start = _as_points(points)
    indices = _nearest_indices(driver, sample_times, cfg.t_max)
    z = np.broadcast_to(start, (driver.n_paths, start.shape[0])).copy()
    blown = np.zeros(z.shape, dtype=bool)
    snapshots = np.empty((len(indices),) + z.shape, dtype=complex)
    swallowed = np.zeros(snapshots.shape, dtype=bool)

    k = 0
    for slot, target in enumerate(indices):
        while k < target:
            moved = slit_update(z, driver.increments[:, k][:, None], driver.steps[k])
            newly = ~blown & (moved.imag <= cfg.y_min)
            blown |= newly
            z = np.where(blown, z.real + 1j * np.maximum(z.imag, cfg.y_min), moved)
            k += 1
        snapshots[slot] = z
        swallowed[slot] = blown
    return snapshots, swallowed


def flow_trajectory(
    point: HalfPlanePoint | complex,
    driver: DriverPath,
    cfg: SimConfig,
    sample_times: Sequence[float],
    path: int = 0,
) -> list[FlowState]:
    """Snapshots of one point along one driving path.

    :param point: Starting point
    :param driver: Driver batch
    :param cfg: Simulation configuration
    :param sample_times: Increasing capacity times in [0, t_max]
    :param path: Index of the path within the batch
    :return: One :class:`FlowState` per sample time, at the nearest grid time
    """
    single = DriverPath(
        steps=driver.steps,
        increments=driver.increments[path : path + 1],
        seed=driver.seed,
        shard=driver.shard,
    )
    snapshots, swallowed = flow_points([point], single, cfg, sample_times)
    grid = np.concatenate(([0.0], driver.times))
    indices = _nearest_indices(driver, sample_times, cfg.t_max)
    return [
        FlowState(
            x=float(snapshots[i, 0, 0].real),
            y=float(snapshots[i, 0, 0].imag),
            t=float(grid[idx]),
            blown_up=bool(swallowed[i, 0, 0]),
        )
        for i, idx in enumerate(indices)
    ]
