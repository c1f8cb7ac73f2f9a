"""First and second moments of the area of the bubble conditioned to touch the unit circle.

Both points range over the open upper unit half-disk D+. Tensor rules use
Gauss-Legendre nodes in (r, theta); the nodes cluster at r -> 0, r -> 1 and at
theta -> 0, pi, where the integrand varies fastest.

The second moment is computed twice. The deterministic rule takes z from the
polar tensor rule and integrates w over the fan of segments joining z to the
boundary of D+, so the kink of the integrand on the diagonal sits at the
apex of the fan where the Jacobian vanishes. The disk |w - z| < delta_diag
is excised and its contribution extrapolated from the ring
delta_diag < |w - z| < 2 delta_diag. The rule is evaluated at two orders and
the difference is reported as its error.

The Monte Carlo rule stratifies z on a grid of equal cells in graded
coordinates that put extra density near the boundary of D+, and draws w from
a mixture of the uniform density on D+ and a Gaussian kernel centred at z,
which puts extra samples near the diagonal.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from slepassage.errors import ConvergenceError, DomainError, MethodDisagreementWarning
from slepassage.formulas import area_integrand, touch_radius_one_point
from slepassage.models import ComplexArray, FloatArray, IntegralResult

logger = logging.getLogger(__name__)

HALF_DISK_AREA = math.pi / 2.0
FIRST_MOMENT = math.pi / 10.0
AIRY_SECOND_MOMENT = math.pi / 30.0
AIRY_RATIO = 10.0 / (3.0 * math.pi)

DEFAULT_DELTA_DIAG = 1e-4
DEFAULT_STRATA = 16
DEFAULT_MIX = 0.2
DEFAULT_BANDWIDTH = 0.05
DEFAULT_GRADING = 0.5
MIN_MC_BUDGET = 1_000_000
MAX_DISCREPANCY = 0.02
PAIR_BLOCK = 1 << 18
RING_NODES = 2

Integrand = Callable[[ComplexArray, ComplexArray], FloatArray]


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[FloatArray, FloatArray]:
    x, w = roots_legendre(n)
    return x, w


def polar_rule(n: int, radius: float = 1.0) -> tuple[ComplexArray, FloatArray]:
    """Tensor Gauss-Legendre rule on the half-disk of the given radius.

    :param n: Nodes per coordinate (n**2 nodes in total)
    :param radius: Half-disk radius
    :return: (nodes, weights) with the polar Jacobian folded into the weights
    """
    if n < 1:
        raise DomainError(f"polar_rule requires n >= 1, got {n}")
    x, w = _legendre(n)
    r = radius * (x + 1.0) / 2.0
    wr = radius * w / 2.0
    theta = math.pi * (x + 1.0) / 2.0
    wt = math.pi * w / 2.0
    nodes = r[:, None] * np.exp(1j * theta[None, :])
    weights = (wr * r)[:, None] * wt[None, :]
    return nodes.ravel(), weights.ravel()


def integrate_first_moment(tol: float = 1e-3, n_start: int = 8, max_nodes: int = 512) -> IntegralResult:
    """Integral of ``touch_radius_one_point`` over D+ (exact value pi/10).

    The order doubles until two successive rules agree within ``tol``.

    :param tol: Absolute tolerance, > 0
    :param n_start: Initial nodes per coordinate
    :param max_nodes: Largest order tried
    :return: The finer value with the last refinement difference as error
    :raises ConvergenceError: If no two successive rules agree within ``tol``
    """
    if tol <= 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    n = n_start
    evaluations = 0
    previous = None
    while n <= max_nodes:
        nodes, weights = polar_rule(n)
        value = float(np.sum(weights * touch_radius_one_point(nodes)))
        evaluations += nodes.size
        if previous is not None:
            diff = abs(value - previous)
            logger.info("first moment n=%d: %.12g (change %.3g)", n, value, diff)
            if diff <= tol:
                return IntegralResult(value, diff, evaluations, "deterministic")
        previous = value
        n *= 2
    raise ConvergenceError(f"first moment did not converge to tol={tol} with up to {max_nodes} nodes")


def _pair_block(zs: ComplexArray, ws: ComplexArray, wts_w: FloatArray, delta_diag: float) -> FloatArray:
    """Inner sums over w of f(z, w) for a block of z nodes."""
    zz = np.repeat(zs, ws.size)
    ww = np.tile(ws, zs.size)
    values = np.empty(zz.size)
    shell = np.abs(zz - ww) < delta_diag
    values[shell] = touch_radius_one_point(zz[shell])
    values[~shell] = area_integrand(zz[~shell], ww[~shell])
    return values.reshape(zs.size, ws.size) @ wts_w


def second_moment_tensor(
    n: int,
    delta_diag: float = DEFAULT_DELTA_DIAG,
    radius: float = 1.0,
    workers: int = 1,
) -> tuple[float, int]:
    """Plain 4-D tensor rule of order ``n`` for the second moment.

    Both points take the nodes of :func:`polar_rule`; pairs closer than
    ``delta_diag`` take the diagonal limit f1(z). Used as the reference the
    fan rule is compared against.

    :param n: Nodes per coordinate
    :param delta_diag: Diagonal shell width
    :param radius: Restrict both points to |z|, |w| < radius (at most 1)
    :param workers: Worker threads
    :return: (value, number of integrand evaluations)
    """
    if not 0 < radius <= 1:
        raise DomainError(f"radius must lie in (0, 1], got {radius}")
    nodes, weights = polar_rule(n, radius)
    m = nodes.size
    rows = max(1, PAIR_BLOCK // m)
    starts = range(0, m, rows)

    def block(start: int) -> float:
        stop = min(start + rows, m)
        inner = _pair_block(nodes[start:stop], nodes, weights, delta_diag)
        return float(weights[start:stop] @ inner)

    if workers <= 1:
        parts = [block(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, starts))
    return math.fsum(parts), m * m


@lru_cache(maxsize=64)
def _fan_boundary(n: int) -> tuple[ComplexArray, ComplexArray, FloatArray]:
    """Boundary nodes of D+ (arc, then diameter) with their tangents and weights."""
    x, w = _legendre(n)
    arc = np.exp(0.5j * math.pi * (x + 1.0))
    points = np.concatenate((arc, x.astype(complex)))
    tangents = np.concatenate((1j * arc, np.ones(n, dtype=complex)))
    weights = np.concatenate((math.pi * w / 2.0, w))
    return points, tangents, weights


def fan_evaluations(n: int) -> int:
    """Integrand evaluations of :func:`second_moment_fan` at order ``n``."""
    return n * n * 2 * n * (n + RING_NODES)


def _fan_block(zs: ComplexArray, n: int, delta_diag: float, integrand: Integrand) -> FloatArray:
    """Inner integrals over w of f(z, w) for a block of z nodes.

    w = z + t (P - z) with P on the boundary and t in (0, 1); the area
    element is t Im(conj(P - z) P') dt dP.
    """
    points, tangents, wb = _fan_boundary(n)
    x, wx = _legendre(n)
    xr, wr = _legendre(RING_NODES)
    z = zs[:, None]
    chord = points[None, :] - z
    jac = (np.conj(chord) * tangents[None, :]).imag * wb[None, :]
    length = np.abs(chord)
    # the ring must stay inside D+
    gap = np.minimum(zs.imag, 1.0 - np.abs(zs))
    inner_t = np.minimum(delta_diag, gap / 4.0)[:, None] / length
    outer_t = 2.0 * inner_t

    def segment_sum(lo: FloatArray, hi: FloatArray, nodes: FloatArray, weights: FloatArray) -> FloatArray:
        half = (hi - lo)[..., None] / 2.0
        t = lo[..., None] + half * (nodes + 1.0)
        w = z[..., None] + t * chord[..., None]
        f = np.asarray(integrand(np.broadcast_to(z[..., None], w.shape).ravel(), w.ravel())).reshape(w.shape)
        return np.sum(half * weights * t * f, axis=-1)

    outer = segment_sum(outer_t, np.ones_like(outer_t), x, wx)
    ring = segment_sum(inner_t, outer_t, xr, wr)
    # the excised disk carries a third of the ring's weight up to O(delta^(2 + exponent))
    return np.sum(jac * (outer + 4.0 * ring / 3.0), axis=1)


def second_moment_fan(
    n: int,
    delta_diag: float = DEFAULT_DELTA_DIAG,
    workers: int = 1,
    integrand: Integrand = area_integrand,
) -> tuple[float, int]:
    """Polar rule in z and fan rule in w with the diagonal shell extrapolated.

    The disk |w - z| < delta (delta = ``delta_diag``, reduced near the
    boundary so the ring fits inside D+) is excised. Its contribution is
    Richardson-extrapolated from the ring delta < |w - z| < 2 delta under the
    delta^2 scaling of a disk around a continuous integrand.

    :param n: Nodes per coordinate of both rules
    :param delta_diag: Radius of the excised disk
    :param workers: Worker threads
    :param integrand: f(z, w) on flat arrays; the area integrand by default
    :return: (value, number of integrand evaluations)
    """
    if n < 1:
        raise DomainError(f"second_moment_fan requires n >= 1, got {n}")
    if delta_diag <= 0:
        raise DomainError(f"delta_diag must be > 0, got {delta_diag}")
    nodes, weights = polar_rule(n)
    m = nodes.size
    rows = max(1, PAIR_BLOCK // (2 * n * (n + RING_NODES)))
    starts = range(0, m, rows)

    def block(start: int) -> float:
        stop = min(start + rows, m)
        return float(weights[start:stop] @ _fan_block(nodes[start:stop], n, delta_diag, integrand))

    if workers <= 1:
        parts = [block(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, starts))
    return math.fsum(parts), fan_evaluations(n)


def _coarse_order(fine: int) -> int:
    return max(4, round(2 * fine / 3))


def _orders_for_budget(budget: int) -> tuple[int, int]:
    fine = 8
    while fan_evaluations(fine + 1) + fan_evaluations(_coarse_order(fine + 1)) <= budget:
        fine += 1
    return fine, _coarse_order(fine)


def second_moment_deterministic(
    budget: int,
    delta_diag: float = DEFAULT_DELTA_DIAG,
    workers: int = 1,
) -> IntegralResult:
    """Two-level fan-rule estimate of the second moment within about ``budget`` evaluations."""
    fine, coarse = _orders_for_budget(budget)
    coarse_value, n_coarse = second_moment_fan(coarse, delta_diag, workers)
    fine_value, n_fine = second_moment_fan(fine, delta_diag, workers)
    logger.info("fan rule orders %d/%d: %.10g / %.10g", coarse, fine, coarse_value, fine_value)
    return IntegralResult(
        value=fine_value,
        error_estimate=abs(fine_value - coarse_value),
        n_evaluations=n_coarse + n_fine,
        method="deterministic",
        budget=budget,
    )


_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def _open_unit(rng: np.random.Generator, size: int) -> FloatArray:
    return rng.uniform(np.finfo(float).tiny, 1.0, size)


def graded_point(v: FloatArray, s: FloatArray, grading: float) -> tuple[ComplexArray, FloatArray]:
    """Map the unit square onto D+ with extra density near its boundary.

    r^2 = (1 - g) v + g (1 - (1 - v)^2) and theta / pi = (1 - g) s + g s^2 (3 - 2 s);
    g = 0 is the equal-area map.

    :param v: Radial coordinate in (0, 1)
    :param s: Angular coordinate in (0, 1)
    :param grading: Weight g in [0, 1) of the graded part
    :return: (points, area Jacobian)
    """
    u = np.minimum((1.0 - grading) * v + grading * (1.0 - (1.0 - v) ** 2), _BELOW_ONE)
    theta = math.pi * ((1.0 - grading) * s + grading * s * s * (3.0 - 2.0 * s))
    du = (1.0 - grading) + 2.0 * grading * (1.0 - v)
    dtheta = math.pi * ((1.0 - grading) + 6.0 * grading * s * (1.0 - s))
    return np.sqrt(u) * np.exp(1j * theta), 0.5 * du * dtheta


def _mc_cell(
    i: int,
    j: int,
    k: int,
    n_cell: int,
    rng: np.random.Generator,
    mix: float,
    bandwidth: float,
    grading: float,
) -> tuple[float, float, int]:
    """Mean and variance of the importance weight for one z cell."""
    z, jac = graded_point((i + _open_unit(rng, n_cell)) / k, (j + _open_unit(rng, n_cell)) / k, grading)

    uniform = np.sqrt(_open_unit(rng, n_cell)) * np.exp(1j * math.pi * _open_unit(rng, n_cell))
    kernel = z + bandwidth * (rng.standard_normal(n_cell) + 1j * rng.standard_normal(n_cell))
    w = np.where(rng.random(n_cell) < mix, kernel, uniform)

    inside = (np.abs(w) < 1.0) & (w.imag > 0)
    q = (1.0 - mix) * (2.0 / math.pi) + mix * np.exp(
        -np.abs(w - z) ** 2 / (2.0 * bandwidth**2)
    ) / (2.0 * math.pi * bandwidth**2)
    g = np.zeros(n_cell)
    g[inside] = jac[inside] * area_integrand(z[inside], w[inside]) / q[inside]
    return float(np.mean(g)), float(np.var(g, ddof=1)), int(np.sum(inside))


def second_moment_mc(
    budget: int,
    seed: int,
    strata: int = DEFAULT_STRATA,
    mix: float = DEFAULT_MIX,
    bandwidth: float = DEFAULT_BANDWIDTH,
    workers: int = 1,
    grading: float = DEFAULT_GRADING,
) -> IntegralResult:
    """Stratified importance-sampling estimate of the second moment.

    :param budget: Total number of (z, w) draws
    :param seed: Root seed; cell c uses child c of ``SeedSequence(seed)``
    :param strata: Cells per coordinate of the grid in the coordinates of :func:`graded_point`
    :param mix: Weight of the Gaussian kernel in the w density (0 gives uniform w)
    :param bandwidth: Standard deviation of the kernel
    :param workers: Worker threads
    :param grading: Boundary grading of the z density (0 gives equal-area cells)
    :return: Estimate with error 3 SE
    """
    if not 0 <= mix < 1:
        raise DomainError(f"mix must lie in [0, 1), got {mix}")
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be > 0, got {bandwidth}")
    if not 0 <= grading < 1:
        raise DomainError(f"grading must lie in [0, 1), got {grading}")
    cells = strata * strata
    n_cell = budget // cells
    if n_cell < 2:
        raise DomainError(f"budget {budget} leaves fewer than 2 draws in each of {cells} cells")
    if budget < MIN_MC_BUDGET:
        logger.warning("Monte Carlo budget %d is below %d; error bars will be wide", budget, MIN_MC_BUDGET)
    children = np.random.SeedSequence(seed).spawn(cells)

    def cell(c: int) -> tuple[float, float, int]:
        i, j = divmod(c, strata)
        rng = np.random.Generator(np.random.PCG64(children[c]))
        return _mc_cell(i, j, strata, n_cell, rng, mix, bandwidth, grading)

    if workers <= 1:
        parts = [cell(c) for c in range(cells)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(cell, range(cells)))

    area = 1.0 / cells
    value = math.fsum(area * mean for mean, _, _ in parts)
    variance = math.fsum(area**2 * var / n_cell for _, var, _ in parts)
    return IntegralResult(
        value=value,
        error_estimate=3.0 * math.sqrt(variance),
        n_evaluations=sum(n for _, _, n in parts),
        method="stratified-mc",
        seed=seed,
        budget=budget,
    )


@dataclass
class SecondMomentReport:
    """Both second-moment estimates and the checks run on them."""

    deterministic: IntegralResult
    monte_carlo: IntegralResult
    first_moment: float = FIRST_MOMENT

    @property
    def results(self) -> list[IntegralResult]:
        return [self.deterministic, self.monte_carlo]

    @property
    def discrepancy(self) -> float:
        """Relative difference of the two methods."""
        return abs(self.deterministic.value - self.monte_carlo.value) / abs(self.deterministic.value)

    @property
    def agree(self) -> bool:
        gap = abs(self.deterministic.value - self.monte_carlo.value)
        return gap <= self.deterministic.error_estimate + self.monte_carlo.error_estimate

    @property
    def close(self) -> bool:
        """The methods differ by less than MAX_DISCREPANCY relative to the deterministic value."""
        return self.discrepancy < MAX_DISCREPANCY

    def passed(self) -> bool:
        """Error bars overlap, the methods are within 2% and the moment bounds hold."""
        return self.agree and self.close and self.bounds_hold()

    @property
    def headline(self) -> float:
        return self.deterministic.value if self.agree else self.monte_carlo.value

    @property
    def airy_ratio(self) -> float:
        """E[A^2] / E[A]^2, to compare with 10 / (3 pi)."""
        return self.headline / self.first_moment**2

    @property
    def relative_to_airy(self) -> float:
        return self.headline / AIRY_SECOND_MOMENT - 1.0

    def bounds_hold(self) -> bool:
        """E[A]^2 <= E[A^2] <= (pi/2) E[A], with A <= pi/2."""
        return self.first_moment**2 <= self.headline <= HALF_DISK_AREA * self.first_moment


def integrate_second_moment(
    budget: int,
    seed: int = 0,
    delta_diag: float = DEFAULT_DELTA_DIAG,
    mix: float = DEFAULT_MIX,
    workers: int = 1,
) -> SecondMomentReport:
    """Second moment of the area by both methods.

    Warns with :class:`MethodDisagreementWarning` if the methods differ by
    more than their combined error estimates.

    :param budget: Integrand evaluations per method
    :param seed: Seed of the Monte Carlo method
    :param delta_diag: Radius of the diagonal disk excised by the fan rule
    :param mix: Kernel weight of the Monte Carlo w density
    :param workers: Worker threads
    :return: Report carrying both results
    """
    if budget < 1:
        raise DomainError(f"budget must be >= 1, got {budget}")
    deterministic = second_moment_deterministic(budget, delta_diag, workers)
    monte_carlo = second_moment_mc(budget, seed, mix=mix, workers=workers)
    report = SecondMomentReport(deterministic, monte_carlo)
    if not report.agree:
        warnings.warn(
            f"second-moment methods disagree: {deterministic.value:.6g} +- {deterministic.error_estimate:.2g} "
            f"vs {monte_carlo.value:.6g} +- {monte_carlo.error_estimate:.2g}",
            MethodDisagreementWarning,
            stacklevel=2,
        )
    if not report.close:
        logger.warning("second-moment methods differ by %.2f%%", 100.0 * report.discrepancy)
    if not report.bounds_hold():
        logger.warning("second moment %.6g violates the moment bounds", report.headline)
    return report


@dataclass
class DiagnosticsReport:
    """Findings of an integrand scan.

    :param n_probe: Random pairs scanned
    :param n_nan: NaN values among them
    :param n_negative: Values below -1e-9
    :param n_above_one: Values above 1 + 1e-9
    :param max_value: Largest value seen in any scan
    :param diagonal_exponent: Slope of log|f(z, z + d) - f1(z)| against log d
    :param diagonal_max_deviation: Largest |f(z, z + d) - f1(z)| at d = 1e-8
    :param axis_exponent: Slope of log f(x + iy, w) against log y as y -> 0
    """

    n_probe: int
    n_nan: int
    n_negative: int
    n_above_one: int
    max_value: float
    diagonal_exponent: float
    diagonal_max_deviation: float
    axis_exponent: float
    diagonal_values: list[float] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return self.n_nan == 0 and self.n_negative == 0 and self.n_above_one == 0


_DIAGONAL_BASES = (0.5j, 0.3 + 0.4j, -0.6 + 0.2j, 0.1 + 0.9j)
_DIAGONAL_DIRECTIONS = (1.0, np.exp(1j * math.pi / 3), np.exp(2j * math.pi / 3), 1j)


def integrand_diagnostics(n_probe: int = 100_000, seed: int = 0, chunk: int = 100_000) -> DiagnosticsReport:
    """Scan the area integrand for invalid values and its limiting behaviour.

    :param n_probe: Number of uniform random pairs in D+ x D+
    :param seed: Seed of the random scan
    :param chunk: Pairs evaluated per batch
    :return: Counts of bad values, the maximum, and the near-diagonal and near-axis exponents
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n_nan = n_negative = n_above = 0
    max_value = -math.inf
    remaining = n_probe
    while remaining > 0:
        size = min(chunk, remaining)
        z = np.sqrt(_open_unit(rng, size)) * np.exp(1j * math.pi * _open_unit(rng, size))
        w = np.sqrt(_open_unit(rng, size)) * np.exp(1j * math.pi * _open_unit(rng, size))
        f = area_integrand(z, w, check=False)
        n_nan += int(np.sum(np.isnan(f)))
        n_negative += int(np.sum(f < -1e-9))
        n_above += int(np.sum(f > 1.0 + 1e-9))
        max_value = max(max_value, float(np.nanmax(f)))
        remaining -= size

    distances = 10.0 ** -np.arange(2, 9)
    deviations = []
    diagonal_values = []
    for base in _DIAGONAL_BASES:
        limit = touch_radius_one_point(base)
        for direction in _DIAGONAL_DIRECTIONS:
            values = np.array([area_integrand(base, base + d * direction, check=False) for d in distances])
            diagonal_values.extend(values.tolist())
            deviations.append(np.abs(values - limit))
    dev = np.maximum(np.array(deviations), 1e-300)
    diagonal_exponent = float(np.polyfit(np.log(distances), np.log(np.median(dev, axis=0)), 1)[0])
    max_value = max(max_value, float(np.max(diagonal_values)))

    heights = 10.0 ** -np.arange(2, 7)
    axis = np.array([area_integrand(0.3 + 1j * y, 0.2 + 0.5j, check=False) for y in heights])
    axis_exponent = float(np.polyfit(np.log(heights), np.log(axis), 1)[0])

    return DiagnosticsReport(
        n_probe=n_probe,
        n_nan=n_nan,
        n_negative=n_negative,
        n_above_one=n_above,
        max_value=max_value,
        diagonal_exponent=diagonal_exponent,
        diagonal_max_deviation=float(np.max(dev[:, -1])),
        axis_exponent=axis_exponent,
        diagonal_values=diagonal_values,
    )


def slice_grid(w: complex, n: int) -> list[tuple[float, float, float]]:
    """Values of f(., w) on an n x n grid over [-1, 1] x (0, 1], keeping points inside D+.

    :param w: Fixed second point in D+
    :param n: Grid points per axis
    :return: (re, im, f) rows
    """
    if n < 2:
        raise DomainError(f"slice_grid requires n >= 2, got {n}")
    xs = np.linspace(-1.0, 1.0, n)
    ys = np.linspace(1.0 / n, 1.0, n)
    grid = (xs[None, :] + 1j * ys[:, None]).ravel()
    grid = grid[np.abs(grid) < 1.0]
    values = area_integrand(grid, np.full(grid.shape, complex(w)))
    return [(float(p.real), float(p.imag), float(v)) for p, v in zip(grid, values)]
