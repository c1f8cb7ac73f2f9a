"""Invariant suite run by ``slepassage verify``.

Every check returns one :class:`CheckMessage`; a failed check has severity
'error'. The quick subset skips the checks that integrate or scan.
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as sp

from slepassage import formulas, special
from slepassage.errors import DivergenceError, SlePassageError
from slepassage.models import FlowState


@dataclass
class CheckMessage:
    """Outcome of a single invariant check.

    :param severity: 'error' for a failed check, 'info' for a passed one
    :param message: What was measured
    :param check: Name of the check
    """

    severity: str
    message: str
    check: str = ""

    @property
    def passed(self) -> bool:
        return self.severity != "error"


def _verdict(check: str, ok: bool, message: str) -> CheckMessage:
    return CheckMessage(severity="info" if ok else "error", message=message, check=check)


_SAMPLE_POINTS = (1j, 1 + 1j, -1 + 1j, 0.2 + 0.05j, 3 + 0.5j, -0.4 + 2.5j)
_DISK_POINTS = (0.5j, 0.3 + 0.4j, -0.6 + 0.2j, 0.05 + 0.9j)
_HYP_CASES = (
    (1.0, 4.0 / 3.0, 5.0 / 3.0, 0.3),
    (1.0, 4.0 / 3.0, 5.0 / 3.0, 0.9),
    (0.5, 0.25, 1.5, -0.4),
    (1.0 / 3.0, 2.0 / 3.0, 5.0 / 3.0, 0.75),
    (4.0 / 3.0, 1.0, 5.0 / 3.0, 0.99),
    (2.0, 0.5, 3.7, 0.6),
)

def _random_half_plane(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(scale=3.0, size=n) + 1j * 10.0 ** rng.uniform(-3.0, 3.0, size=n)


def _random_half_disk(rng: np.random.Generator, n: int) -> np.ndarray:
    r = 0.999 * np.sqrt(rng.random(n)) + 1e-4
    return r * np.exp(1j * math.pi * (1.0 - rng.random(n)))



class InvariantSuite:
    """Runs the identities, limits and symmetries of the formula modules.

    :param quick: Restrict to the sub-second subset
    """

    def __init__(self, quick: bool = False) -> None:
        self.quick = quick

    def checks(self) -> list[Callable[[], CheckMessage]]:
        quick = [
            self._check_hyp2f1_scipy,
            self._check_hyp2f1_symmetry,
            self._check_hyp2f1_at_one,
            self._check_g_endpoints,
            self._check_g_ode,
            self._check_kummer,
            self._check_one_point_symmetry,
            self._check_two_point_consistency,
            self._check_two_point_forms,
            self._check_factorisation,
            self._check_scale_invariance,
            self._check_gamsa_cardy,
            self._check_green_limit,
            self._check_bulk_decay,
            self._check_disk_sigma,
            self._check_mobius,
            self._check_escape_expansion,
            self._check_radius_cdf,
            self._check_area_symmetry,
            self._check_flow_step,
            self._check_flow_invariants,
        ]
        if self.quick:
            return quick
        return quick + [
            self._check_radius_law,
            self._check_touch_radius_derivative,
            self._check_area_integrand_derivative,
            self._check_first_moment,
            self._check_integrand_scan,
            self._check_probability_range,
            self._check_outcome_tallies,
            self._check_second_moment,
        ]

    def run(self) -> list[CheckMessage]:
        """Run all checks of this suite.

        :return: One message per check, in a fixed order
        """
        messages: list[CheckMessage] = []
        for check in self.checks():
            name = check.__name__.removeprefix("_check_")
            try:
                message = check()
            except SlePassageError as e:
                message = _verdict(name, False, f"raised {type(e).__name__}: {e}")
            message.check = name
            messages.append(message)
        return messages

    def _check_hyp2f1_scipy(self) -> CheckMessage:
        worst = max(
            abs(special.hyp2f1(a, b, c, x) / sp.hyp2f1(a, b, c, x) - 1.0) for a, b, c, x in _HYP_CASES
        )
        return _verdict("", worst < 1e-10, f"max relative deviation from scipy {worst:.2e}")

    def _check_hyp2f1_symmetry(self) -> CheckMessage:
        worst = max(
            abs(special.hyp2f1(b, a, c, x) / special.hyp2f1(a, b, c, x) - 1.0) for a, b, c, x in _HYP_CASES
        )
        return _verdict("", worst < 1e-12, f"2F1(a, b) and 2F1(b, a) differ by {worst:.1e}")

    def _check_hyp2f1_at_one(self) -> CheckMessage:
        gauss = sp.gamma(8.0 / 3.0) * sp.gamma(1.0 / 3.0) / (sp.gamma(5.0 / 3.0) * sp.gamma(4.0 / 3.0))
        value = special.hyp2f1(1.0, 4.0 / 3.0, 8.0 / 3.0, 1.0)
        try:
            special.hyp2f1(1.0, 4.0 / 3.0, 5.0 / 3.0, 1.0)
            diverges = False
        except DivergenceError:
            diverges = True
        ok = abs(value - gauss) < 1e-12 * gauss and diverges
        return _verdict("", ok, f"Gauss value error {abs(value - gauss):.2e}, divergence raised: {diverges}")

    def _check_g_endpoints(self) -> CheckMessage:
        grid = np.linspace(0.0, 1.0, 201)
        values = special.G(grid)
        ok = special.G(0.0) == 1.0 and special.G(1.0) == 0.0 and bool(np.all(np.diff(values) < 0))
        return _verdict("", ok, f"G(0) = {special.G(0.0)}, G(1) = {special.G(1.0)}, decreasing on [0, 1]")

    def _check_g_ode(self) -> CheckMessage:
        points = 99 if self.quick else 999
        grid = np.linspace(0.0, 1.0, points + 2)[1:-1]
        worst = max(abs(special.g_ode_residual(float(t), 1e-5)) for t in grid)
        return _verdict("", worst < 1e-8, f"max ODE residual {worst:.2e} on {points} points")

    def _check_kummer(self) -> CheckMessage:
        worst = max(abs(special.kummer_connection_residual(t)) for t in (0.1, 0.3, 0.5, 0.7, 0.9))
        return _verdict("", worst < 1e-9, f"max connection residual {worst:.2e}")

    def _check_one_point_symmetry(self) -> CheckMessage:
        worst = max(
            abs(formulas.left_passage_one(-z.conjugate()) - (1.0 - formulas.left_passage_one(z)))
            for z in _SAMPLE_POINTS
        )
        at_i = formulas.left_passage_one(1j)
        ok = worst < 1e-14 and abs(at_i - 0.5) < 1e-15
        return _verdict("", ok, f"L(-conj z) + L(z) - 1 up to {worst:.1e}, L(i) = {at_i}")

    def _check_two_point_consistency(self) -> CheckMessage:
        worst = 0.0
        for z in _SAMPLE_POINTS:
            lz = formulas.left_passage_one(z)
            worst = max(worst, abs(formulas.left_passage_two(z, z) - lz))
            for w in _SAMPLE_POINTS:
                lzw = formulas.left_passage_two(z, w)
                worst = max(worst, abs(lzw - formulas.left_passage_two(w, z)))
                worst = max(worst, lzw - min(lz, formulas.left_passage_one(w)), 0.0)
        return _verdict("", worst < 1e-12, f"symmetry, diagonal and marginal bounds hold to {worst:.1e}")

    def _check_two_point_forms(self) -> CheckMessage:
        worst = 0.0
        for z in _SAMPLE_POINTS:
            for w in _SAMPLE_POINTS:
                ref = formulas.left_passage_two(z, w)
                worst = max(worst, abs(formulas.left_passage_two_cartesian(z, w) - ref))
                worst = max(worst, abs(formulas.left_passage_ansatz(z, w) - ref))
        return _verdict("", worst < 1e-12, f"product, cartesian and square-root forms agree to {worst:.1e}")

    def _check_factorisation(self) -> CheckMessage:
        worst = 0.0
        for z in _SAMPLE_POINTS:
            for u in (-2.0, -0.3, 0.3, 2.0):
                w = complex(u, 1e-8)
                product = formulas.left_passage_one(z) * formulas.left_passage_one(w)
                worst = max(worst, abs(formulas.left_passage_two(z, w) - product))
        return _verdict("", worst < 1e-8, f"L(z, u + 1e-8 i) - L(z) L(u + 1e-8 i) up to {worst:.1e}")

    def _check_scale_invariance(self) -> CheckMessage:
        worst = 0.0
        for lam in (0.01, 7.0, 1e3):
            for z, w in zip(_SAMPLE_POINTS, _SAMPLE_POINTS[1:]):
                worst = max(
                    worst,
                    abs(formulas.left_passage_two(lam * z, lam * w) - formulas.left_passage_two(z, w)),
                    abs(formulas.left_passage_one(lam * z) - formulas.left_passage_one(z)),
                )
        return _verdict("", worst < 1e-12, f"scaling changes values by at most {worst:.1e}")

    def _check_gamsa_cardy(self) -> CheckMessage:
        at_i = formulas.two_path_one_point(1j)
        worst = 0.0
        for z in _SAMPLE_POINTS:
            for direction in (1.0, 1j, cmath.exp(0.25j * math.pi)):
                two = formulas.two_path_two_point(z, z + 1e-5 * direction)
                worst = max(worst, abs(two - formulas.two_path_one_point(z)))
        ok = abs(at_i - 0.8) < 1e-15 and worst < 1e-3
        return _verdict("", ok, f"P(i) = {at_i}, collapse error at |delta| = 1e-5 is {worst:.2e}")

    def _check_green_limit(self) -> CheckMessage:
        z = 1j
        target = formulas.green_limit(z)
        scaled = {}
        for eta in (1.0, 1j):
            for eps in (1e-2, 1e-3, 1e-4, 1e-5):
                p = formulas.separation_probability(z - eps * eta, z + eps * eta)
                scaled[eta, eps] = eps ** (-2.0 / 3.0) * p
        errors = [abs(scaled[eta, 1e-5] / target - 1.0) for eta in (1.0, 1j)]
        monotone = all(
            abs(scaled[eta, e2] - target) <= abs(scaled[eta, e1] - target) + 1e-12
            for eta in (1.0, 1j)
            for e1, e2 in ((1e-2, 1e-3), (1e-3, 1e-4), (1e-4, 1e-5))
        )
        ok = max(errors) < 5e-3 and monotone
        return _verdict("", ok, f"eps^(-2/3) P at eps = 1e-5 within {max(errors):.2e} of the limit {target:.6f}")

    def _check_bulk_decay(self) -> CheckMessage:
        w = 0.3 + 0.7j
        r = 1e5
        z = 1j * r
        g_limit = r * special.G(formulas.sigma(z, w)) / (0.8 * w.imag)
        p_limit = r**2 * formulas.bulk_containment(z, w) / (0.8 * abs(w) ** 2)
        worst = max(abs(g_limit - 1.0), abs(p_limit - 1.0))
        return _verdict("", worst < 1e-3, f"r G -> 4v/5 and r^2 p_w -> (4/5)|w|^2 to {worst:.1e}")

    def _check_disk_sigma(self) -> CheckMessage:
        worst = 0.0
        for R in (1.0, 2.5):
            for z in _DISK_POINTS:
                for w in _DISK_POINTS:
                    jz = formulas.joukowsky(z / R).conjugate()
                    jw = formulas.joukowsky(w / R).conjugate()
                    worst = max(worst, abs(formulas.sigma_disk(z, w, R) - formulas.sigma(jz, jw)))
        return _verdict("", worst < 1e-12, f"closed-form disk invariant matches the Joukowsky image to {worst:.1e}")

    def _check_mobius(self) -> CheckMessage:
        worst = 0.0
        for z in _SAMPLE_POINTS:
            for eps in (0.01, 1.0, 3.0):
                image = formulas.mobius_f_eps(z, eps)
                worst = max(worst, abs(formulas.mobius_f_eps_inverse(image, eps) - z) / abs(z))
                if image.imag <= 0:
                    return _verdict("", False, f"F_eps({z}) = {image} left the half-plane")
        rng = np.random.default_rng(0)
        z = rng.uniform(-1.0, 1.0, size=200) + 1j * rng.uniform(0.2, 2.0, size=200)
        w = rng.uniform(-1.0, 1.0, size=200) + 1j * rng.uniform(0.2, 2.0, size=200)
        before = formulas.sigma(z, w)
        drift = 0.0
        for eps in (0.01, 0.1, 1.0):
            after = formulas.sigma(formulas.mobius_f_eps(z, eps), formulas.mobius_f_eps(w, eps))
            drift = max(drift, float(np.max(np.abs(after - before))))
        ok = worst < 1e-12 and drift < 1e-12
        return _verdict("", ok, f"F_eps inverse round trip to {worst:.1e}, sigma moves by {drift:.1e} under F_eps")

    def _check_escape_expansion(self) -> CheckMessage:
        R, eps, h = 2.0, 0.01, 1e-4
        slope = (
            formulas.bubble_escape_expansion(R + h, 0.0, eps) - formulas.bubble_escape_expansion(R - h, 0.0, eps)
        ) / (2 * h)
        linear = (formulas.bubble_escape_expansion(R, h, eps) - formulas.bubble_escape_expansion(R, 0.0, eps)) / h
        ok = abs(slope - linear) < 1e-9
        return _verdict("", ok, f"radius derivative {slope:.6e} vs increment coefficient {linear:.6e}")

    def _check_radius_cdf(self) -> CheckMessage:
        z = -0.4 + 0.9j
        values = formulas.radius_cdf(np.linspace(0.05, 100.0, 4001), z)
        ok = bool(np.all(np.diff(values) >= 0.0)) and values[0] == 0.0 and 1.0 - values[-1] < 1e-3
        return _verdict("", ok, f"P(R <= r) nondecreasing from {values[0]} to {values[-1]:.6f}")

    def _check_area_symmetry(self) -> CheckMessage:
        rng = np.random.default_rng(1)
        z, w = _random_half_disk(rng, 1000), _random_half_disk(rng, 1000)
        worst = float(np.max(np.abs(formulas.area_integrand(z, w) - formulas.area_integrand(w, z))))
        return _verdict("", worst < 1e-10, f"f(z, w) - f(w, z) up to {worst:.1e} on 1000 pairs")

    def _check_flow_step(self) -> CheckMessage:
        from slepassage.simulation import flow_step

        start = FlowState(x=0.0, y=1.0, t=0.0)
        one = flow_step(start, 0.0, 0.01)
        half = flow_step(flow_step(start, 0.0, 0.005), 0.0, 0.005)
        exact = math.sqrt(0.96)
        worst = max(abs(one.x), abs(one.y - exact), abs(half.y - one.y), abs(half.x - one.x))
        return _verdict("", worst < 1e-12, f"slit step at i gives {one.y:.15f} (exact sqrt(0.96)), semigroup gap {worst:.1e}")

    def _check_flow_invariants(self) -> CheckMessage:
        from slepassage.models import SimConfig
        from slepassage.simulation import classify_passage, flow_points, sample_driver

        cfg = SimConfig(dt=1e-3, growth=0.05, t_max=100.0, seed=7)
        driver = sample_driver(cfg, n_paths=64)
        points = [1j, 0.5 + 0.5j, -2 + 1j, 0.2 + 0.05j]
        times = np.concatenate(([0.0], driver.times))
        heights = flow_points(points, driver, cfg, times)[0].imag
        rising = float(np.max(np.diff(heights, axis=0) / heights[:-1]))

        outcomes = classify_passage(points, driver, cfg)
        repeat = np.array_equal(outcomes, classify_passage(points, driver, cfg))
        scaled = np.array_equal(outcomes, classify_passage([2 * p for p in points], driver.rescaled(2.0), cfg))
        ok = rising <= 1e-14 and repeat and scaled
        return _verdict(
            "",
            ok,
            f"largest relative rise of Im z_t {rising:.1e}; repeat identical: {repeat}; "
            f"Brownian scaling by 2 identical: {scaled}",
        )

    def _check_radius_law(self) -> CheckMessage:
        worst_mass = worst_mean = 0.0
        for m in (0.5, 1.0, 2.0):
            z = complex(0.6 * m, 0.8 * m)
            mass, _ = integrate.quad(lambda r: formulas.radius_density(r, z), m, np.inf, epsabs=1e-13, epsrel=1e-12)
            mean, _ = integrate.quad(
                lambda r: r * formulas.radius_density(r, z), m, np.inf, epsabs=1e-12, epsrel=1e-12
            )
            worst_mass = max(worst_mass, abs(mass - 1.0))
            worst_mean = max(worst_mean, abs(mean - formulas.expected_radius(z)))
        ok = worst_mass < 1e-8 and worst_mean < 1e-6
        return _verdict("", ok, f"density mass error {worst_mass:.1e}, mean error {worst_mean:.1e}")

    def _check_touch_radius_derivative(self) -> CheckMessage:
        h = 1e-5
        worst = 0.0
        for z in _DISK_POINTS:
            deriv = (
                formulas.bubble_in_disk_one_coeff(z, 1.0 + h) - formulas.bubble_in_disk_one_coeff(z, 1.0 - h)
            ) / (2 * h)
            worst = max(worst, abs(0.8 * deriv - formulas.touch_radius_one_point(z)))
        return _verdict("", worst < 1e-8, f"f1 equals (4/5) d/dR of the disk coefficient to {worst:.1e}")

    def _check_area_integrand_derivative(self) -> CheckMessage:
        h = 1e-5
        worst = 0.0
        for z in _DISK_POINTS:
            for w in _DISK_POINTS:
                if z == w:
                    continue
                deriv = (
                    formulas.bubble_in_disk_two_coeff(z, w, 1.0 + h)
                    - formulas.bubble_in_disk_two_coeff(z, w, 1.0 - h)
                ) / (2 * h)
                worst = max(worst, abs(0.8 * deriv - formulas.area_integrand(z, w)))
        return _verdict("", worst < 1e-7, f"f equals (4/5) d/dR of the two-point disk coefficient to {worst:.1e}")

    def _check_first_moment(self) -> CheckMessage:
        from slepassage.quadrature import FIRST_MOMENT, integrate_first_moment

        result = integrate_first_moment(tol=1e-8)
        err = abs(result.value - FIRST_MOMENT)
        return _verdict("", err < 1e-6, f"integral of f1 over D+ = {result.value:.12f} (pi/10 off by {err:.1e})")

    def _check_integrand_scan(self) -> CheckMessage:
        from slepassage.quadrature import integrand_diagnostics

        report = integrand_diagnostics(n_probe=20_000)
        ok = report.clean and report.max_value <= 1.0 and 0.9 < report.axis_exponent < 1.1
        return _verdict(
            "",
            ok,
            f"{report.n_nan} NaN, {report.n_negative} negative, {report.n_above_one} above one; "
            f"max {report.max_value:.4f}; axis exponent {report.axis_exponent:.3f}",
        )

    def _check_probability_range(self) -> CheckMessage:
        n = 100_000
        rng = np.random.default_rng(2)
        z, w = _random_half_plane(rng, n), _random_half_plane(rng, n)
        zd, wd = _random_half_disk(rng, n), _random_half_disk(rng, n)
        samples = {
            "left_passage_one": formulas.left_passage_one(z),
            "left_passage_two": formulas.left_passage_two(z, w),
            "bulk_containment": formulas.bulk_containment(z, w),
            "radius_cdf": formulas.radius_cdf(10.0 ** rng.uniform(-3.0, 4.0, size=n), z),
            "bulk_containment_in_disk": formulas.bulk_containment_in_disk(zd, wd, 1.0),
            "touch_radius_one_point": formulas.touch_radius_one_point(zd),
            "area_integrand": formulas.area_integrand(zd, wd),
            "two_path_one_point": formulas.two_path_one_point(z),
            "two_path_two_point": formulas.two_path_two_point(z, w),
            "two_path_in_not_in": formulas.two_path_in_not_in(z, w),
        }
        outside = [name for name, v in samples.items() if np.any((v < 0.0) | (v > 1.0))]
        message = f"{len(samples)} probabilities on {n} random inputs; outside [0, 1]: {outside}"
        return _verdict("", not outside, message)

    def _check_outcome_tallies(self) -> CheckMessage:
        from slepassage.harness import OutcomeTally, crosstab, simulate_outcomes
        from slepassage.models import SimConfig

        cfg = SimConfig(dt=1e-3, growth=0.05, t_max=100.0, seed=9)
        outcomes = simulate_outcomes([1j, 2j], 4096, cfg, shard_size=1024)
        threaded = simulate_outcomes([1j, 2j], 4096, cfg, workers=2, shard_size=1024)
        table = crosstab(outcomes[:, 0], outcomes[:, 1])
        left = outcomes[:, 0] == 1
        undecided = outcomes[:, 0] == 0
        pooled = OutcomeTally.from_masks(left, undecided)
        merged = OutcomeTally()
        for shard in np.split(np.arange(4096), 4):
            merged = merged.merge(OutcomeTally.from_masks(left[shard], undecided[shard]))
        ok = np.array_equal(outcomes, threaded) and merged == pooled and sum(table.values()) == 4096
        return _verdict("", ok, f"outcome table {table}; shard merge equals pooled tally: {merged == pooled}")

    def _check_second_moment(self) -> CheckMessage:
        from slepassage.quadrature import (
            FIRST_MOMENT,
            HALF_DISK_AREA,
            MAX_DISCREPANCY,
            MIN_MC_BUDGET,
            second_moment_fan,
            second_moment_mc,
        )

        fine, _ = second_moment_fan(12)
        coarse, _ = second_moment_fan(8)
        graded = second_moment_mc(MIN_MC_BUDGET, seed=0, strata=8)
        flat = second_moment_mc(MIN_MC_BUDGET, seed=1, strata=8, grading=0.0)
        bounds = FIRST_MOMENT**2 <= fine <= HALF_DISK_AREA * FIRST_MOMENT
        unbiased = abs(graded.value - flat.value) <= math.hypot(graded.error_estimate, flat.error_estimate)
        refinement = abs(fine - coarse)
        close = abs(graded.value - fine) <= graded.error_estimate + refinement + MAX_DISCREPANCY * fine
        ok = bounds and unbiased and close
        return _verdict(
            "",
            ok,
            f"fan rule {fine:.6f} (order 8: {coarse:.6f}), graded MC {graded.value:.6f}, "
            f"equal-area MC {flat.value:.6f}; E[A]^2 <= E[A^2] <= (pi/2) E[A]: {bounds}",
        )
