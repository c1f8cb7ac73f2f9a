"""Tests for the hypergeometric function, Gamma values and G."""

import math

import numpy as np
import pytest

from slepassage.errors import ConvergenceError, DivergenceError, DomainError
from slepassage.special import (
    C0,
    G,
    K_CONNECTION,
    gamma_fn,
    g_ode_residual,
    hyp2f1,
    hyp2f1_complement,
    kummer_connection_residual,
)
from tests import oracles

THIRD = 1.0 / 3.0

# (a, b, c, x) spanning the direct series, the connection formula,
# integer c - a - b and the x = 1 Gauss value.
HYP_CASES = [
    (1.0, 1.0, 2.0, -0.4),
    (1.0, 1.0, 2.0, 0.3),
    (1.0, 1.0, 2.0, 0.7),
    (0.5, 0.5, 1.5, 0.25),
    (1.0, 4 * THIRD, 5 * THIRD, 0.1),
    (1.0, 4 * THIRD, 5 * THIRD, 0.45),
    (1.0, 4 * THIRD, 5 * THIRD, 0.7),
    (1.0, 4 * THIRD, 5 * THIRD, 0.9),
    (1.0, 4 * THIRD, 5 * THIRD, 0.99),
    (THIRD, 2 * THIRD, 5 * THIRD, 0.2),
    (THIRD, 2 * THIRD, 5 * THIRD, 0.8),
    (4 * THIRD, 1.0, 5 * THIRD, 0.6),
    (4 * THIRD, 2.0, 5 * THIRD, 0.3),
    (4 * THIRD, 2.0, 5 * THIRD, 0.75),
    (2.5, 1.5, 4.2, 0.95),
    (-1.5, 2.0, 3.0, 0.5),
    (0.2, 0.3, 0.7, -0.5),
    (1.0, 1.0, 3.5, 1.0),
    (1.0, 4 * THIRD, 8 * THIRD, 0.5),
    (1.0, 4 * THIRD, 8 * THIRD, 1.0),
]


class TestHyp2F1:
    """Tests for the Gauss hypergeometric function."""

    @pytest.mark.parametrize(("a", "b", "c", "x"), HYP_CASES)
    def test_matches_high_precision_reference(self, a: float, b: float, c: float, x: float) -> None:
        """Every case agrees with the 50-digit reference to 1e-12."""
        expected = oracles.hyp2f1(a, b, c, x)
        assert hyp2f1(a, b, c, x, tol=1e-15) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize(("a", "b", "c", "x"), HYP_CASES)
    def test_symmetric_in_numerator_parameters(self, a: float, b: float, c: float, x: float) -> None:
        """2F1(a, b; c; x) = 2F1(b, a; c; x) across every evaluation regime."""
        assert hyp2f1(b, a, c, x) == pytest.approx(hyp2f1(a, b, c, x), rel=1e-12)

    @pytest.mark.parametrize("x", [0.45, 0.5, -0.5])
    def test_series_tail_within_tolerance(self, x: float) -> None:
        """A slowly decaying series (c - a - b < 1) still meets tol once stopped."""
        a, b, c = 1.0, 4 * THIRD, 2.0
        expected = oracles.hyp2f1(a, b, c, x)
        assert abs(hyp2f1(a, b, c, x, tol=1e-13) - expected) <= 2e-13 * max(1.0, abs(expected))

    def test_zero_argument_is_one(self) -> None:
        assert hyp2f1(0.7, 1.9, 2.3, 0.0) == 1.0

    def test_log_identity(self) -> None:
        """2F1(1, 1; 2; x) = -log(1 - x) / x."""
        x = 0.35
        assert hyp2f1(1.0, 1.0, 2.0, x) == pytest.approx(-math.log1p(-x) / x, rel=1e-13)

    def test_vectorised_matches_scalar(self) -> None:
        """Array input mixing all regimes matches element-wise calls."""
        xs = np.array([-0.3, 0.0, 0.4, 0.6, 0.95, 1.0])
        values = hyp2f1(1.0, 4 * THIRD, 8 * THIRD, xs)
        assert isinstance(values, np.ndarray)
        assert values.shape == xs.shape
        for x, v in zip(xs, values):
            assert v == pytest.approx(hyp2f1(1.0, 4 * THIRD, 8 * THIRD, float(x)), rel=1e-14)

    def test_scalar_returns_float(self) -> None:
        assert isinstance(hyp2f1(1.0, 1.0, 2.0, 0.2), float)

    def test_divergence_at_one(self) -> None:
        """x = 1 with c - a - b <= 0 raises rather than returning inf."""
        with pytest.raises(DivergenceError, match="c - a - b"):
            hyp2f1(1.0, 4 * THIRD, 5 * THIRD, 1.0)

    def test_convergence_error_at_iteration_cap(self) -> None:
        """Integer c - a - b forces the direct series, which stalls near x = 1."""
        with pytest.raises(ConvergenceError):
            hyp2f1(1.0, 1.0, 2.0, 0.99999)

    @pytest.mark.parametrize(
        ("c", "x"),
        [(0.0, 0.2), (-2.0, 0.2), (1.5, 1.2), (1.5, -0.6), (1.5, math.nan), (1.5, math.inf)],
    )
    def test_domain_errors(self, c: float, x: float) -> None:
        with pytest.raises(DomainError):
            hyp2f1(0.5, 0.5, c, x)

    def test_nonpositive_tolerance_rejected(self) -> None:
        with pytest.raises(DomainError, match="tol"):
            hyp2f1(1.0, 1.0, 2.0, 0.1, tol=0.0)


class TestHyp2F1Complement:
    """Tests for 2F1 evaluated from the complement of its argument."""

    @pytest.mark.parametrize("s", [0.05, 0.3, 0.49, 0.8, 1.4])
    def test_matches_direct_evaluation(self, s: float) -> None:
        direct = oracles.hyp2f1(1.0, 4 * THIRD, 5 * THIRD, 1.0 - s)
        assert hyp2f1_complement(1.0, 4 * THIRD, 5 * THIRD, s) == pytest.approx(direct, rel=1e-12)

    def test_tiny_complement_follows_leading_power(self) -> None:
        """For s below machine epsilon the value is dominated by K s^(-2/3)."""
        s = 1e-20
        value = hyp2f1_complement(1.0, 4 * THIRD, 5 * THIRD, s)
        assert math.isfinite(value)
        assert value * s ** (2.0 / 3.0) == pytest.approx(K_CONNECTION, rel=1e-6)

    def test_integer_excess_rejected(self) -> None:
        with pytest.raises(DomainError, match="non-integer"):
            hyp2f1_complement(1.0, 1.0, 2.0, 0.1)

    @pytest.mark.parametrize("s", [0.0, -0.1, 1.6])
    def test_out_of_range_rejected(self, s: float) -> None:
        with pytest.raises(DomainError):
            hyp2f1_complement(1.0, 4 * THIRD, 5 * THIRD, s)


class TestGamma:
    """Tests for Gamma values and the constant c0."""

    def test_factorial(self) -> None:
        assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-15)

    def test_half(self) -> None:
        assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)

    def test_array(self) -> None:
        values = gamma_fn(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(values, [1.0, 1.0, 2.0], rtol=1e-15)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_nonpositive_rejected(self, x: float) -> None:
        with pytest.raises(DomainError):
            gamma_fn(x)

    def test_c0_reference(self) -> None:
        assert C0 == pytest.approx(oracles.c0(), rel=1e-14)
        assert K_CONNECTION == pytest.approx(2.0 * oracles.c0(), rel=1e-14)


class TestG:
    """Tests for the correlation factor G."""

    def test_endpoints_exact(self) -> None:
        assert G(0.0) == 1.0
        assert G(1.0) == 0.0

    @pytest.mark.parametrize("sigma", [1e-9, 1e-4, 0.01, 0.1, 0.25, 0.4999, 0.5, 0.6, 0.9, 0.999, 1 - 1e-9])
    def test_matches_reference(self, sigma: float) -> None:
        assert G(sigma) == pytest.approx(oracles.G(sigma), abs=1e-11)

    def test_strictly_decreasing(self) -> None:
        values = G(np.linspace(0.0, 1.0, 401))
        assert np.all(np.diff(values) < 0)

    def test_continuous_across_branch_switch(self) -> None:
        assert abs(G(0.5 - 1e-13) - G(0.5)) < 1e-11

    def test_small_sigma_behaviour(self) -> None:
        """1 - G(sigma) ~ K sigma^(1/3) as sigma -> 0."""
        s = 1e-12
        assert (1.0 - G(s)) / s ** THIRD == pytest.approx(K_CONNECTION, rel=1e-3)

    def test_near_one_behaviour(self) -> None:
        """G(sigma) ~ (1 - sigma) / 5 as sigma -> 1."""
        t = 1e-6
        assert G(1.0 - t) / t == pytest.approx(0.2, rel=1e-5)

    def test_array_shape_preserved(self) -> None:
        grid = np.array([[0.0, 0.5], [0.75, 1.0]])
        assert G(grid).shape == (2, 2)

    @pytest.mark.parametrize("sigma", [-1e-3, 1.0 + 1e-12, math.nan])
    def test_domain(self, sigma: float) -> None:
        with pytest.raises(DomainError):
            G(sigma)


class TestResiduals:
    """Tests for the ODE and connection residual helpers."""

    def test_ode_residual_small(self) -> None:
        """G satisfies its hypergeometric ODE on a 99-point grid."""
        grid = np.linspace(0.0, 1.0, 101)[1:-1]
        worst = max(abs(g_ode_residual(float(t), 1e-5)) for t in grid)
        assert worst < 1e-8

    @pytest.mark.parametrize(("t", "h", "limit"), [(0.5, 1e-5, 1e-8), (0.01, 1e-6, 1e-6), (0.99, 1e-6, 1e-6)])
    def test_ode_residual_examples(self, t: float, h: float, limit: float) -> None:
        assert abs(g_ode_residual(t, h)) < limit

    @pytest.mark.parametrize("t", [0.3, 0.5, 0.7])
    def test_ode_residual_shrinks_at_least_quadratically(self, t: float) -> None:
        """Halving h cuts the residual by at least a factor of four."""
        coarse = abs(g_ode_residual(t, 0.08))
        fine = abs(g_ode_residual(t, 0.04))
        assert coarse > 1e-10
        assert fine <= coarse / 4.0

    def test_ode_residual_detects_wrong_function(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A perturbed G no longer satisfies the ODE."""
        import slepassage.special as special

        original = special.G
        monkeypatch.setattr(special, "G", lambda s: original(s) * 1.001)
        assert abs(special.g_ode_residual(0.4, 1e-5)) > 1e-6

    @pytest.mark.parametrize(("t", "h"), [(0.0, 1e-5), (1.0, 1e-5), (0.5, 0.0), (1e-6, 1e-5)])
    def test_ode_residual_domain(self, t: float, h: float) -> None:
        with pytest.raises(DomainError):
            g_ode_residual(t, h)

    @pytest.mark.parametrize("t", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_kummer_connection(self, t: float) -> None:
        assert abs(kummer_connection_residual(t)) < 1e-9

    def test_kummer_domain(self) -> None:
        with pytest.raises(DomainError):
            kummer_connection_residual(1.0)
