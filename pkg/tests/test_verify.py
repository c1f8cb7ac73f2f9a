"""Tests for the invariant suite."""

import pytest

from slepassage import formulas
from slepassage.errors import ConvergenceError
from slepassage.verify import CheckMessage, InvariantSuite


class TestCheckMessage:
    """Tests for check results."""

    def test_passed(self) -> None:
        assert CheckMessage(severity="info", message="ok").passed
        assert not CheckMessage(severity="error", message="bad").passed


class TestQuickSuite:
    """Tests for the sub-second subset."""

    def test_all_pass(self) -> None:
        messages = InvariantSuite(quick=True).run()
        failed = [f"{m.check}: {m.message}" for m in messages if not m.passed]
        assert failed == []

    def test_names_and_order(self) -> None:
        names = [m.check for m in InvariantSuite(quick=True).run()]
        assert names[0] == "hyp2f1_scipy"
        assert "green_limit" in names
        assert "radius_law" not in names
        assert len(names) == len(set(names))
        assert {"hyp2f1_symmetry", "factorisation", "area_symmetry", "flow_invariants"} <= set(names)

    def test_perturbed_constant_detected(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Scaling c0 by 1.01 in the Green limit breaks that check and only that check."""
        monkeypatch.setattr(formulas, "C0", formulas.C0 * 1.01)
        messages = {m.check: m for m in InvariantSuite(quick=True).run()}
        assert not messages["green_limit"].passed
        assert all(m.passed for name, m in messages.items() if name != "green_limit")

    def test_raising_check_reported_as_failure(self, monkeypatch: pytest.MonkeyPatch) -> None:
        def broken(self: InvariantSuite) -> CheckMessage:
            raise ConvergenceError("series stalled")

        broken.__name__ = "_check_kummer"
        monkeypatch.setattr(InvariantSuite, "_check_kummer", broken)
        messages = {m.check: m for m in InvariantSuite(quick=True).run()}
        assert not messages["kummer"].passed
        assert "ConvergenceError" in messages["kummer"].message

    def test_broken_factorisation_detected(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A joint probability that keeps a correlation at the real axis fails the limit check."""
        original = formulas._left_two
        monkeypatch.setattr(formulas, "_left_two", lambda z, w: original(z, w) + 1e-6)
        messages = {m.check: m for m in InvariantSuite(quick=True).run()}
        assert not messages["factorisation"].passed

    def test_broken_mobius_map_detected(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A self-map of the half-plane that is not Mobius moves sigma."""
        monkeypatch.setattr(formulas, "mobius_f_eps", lambda z, eps: z + 0.1 * z * z.imag)
        messages = {m.check: m for m in InvariantSuite(quick=True).run()}
        assert not messages["mobius"].passed


class TestFullSuite:
    """Tests for the complete suite, including integrals and scans."""

    def test_all_pass(self) -> None:
        messages = InvariantSuite().run()
        failed = [f"{m.check}: {m.message}" for m in messages if not m.passed]
        assert failed == []
        assert {"radius_law", "first_moment", "integrand_scan"} <= {m.check for m in messages}
        assert {"probability_range", "outcome_tallies", "second_moment"} <= {m.check for m in messages}
