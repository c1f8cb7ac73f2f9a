"""Gauss hypergeometric function, Gamma values and the correlation factor G.

All functions are pure and vectorised over the argument ``x`` (or ``sigma``);
scalar input returns a Python float.

``hyp2f1`` sums the power series directly for |x| <= 0.5. For 0.5 < x <= 1 it
uses the x -> 1 - x connection formula

    2F1(a,b;c;x) = A1 2F1(a, b; a+b-c+1; 1-x) + A2 (1-x)^(c-a-b) 2F1(c-a, c-b; c-a-b+1; 1-x),

    A1 = G(c)G(c-a-b) / (G(c-a)G(c-b)),  A2 = G(c)G(a+b-c) / (G(a)G(b)),

which needs c - a - b to be a non-integer; otherwise the direct series is used
up to the iteration cap.

``G`` never evaluates a divergent series. For sigma >= 0.5 it uses the
telescoped form G = ((1-sigma)/5) 2F1(1, 4/3; 8/3; 1-sigma), which is free of the
cancellation in 1 - sigma 2F1(1, 4/3; 5/3; 1-sigma) near sigma = 1. For
sigma < 0.5 the connection formula (with A1 = -1, A2 = K) gives

    G = 1 + sigma 2F1(1, 4/3; 5/3; sigma) - K sigma^(1/3) (1-sigma)^(-2/3),

with K = G(2/3)G(5/3)/G(4/3) = 2 c0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import special as sp

from slepassage.errors import ConvergenceError, DivergenceError, DomainError
from slepassage.models import FloatArray
from slepassage.registry import formula

DEFAULT_TOL = 1e-12
MAX_TERMS = 10_000
X_SWITCH = 0.5


@dataclass(frozen=True)
class Hyp2F1Query:
    """Parameters and argument of 2F1(a, b; c; x)."""

    a: float
    b: float
    c: float
    x: float | FloatArray

    def __post_init__(self) -> None:
        if self.c <= 0 and float(self.c).is_integer():
            raise DomainError(f"c must not be zero or a negative integer, got c = {self.c}")
        x = np.asarray(self.x, dtype=float)
        if np.any(~np.isfinite(x)):
            raise DomainError("x must be finite")
        if np.any(x > 1.0):
            raise DomainError(f"x must satisfy x <= 1, got max x = {float(np.max(x))}")
        if np.any(x < -X_SWITCH):
            raise DomainError(f"x must satisfy x >= -{X_SWITCH}, got min x = {float(np.min(x))}")

    @property
    def excess(self) -> float:
        """c - a - b."""
        return self.c - self.a - self.b


def _scalarize(value: FloatArray, like: Any) -> float | FloatArray:
    return float(value) if np.ndim(like) == 0 else value


@formula(params=("x",))
def gamma_fn(x: float | FloatArray) -> float | FloatArray:
    """Gamma function for positive arguments.

    :param x: Positive real argument(s)
    :return: Gamma(x)
    :raises DomainError: If any x <= 0
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError(f"gamma_fn requires x > 0, got min x = {float(np.min(arr))}")
    return _scalarize(sp.gamma(arr), x)


C0 = float(sp.gamma(2.0 / 3.0) * sp.gamma(5.0 / 3.0) / (2.0 * sp.gamma(4.0 / 3.0)))
K_CONNECTION = 2.0 * C0


def _series(
    a: float,
    b: float,
    c: float,
    x: FloatArray,
    tol: float = DEFAULT_TOL,
    max_terms: int = MAX_TERMS,
) -> FloatArray:
    """Direct power series of 2F1.

    Summation stops once the geometric bound ``|term| rho / (1 - rho)`` on the
    remaining tail is within ``tol * max(1, |partial sum|)`` for every element,
    where ``rho = |x| * max(1, next term ratio)`` bounds all later term ratios.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(max_terms):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1.0))) * x
        total = total + term
        ratio = abs((a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2.0)))
        rho = ax * max(1.0, ratio)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(rho < 1.0, np.abs(term) * rho / (1.0 - rho), np.inf)
        tail = np.where(term == 0.0, 0.0, tail)
        if np.all(tail <= tol * np.maximum(1.0, np.abs(total))):
            return total
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; x) series did not reach tol={tol} within {max_terms} terms"
    )


def _connection(q: Hyp2F1Query, u: FloatArray, tol: float) -> FloatArray:
    """Evaluate 2F1 at x = 1 - u, 0 < u < 0.5, through the connection formula.

    Taking u rather than x keeps full relative precision when u is below
    machine epsilon.
    """
    a, b, c, s = q.a, q.b, q.c, q.excess
    a1 = sp.gamma(c) * sp.gamma(s) * sp.rgamma(c - a) * sp.rgamma(c - b)
    a2 = sp.gamma(c) * sp.gamma(-s) * sp.rgamma(a) * sp.rgamma(b)
    first = a1 * _series(a, b, 1.0 - s, u, tol) if a1 != 0 else 0.0
    second = a2 * u**s * _series(c - a, c - b, 1.0 + s, u, tol) if a2 != 0 else 0.0
    return np.asarray(first + second, dtype=float)


@formula(params=("a", "b", "c", "x"), name="hyp2f1", defaults={"tol": DEFAULT_TOL})
def hyp2f1(
    a: float,
    b: float,
    c: float,
    x: float | FloatArray,
    tol: float = DEFAULT_TOL,
) -> float | FloatArray:
    """Gauss hypergeometric function 2F1(a, b; c; x) for real x in [-0.5, 1].

    :param a: First numerator parameter
    :param b: Second numerator parameter
    :param c: Denominator parameter (not zero or a negative integer)
    :param x: Argument(s)
    :param tol: Absolute tolerance of the series tails
    :return: 2F1 value(s)
    :raises DomainError: On invalid parameters or arguments
    :raises DivergenceError: If x = 1 and c - a - b <= 0
    :raises ConvergenceError: If a series exceeds the iteration cap
    """
    if tol <= 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    q = Hyp2F1Query(a, b, c, x)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)

    at_one = xs == 1.0
    if np.any(at_one):
        if q.excess <= 0:
            raise DivergenceError(
                f"2F1({a}, {b}; {c}; 1) diverges because c - a - b = {q.excess} <= 0"
            )
        out[at_one] = sp.gamma(c) * sp.gamma(q.excess) * sp.rgamma(c - a) * sp.rgamma(c - b)

    near = np.abs(xs) <= X_SWITCH
    if np.any(near):
        out[near] = _series(a, b, c, xs[near], tol)

    far = ~near & ~at_one
    if np.any(far):
        if float(q.excess).is_integer():
            out[far] = _series(a, b, c, xs[far], tol)
        else:
            out[far] = _connection(q, 1.0 - xs[far], tol)

    return _scalarize(out.reshape(np.shape(x)), x)


def hyp2f1_complement(
    a: float,
    b: float,
    c: float,
    s: float | FloatArray,
    tol: float = DEFAULT_TOL,
) -> float | FloatArray:
    """2F1(a, b; c; 1 - s) evaluated from s itself, for 0 < s <= 1.5.

    Used where s is a tiny conformal invariant: 1 - s would round to 1 and
    the direct call would report divergence.

    :param a: First numerator parameter
    :param b: Second numerator parameter
    :param c: Denominator parameter; c - a - b must not be an integer
    :param s: Complement(s) of the argument
    :param tol: Absolute tolerance of the series tails
    :return: 2F1 value(s)
    """
    q = Hyp2F1Query(a, b, c, 0.0)
    if float(q.excess).is_integer():
        raise DomainError(f"hyp2f1_complement requires non-integer c - a - b, got {q.excess}")
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(ss <= 0.0) or np.any(ss > 1.0 + X_SWITCH):
        raise DomainError("hyp2f1_complement requires 0 < s <= 1.5")
    out = np.empty_like(ss)
    small = ss < X_SWITCH
    if np.any(small):
        out[small] = _connection(q, ss[small], tol)
    if np.any(~small):
        out[~small] = _series(a, b, c, 1.0 - ss[~small], tol)
    return _scalarize(out.reshape(np.shape(s)), s)


@formula(params=("sigma",), name="G")
def G(sigma: float | FloatArray) -> float | FloatArray:
    """Correlation factor G(sigma) = 1 - sigma 2F1(1, 4/3; 5/3; 1 - sigma).

    :param sigma: Value(s) in [0, 1]
    :return: G(sigma), with G(0) = 1 and G(1) = 0 exactly
    :raises DomainError: If sigma lies outside [0, 1]
    """
    s = np.atleast_1d(np.asarray(sigma, dtype=float))
    if np.any(~np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise DomainError("G requires 0 <= sigma <= 1")
    out = np.empty_like(s)

    upper = s >= X_SWITCH
    if np.any(upper):
        t = 1.0 - s[upper]
        out[upper] = t / 5.0 * _series(1.0, 4.0 / 3.0, 8.0 / 3.0, t)

    lower = ~upper
    if np.any(lower):
        sl = s[lower]
        out[lower] = (
            1.0
            + sl * _series(1.0, 4.0 / 3.0, 5.0 / 3.0, sl)
            - K_CONNECTION * np.cbrt(sl) * (1.0 - sl) ** (-2.0 / 3.0)
        )
        out[lower & (s == 0.0)] = 1.0

    return _scalarize(out.reshape(np.shape(sigma)), sigma)


def _derivative(t: float, h: float) -> float:
    def central(step: float) -> float:
        return (G(t + step) - G(t - step)) / (2.0 * step)

    # one Richardson step removes the h**2 term of the central difference
    return (4.0 * central(h / 2.0) - central(h)) / 3.0


@formula(params=("t", "h"))
def g_ode_residual(t: float, h: float) -> float:
    """Residual t - 1 + (t + 1) G(t) - 3 t (1 - t) G'(t) of the hypergeometric ODE.

    G' is a Richardson-refined central difference with steps h and h/2.

    :param t: Point in (0, 1)
    :param h: Step with 0 < h < min(t, 1 - t)
    :return: The residual (zero for the exact G)
    """
    if not 0.0 < t < 1.0:
        raise DomainError(f"g_ode_residual requires 0 < t < 1, got t = {t}")
    if not 0.0 < h < min(t, 1.0 - t):
        raise DomainError(f"g_ode_residual requires 0 < h < min(t, 1 - t), got h = {h}")
    return float(t - 1.0 + (t + 1.0) * G(t) - 3.0 * t * (1.0 - t) * _derivative(t, h))


@formula(params=("t",))
def kummer_connection_residual(t: float) -> float:
    """Residual of 2F1(1/3, 2/3; 5/3; t) = -(1-t)^(2/3) 2F1(4/3, 1; 5/3; 1-t) + K t^(-2/3).

    :param t: Point in (0, 1)
    :return: Left side minus right side
    """
    if not 0.0 < t < 1.0:
        raise DomainError(f"kummer_connection_residual requires 0 < t < 1, got t = {t}")
    lhs = hyp2f1(1.0 / 3.0, 2.0 / 3.0, 5.0 / 3.0, t)
    rhs = -((1.0 - t) ** (2.0 / 3.0)) * hyp2f1(4.0 / 3.0, 1.0, 5.0 / 3.0, 1.0 - t)
    rhs += K_CONNECTION * t ** (-2.0 / 3.0)
    return float(lhs - rhs)
