"""Closed-form SLE(8/3) passage, bubble and two-path probabilities.

Every function takes half-plane points as :class:`HalfPlanePoint`, Python
complex numbers or numpy complex arrays, and is vectorised: scalar input gives
a float, array input an array.

Conventions: z = x + iy, w = u + iv; Im(1/z) = -y/|z|^2 is kept with its sign
and the explicit minus signs of the published expressions are kept too. Every
probability passes through :func:`_probability`, which clamps float noise within
1e-12 of [0, 1] and raises on anything larger.

The touch-radius one-point function is obtained from the disk coefficient by
the same R-derivative that produces the two-point function:

    f1(z) = (4 R^3 / 5) d/dR [Im(J(z/R))^2 / (4 R^2)] at R = 1
          = (4/5) y^2 (1 - |z|^2) / |z|^2
          = (4/5) sin^2(arg z) (1 - |z|^2),

using Im J(z/R) = y (|z|^2 - R^2) / (R |z|^2). Its integral over the unit half-disk
is (4/5)(pi/2)(1/4) = pi/10.

The two-point area integrand is transcribed as published. With
sigma0 = sigma(J(z), J(w)) one has the closed form

    sigma0 = sigma(z, w) |1 - z w|^2 / |1 - z conj(w)|^2,

and the denominator 1 - 2(xu + yv) + |z|^2 |w|^2 equals |1 - z conj(w)|^2 > 0.
As w -> z both hypergeometric terms are damped (by sigma and by |z - w|^2) and
the integrand tends to f1(z).
"""

from __future__ import annotations

import math
import warnings
from typing import Any, Union

import numpy as np

from slepassage.errors import DomainError, ExpansionAccuracyWarning, InvariantViolationError
from slepassage.models import ComplexArray, FloatArray, HalfPlanePoint
from slepassage.registry import formula
from slepassage.special import C0, G, hyp2f1_complement

PointLike = Union[HalfPlanePoint, complex, ComplexArray]

PROBABILITY_TOL = 1e-12
AREA_TOL = 1e-9
DIAGONAL_TOL = 1e-12


def _as_complex(z: Any, name: str = "z", upper: bool = True) -> ComplexArray:
    if isinstance(z, HalfPlanePoint):
        arr = np.asarray(z.z, dtype=complex)
    else:
        arr = np.asarray(z, dtype=complex)
    if upper and (np.any(~np.isfinite(arr)) or np.any(arr.imag <= 0)):
        raise DomainError(f"{name} must lie in the upper half-plane (Im {name} > 0)")
    return arr


def _out(value: Any, *inputs: Any) -> Any:
    if all(np.ndim(i) == 0 for i in inputs):
        return float(value)
    return np.asarray(value, dtype=float)


def _probability(raw: Any, what: str, tol: float = PROBABILITY_TOL) -> FloatArray:
    arr = np.asarray(raw, dtype=float)
    bad = np.isnan(arr) | (arr < -tol) | (arr > 1.0 + tol)
    if np.any(bad):
        worst = arr[bad].flat[0]
        raise InvariantViolationError(f"{what} produced {worst!r}, outside [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def _in_disk(z: ComplexArray, R: float, name: str) -> None:
    if R <= 0:
        raise DomainError(f"R must be > 0, got {R}")
    if np.any(np.abs(z) >= R):
        raise DomainError(f"{name} must satisfy |{name}| < R = {R}")


def _sigma_any(z: ComplexArray, w: ComplexArray) -> FloatArray:
    """sigma on arbitrary complex pairs: |z - w|^2 / |z - conj(w)|^2."""
    dx = z.real - w.real
    num = dx**2 + (z.imag - w.imag) ** 2
    den = dx**2 + (z.imag + w.imag) ** 2
    return num / den


def _im_inv(z: ComplexArray) -> FloatArray:
    """Im(1/z) = -y / |z|^2."""
    return -z.imag / np.abs(z) ** 2


@formula(params=("z", "w"), points=("z", "w"))
def sigma(z: PointLike, w: PointLike) -> Any:
    """Two-point conformal invariant sigma = |z - w|^2 / |z - conj(w)|^2, in [0, 1)."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    return _out(_sigma_any(zc, wc), z, w)


@formula(params=("z", "eps"), points=("z",))
def mobius_f_eps(z: PointLike, eps: float) -> Any:
    """Mobius self-map F_eps(z) = z / (eps - z) of the half-plane sending eps to infinity."""
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    zc = _as_complex(z)
    image = zc / (eps - zc)
    if isinstance(z, HalfPlanePoint):
        return HalfPlanePoint.from_complex(complex(image))
    return complex(image) if np.ndim(z) == 0 else image


@formula(params=("z", "eps"), points=("z",))
def mobius_f_eps_inverse(z: PointLike, eps: float) -> Any:
    """Inverse Mobius map eps z / (z + 1)."""
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    zc = _as_complex(z)
    image = eps * zc / (zc + 1.0)
    if isinstance(z, HalfPlanePoint):
        return HalfPlanePoint.from_complex(complex(image))
    return complex(image) if np.ndim(z) == 0 else image


@formula(params=("z",), points=("z",))
def joukowsky(z: PointLike) -> Any:
    """Joukowsky map J(z) = z + 1/z (general complex result)."""
    zc = _as_complex(z, upper=False)
    if np.any(zc == 0):
        raise DomainError("joukowsky requires z != 0")
    image = zc + 1.0 / zc
    return complex(image) if np.ndim(z) == 0 else image


def _left_one(zc: ComplexArray) -> FloatArray:
    return 0.5 * (1.0 + zc.real / np.abs(zc))


@formula(params=("z",), points=("z",))
def left_passage_one(z: PointLike) -> Any:
    """Probability that the chordal path passes to the left of z: 1/2 + x / (2|z|)."""
    zc = _as_complex(z)
    return _out(_probability(_left_one(zc), "left_passage_one"), z)


def _left_two(zc: ComplexArray, wc: ComplexArray) -> FloatArray:
    # cos^2(arg/2) = (1 + x/|z|)/2 and sin(arg) = y/|z|
    sz = zc.imag / np.abs(zc)
    sw = wc.imag / np.abs(wc)
    return _left_one(zc) * _left_one(wc) + 0.25 * sz * sw * G(_sigma_any(zc, wc))


@formula(params=("z", "w"), points=("z", "w"))
def left_passage_two(z: PointLike, w: PointLike) -> Any:
    """Probability that the chordal path passes to the left of both z and w."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    return _out(_probability(_left_two(zc, wc), "left_passage_two"), z, w)


@formula(params=("z", "w"), points=("z", "w"))
def left_passage_two_cartesian(z: PointLike, w: PointLike) -> Any:
    """Two-point left passage in the (x, y, u, v) product form."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    x, y, rz = zc.real, zc.imag, np.abs(zc)
    u, v, rw = wc.real, wc.imag, np.abs(wc)
    raw = (
        (0.5 + x / (2 * rz))
        * (0.5 + u / (2 * rw))
        * (1.0 + (y / (x + rz)) * (v / (u + rw)) * G(_sigma_any(zc, wc)))
    )
    return _out(_probability(raw, "left_passage_two_cartesian"), z, w)


@formula(params=("z", "w"), points=("z", "w"))
def left_passage_ansatz(z: PointLike, w: PointLike) -> Any:
    """L(z)L(w) + sqrt(L(z)L(w)(1 - L(z))(1 - L(w))) G(sigma), the martingale observable."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    lz, lw = _left_one(zc), _left_one(wc)
    raw = lz * lw + np.sqrt(lz * lw * (1.0 - lz) * (1.0 - lw)) * G(_sigma_any(zc, wc))
    return _out(_probability(raw, "left_passage_ansatz"), z, w)


@formula(params=("a", "b"), points=("a", "b"))
def separation_probability(a: PointLike, b: PointLike) -> Any:
    """Probability that the path passes between a and b: L(a) + L(b) - 2 L(a, b)."""
    ac, bc = _as_complex(a, "a"), _as_complex(b, "b")
    raw = _left_one(ac) + _left_one(bc) - 2.0 * _left_two(ac, bc)
    return _out(_probability(raw, "separation_probability"), a, b)


@formula(params=("z",), points=("z",))
def green_limit(z: PointLike) -> Any:
    """Limit of eps^(-2/3) times the separation probability of z -+ eps eta: c0 y^(-2/3) sin^2(arg z)."""
    zc = _as_complex(z)
    sin2 = (zc.imag / np.abs(zc)) ** 2
    return _out(C0 * zc.imag ** (-2.0 / 3.0) * sin2, z)


@formula(params=("z",), points=("z",))
def bubble_one_point_coeff(z: PointLike) -> Any:
    """eps^2-coefficient of the probability that the eps-bubble contains z: Im(1/z)^2 / 4."""
    zc = _as_complex(z)
    return _out(0.25 * _im_inv(zc) ** 2, z)


@formula(params=("z", "w"), points=("z", "w"))
def bubble_two_point_coeff(z: PointLike, w: PointLike) -> Any:
    """eps^2-coefficient of the probability that the eps-bubble contains z and w."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    return _out(0.25 * _im_inv(zc) * _im_inv(wc) * G(_sigma_any(zc, wc)), z, w)


def _im_joukowsky(zc: ComplexArray, R: float) -> FloatArray:
    return (zc / R + R / zc).imag


@formula(params=("z", "R"), points=("z",))
def bubble_in_disk_one_coeff(z: PointLike, R: float) -> Any:
    """eps^2-coefficient of the probability that the eps-bubble stays in D_R and contains z."""
    zc = _as_complex(z)
    _in_disk(zc, R, "z")
    return _out(_im_joukowsky(zc, R) ** 2 / (4.0 * R**2), z)


def _disk_sigma(zc: ComplexArray, wc: ComplexArray, R: float) -> FloatArray:
    return _sigma_any(zc / R + R / zc, wc / R + R / wc)


@formula(params=("z", "w", "R"), points=("z", "w"))
def bubble_in_disk_two_coeff(z: PointLike, w: PointLike, R: float) -> Any:
    """eps^2-coefficient of the probability that the eps-bubble stays in D_R and contains z and w."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    _in_disk(zc, R, "z")
    _in_disk(wc, R, "w")
    raw = _im_joukowsky(zc, R) * _im_joukowsky(wc, R) * G(_disk_sigma(zc, wc, R))
    return _out(raw / (4.0 * R**2), z, w)


@formula(params=("z", "w", "R"), points=("z", "w"))
def sigma_disk(z: PointLike, w: PointLike, R: float) -> Any:
    """sigma(J(z/R), J(w/R)) in closed form: sigma(z, w) |R^2 - zw|^2 / |R^2 - z conj(w)|^2."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    _in_disk(zc, R, "z")
    _in_disk(wc, R, "w")
    ratio = np.abs(R**2 - zc * wc) ** 2 / np.abs(R**2 - zc * np.conj(wc)) ** 2
    return _out(_sigma_any(zc, wc) * ratio, z, w)


@formula(params=("R", "delta", "eps"))
def bubble_escape_expansion(R: float, delta: float, eps: float) -> float:
    """Probability that an eps-bubble stays inside D_{R+delta}, to order eps^2.

    :param R: Radius, R > 0
    :param delta: Radius increment, delta >= 0
    :param eps: Bubble endpoint, 0 < eps << R
    :return: 1 - (5/8) eps^2 / R^2 + (5/4) eps^2 delta / R^3
    """
    if R <= 0 or eps <= 0 or delta < 0:
        raise DomainError("bubble_escape_expansion requires R > 0, eps > 0 and delta >= 0")
    if eps / R > 0.1:
        warnings.warn(
            f"eps/R = {eps / R:.3g} > 0.1; the truncated expansion is unreliable",
            ExpansionAccuracyWarning,
            stacklevel=2,
        )
    return 1.0 - 0.625 * eps**2 / R**2 + 1.25 * eps**2 * delta / R**3


@formula(params=("z", "w"), points=("z", "w"))
def bulk_containment(z: PointLike, w: PointLike) -> Any:
    """Probability that z lies in the SLE(8/3) bubble with bulk point w."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    raw = _im_inv(zc) / _im_inv(wc) * G(_sigma_any(zc, wc))
    return _out(_probability(raw, "bulk_containment"), z, w)


@formula(params=("r", "z"), points=("z",))
def radius_cdf(r: Any, z: PointLike) -> Any:
    """Distribution function P(R_z <= r) = (1 - |z|^2 / r^2)^2 for r >= |z|, else 0."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr <= 0):
        raise DomainError("radius_cdf requires r > 0")
    m2 = np.abs(_as_complex(z)) ** 2
    value = np.where(rr <= np.sqrt(m2), 0.0, (1.0 - m2 / rr**2) ** 2)
    return _out(value, r, z)


@formula(params=("r", "z"), points=("z",))
def radius_density(r: Any, z: PointLike) -> Any:
    """Density 4 (1 - |z|^2 / r^2) |z|^2 / r^3 of the bubble radius, zero below |z|."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr <= 0):
        raise DomainError("radius_density requires r > 0")
    m2 = np.abs(_as_complex(z)) ** 2
    value = np.where(rr <= np.sqrt(m2), 0.0, 4.0 * (1.0 - m2 / rr**2) * m2 / rr**3)
    return _out(value, r, z)


@formula(params=("z",), points=("z",))
def expected_radius(z: PointLike) -> Any:
    """Mean bubble radius (8/3)|z|."""
    return _out(8.0 / 3.0 * np.abs(_as_complex(z)), z)


@formula(params=("z", "w", "R"), points=("z", "w"))
def bulk_containment_in_disk(z: PointLike, w: PointLike, R: float) -> Any:
    """Probability that z lies in the bubble with bulk point w conditioned to stay in D_R."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    _in_disk(zc, R, "z")
    _in_disk(wc, R, "w")
    raw = _im_joukowsky(zc, R) / _im_joukowsky(wc, R) * G(_disk_sigma(zc, wc, R))
    return _out(_probability(raw, "bulk_containment_in_disk"), z, w)


def _in_half_disk(zc: ComplexArray, name: str) -> None:
    if np.any(np.abs(zc) >= 1.0):
        raise DomainError(f"{name} must lie in the open unit half-disk (|{name}| < 1)")


def _touch_one(zc: ComplexArray) -> FloatArray:
    m2 = np.abs(zc) ** 2
    return 0.8 * zc.imag**2 * (1.0 - m2) / m2


@formula(params=("z",), points=("z",))
def touch_radius_one_point(z: PointLike) -> Any:
    """Probability that z lies in the bubble conditioned to have radius 1: (4/5) sin^2(arg z)(1 - |z|^2)."""
    zc = _as_complex(z)
    _in_half_disk(zc, "z")
    return _out(_touch_one(zc), z)


@formula(params=("z", "w"), points=("z", "w"))
def area_integrand(z: PointLike, w: PointLike, check: bool = True) -> Any:
    """Probability that z and w both lie in the bubble conditioned to touch the unit circle.

    :param z: Point of the open unit half-disk
    :param w: Point of the open unit half-disk
    :param check: Raise on values outside [-1e-9, 1 + 1e-9] and clamp; ``False`` returns raw values
    :return: f(z, w); pairs closer than 1e-12 get the diagonal limit f1(z)
    """
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    _in_half_disk(zc, "z")
    _in_half_disk(wc, "w")
    zc, wc = np.broadcast_arrays(zc, wc)
    shape = zc.shape
    zc, wc = zc.ravel(), wc.ravel()

    out = np.empty(zc.shape, dtype=float)
    diagonal = np.abs(zc - wc) < DIAGONAL_TOL
    out[diagonal] = _touch_one(zc[diagonal])

    off = ~diagonal
    if np.any(off):
        zo, wo = zc[off], wc[off]
        x, y, u, v = zo.real, zo.imag, wo.real, wo.imag
        a = np.abs(zo) ** 2
        b = np.abs(wo) ** 2
        dist2 = (x - u) ** 2 + (y - v) ** 2
        s = _sigma_any(zo, wo)
        den = 1.0 - 2.0 * (x * u + y * v) + a * b
        s0 = s * (1.0 - 2.0 * (x * u - y * v) + a * b) / den
        big_a = 2.0 * s * (1.0 - a) * (1.0 - b) * (x * u - y * v - a * b) * hyp2f1_complement(
            1.0, 4.0 / 3.0, 5.0 / 3.0, s0
        ) + s0 * dist2 * (1.0 - a * b) * hyp2f1_complement(4.0 / 3.0, 2.0, 5.0 / 3.0, s0)
        out[off] = 2.0 * y * v / (5.0 * a * b) * (a + b - 2.0 * a * b - big_a / den)

    if check:
        bad = np.isnan(out) | (out < -AREA_TOL) | (out > 1.0 + AREA_TOL)
        if np.any(bad):
            raise InvariantViolationError(
                f"area_integrand produced {out[bad][0]!r}, outside [-1e-9, 1 + 1e-9]"
            )
        out = np.clip(out, 0.0, 1.0)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


@formula(params=("z", "w"), points=("z", "w"))
def two_path_two_point(z: PointLike, w: PointLike) -> Any:
    """Probability that z and w lie between two commuting SLE(8/3) paths."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    raw = -0.4 * (zc.imag * _im_inv(wc) + _im_inv(zc) * wc.imag) * G(_sigma_any(zc, wc))
    return _out(_probability(raw, "two_path_two_point"), z, w)


@formula(params=("z",), points=("z",))
def two_path_one_point(z: PointLike) -> Any:
    """Probability that z lies between two commuting SLE(8/3) paths: (4/5) sin^2(arg z)."""
    zc = _as_complex(z)
    raw = -0.8 * zc.imag * _im_inv(zc)
    return _out(_probability(raw, "two_path_one_point"), z)


@formula(params=("z", "w"), points=("z", "w"))
def two_path_in_not_in(z: PointLike, w: PointLike) -> Any:
    """Probability that z but not w lies between two commuting SLE(8/3) paths."""
    zc, wc = _as_complex(z, "z"), _as_complex(w, "w")
    one = -0.8 * zc.imag * _im_inv(zc)
    two = -0.4 * (zc.imag * _im_inv(wc) + _im_inv(zc) * wc.imag) * G(_sigma_any(zc, wc))
    return _out(_probability(one - two, "two_path_in_not_in"), z, w)


def airy_ratio() -> float:
    """E[A^2] / E[A]^2 = 10 / (3 pi) under the Airy hypothesis."""
    return 10.0 / (3.0 * math.pi)
