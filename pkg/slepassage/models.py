from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from typing import Any

import numpy as np
import numpy.typing as npt

from slepassage.errors import DomainError

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
IntArray = npt.NDArray[np.int8]


@dataclass(frozen=True)
class HalfPlanePoint:
    """A point z = x + iy of the upper half-plane (y > 0)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"point must be finite, got {self.x}+{self.y}i")
        if self.y <= 0:
            raise DomainError(f"point must satisfy y > 0, got y = {self.y}")

    def __complex__(self) -> complex:
        return complex(self.x, self.y)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> HalfPlanePoint:
        return cls(float(z.real), float(z.imag))

    @classmethod
    def parse(cls, text: str) -> HalfPlanePoint:
        """Parse an ``a+bi`` string such as ``-0.5+1i`` or ``2i``.

        :param text: Point in ``a+bi`` notation
        :return: The parsed point
        :raises DomainError: If the text is not a complex number in the upper half-plane
        """
        cleaned = text.strip().replace(" ", "")
        if cleaned.endswith("i"):
            # a bare unit such as "1+i" or "-i" needs its coefficient spelled out
            head = cleaned[:-1]
            if head in ("", "+", "-") or head[-1] in "+-":
                head += "1"
            cleaned = head + "j"
        try:
            value = complex(cleaned)
        except ValueError:
            raise DomainError(f"cannot parse point {text!r}; expected a+bi") from None
        return cls.from_complex(value)

    def __str__(self) -> str:
        return f"{self.x:g}{self.y:+g}i"


@dataclass(frozen=True)
class SimConfig:
    """Discretisation and decision parameters of the Loewner flow simulation.

    :param kappa: SLE parameter
    :param dt: Initial capacity step dt0
    :param growth: Geometric step growth c in dt_k = max(dt0, c * t_k); 0 gives a uniform grid
    :param t_max: Capacity horizon
    :param ratio_threshold: Decision threshold M on |x_t| / y_t
    :param y_min: Imaginary part below which a point counts as swallowed
    :param seed: Root seed of all driver streams
    :param refine_ratio: A step is bisected along a Brownian bridge while some active point
        lies within squared distance ``refine_ratio * kappa * dt_k`` of the tip; 0 disables
    :param max_refine_depth: Maximum number of bisections of one capacity step
    """

    kappa: float = 8.0 / 3.0
    dt: float = 1e-4
    growth: float = 0.01
    t_max: float = 1e4
    ratio_threshold: float = 50.0
    y_min: float = 1e-12
    seed: int = 0
    refine_ratio: float = 100.0
    max_refine_depth: int = 20

    def __post_init__(self) -> None:
        if self.kappa <= 0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")
        if self.dt <= 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.growth < 0:
            raise DomainError(f"growth must be >= 0, got {self.growth}")
        if self.t_max <= 0:
            raise DomainError(f"t_max must be > 0, got {self.t_max}")
        if self.ratio_threshold < 10:
            raise DomainError(f"ratio_threshold must be >= 10, got {self.ratio_threshold}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.refine_ratio < 0:
            raise DomainError(f"refine_ratio must be >= 0, got {self.refine_ratio}")
        if not 0 <= self.max_refine_depth <= 40:
            raise DomainError(f"max_refine_depth must lie in [0, 40], got {self.max_refine_depth}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class DriverPath:
    """A batch of discretised driving paths sqrt(kappa) * B sharing one capacity grid.

    ``increments[p, k]`` is the driving increment of path ``p`` over step ``k``,
    distributed Normal(0, kappa * steps[k]).
    """

    steps: FloatArray
    increments: FloatArray
    seed: int
    shard: int = 0

    @property
    def n_steps(self) -> int:
        return int(self.steps.shape[0])

    @property
    def n_paths(self) -> int:
        return int(self.increments.shape[0])

    @property
    def times(self) -> FloatArray:
        """Capacity times at the end of each step."""
        return np.cumsum(self.steps)

    def rescaled(self, lam: float) -> DriverPath:
        """Brownian rescaling: time by lam**2, space by lam."""
        return DriverPath(
            steps=self.steps * lam**2,
            increments=self.increments * lam,
            seed=self.seed,
            shard=self.shard,
        )


@dataclass(frozen=True)
class FlowState:
    x: float
    y: float
    t: float
    blown_up: bool = False


class PassageOutcome(IntEnum):
    RIGHT = -1
    UNDECIDED = 0
    LEFT = 1


@dataclass
class Estimate:
    """A Monte Carlo estimate with its undecided bracket.

    :param mean: Point estimate (decided-only frequency, or sample mean)
    :param std_error: Standard error of the mean
    :param n: Number of samples
    :param n_undecided: Samples left undecided at the horizon
    :param bracket_low: Estimate with every undecided sample counted against the event
    :param bracket_high: Estimate with every undecided sample counted for the event
    """

    mean: float
    std_error: float
    n: int
    n_undecided: int = 0
    bracket_low: float = math.nan
    bracket_high: float = math.nan

    def __post_init__(self) -> None:
        if math.isnan(self.bracket_low):
            self.bracket_low = self.mean
        if math.isnan(self.bracket_high):
            self.bracket_high = self.mean

    @property
    def undecided_fraction(self) -> float:
        return self.n_undecided / self.n if self.n else 0.0

    def z_score(self, target: float) -> float:
        """Distance of ``target`` from the bracket in units of the standard error.

        Zero when the target lies inside the bracket.
        """
        if self.bracket_low <= target <= self.bracket_high:
            return 0.0
        gap = target - self.bracket_high if target > self.bracket_high else target - self.bracket_low
        # summation rounding of identical samples
        if abs(gap) <= 1e-12 * max(1.0, abs(target)):
            return 0.0
        if self.std_error == 0:
            return math.copysign(math.inf, gap)
        return gap / self.std_error


@dataclass
class ExperimentRecord:
    experiment_id: str
    kind: str
    config: SimConfig
    points: list[HalfPlanePoint]
    formula: str
    estimate: Estimate
    formula_value: float
    z_score: float
    wall_clock: float
    code_version: str
    n_samples: int
    time: float | None = None
    halved_estimate: Estimate | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return abs(self.z_score) <= 3.0


@dataclass
class IntegralResult:
    value: float
    error_estimate: float
    n_evaluations: int
    method: str
    region: str = "D+"
    seed: int | None = None
    budget: int | None = None


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict[str, Any]
    argv: list[str]
    seeds: list[int]
    outputs: list[str]
    code_version: str
    timestamp: str
