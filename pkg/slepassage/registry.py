"""Registry of evaluable formulas.

The ``@formula`` decorator records a function under a public name together with
the names of the parameters the command line has to supply. It stores metadata
but does not alter function behaviour.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, TypeVar

F = TypeVar("F", bound=Callable[..., Any])


@dataclass(frozen=True)
class FormulaSpec:
    """Metadata of a registered formula.

    :param name: Public name used by ``slepassage eval``
    :param func: The registered function
    :param params: Parameter names in call order
    :param points: Names of the parameters that are half-plane points
    :param description: First line of the function docstring
    :param defaults: Default values for optional parameters
    """

    name: str
    func: Callable[..., Any]
    params: tuple[str, ...]
    points: tuple[str, ...] = ()
    description: str = ""
    defaults: tuple[tuple[str, Any], ...] = ()

    def required(self) -> tuple[str, ...]:
        optional = {key for key, _ in self.defaults}
        return tuple(p for p in self.params if p not in optional)

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.func(*args, **kwargs)


# Format: {name: FormulaSpec}
_formula_registry: dict[str, FormulaSpec] = {}


def get_formula_registry() -> dict[str, FormulaSpec]:
    """Get the global formula registry, importing the formula modules first.

    :return: Dictionary mapping formula names to their specs
    """
    # Registration happens at import time of these modules.
    import slepassage.formulas  # noqa: F401
    import slepassage.special  # noqa: F401

    return _formula_registry


def formula(
    params: tuple[str, ...],
    points: tuple[str, ...] = (),
    name: str | None = None,
    defaults: dict[str, Any] | None = None,
) -> Callable[[F], F]:
    """Decorator to register a function as an evaluable formula.

    :param params: Parameter names, in call order
    :param points: Which of ``params`` are half-plane points (given as ``a+bi``)
    :param name: Registry name (defaults to the function name)
    :param defaults: Default values for trailing optional parameters
    :return: Decorator returning the function unchanged

    Example::

        @formula(params=("z",), points=("z",))
        def left_passage_one(z):
            ...
    """

    def decorator(func: F) -> F:
        key = name or func.__name__
        doc = (func.__doc__ or "").strip().splitlines()
        _formula_registry[key] = FormulaSpec(
            name=key,
            func=func,
            params=params,
            points=points,
            description=doc[0] if doc else "",
            defaults=tuple((defaults or {}).items()),
        )
        return func

    return decorator
