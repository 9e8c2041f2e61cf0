"""External fields ``v`` and perturbations ``dv``, each with its derivative."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = ["PotentialError", "Field", "PotentialSpec", "Perturbation"]

Func = Callable[[np.ndarray], np.ndarray]


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    """A smooth real function together with its derivative.

    ``description`` is a JSON-friendly record of how the field was built, used
    for serialization; it is ``None`` for ad hoc callables.
    """

    value: Func = field(repr=False)
    derivative: Func = field(repr=False)
    description: dict[str, Any] | None = None

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def d(self, x):
        return self.derivative(np.asarray(x, dtype=float))

    def scaled(self, c: float):
        desc = None
        if self.description is not None:
            desc = {"form": "scaled", "factor": float(c), "field": self.description}
        return type(self)(lambda x: c * self.value(x), lambda x: c * self.derivative(x), desc)

    def plus(self, other: "Field", eps: float = 1.0):
        """``self + eps * other``; keeps the type of ``self``."""
        desc = None
        if self.description is not None and other.description is not None:
            desc = {"form": "sum", "terms": [self.description, other.description],
                    "weights": [1.0, float(eps)]}
        return _replace(self, lambda x: self.value(x) + eps * other.value(x),
                        lambda x: self.derivative(x) + eps * other.derivative(x), desc)

    @staticmethod
    def _polynomial_parts(coeffs):
        c = np.asarray(coeffs, dtype=float)
        dc = P.polyder(c) if c.size > 1 else np.zeros(1)
        return (lambda x: P.polyval(x, c)), (lambda x: P.polyval(x, dc))


def _replace(obj: Field, value: Func, derivative: Func, desc):
    new = object.__new__(type(obj))
    object.__setattr__(new, "value", value)
    object.__setattr__(new, "derivative", derivative)
    object.__setattr__(new, "description", desc)
    return new


class PotentialSpec(Field):
    """Confining external field.

    Polynomials must have even degree ``>= 2`` and positive leading
    coefficient; the solver refuses anything else.
    """

    @classmethod
    def polynomial(cls, coeffs) -> "PotentialSpec":
        """From ascending coefficients, e.g. ``[0, 0, 0.5]`` for ``x^2/2``."""
        c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        deg = c.size - 1
        if deg < 2 or deg % 2 or c[-1] <= 0:
            raise PotentialError(
                f"polynomial potential must have even degree >= 2 and positive leading "
                f"coefficient (got degree {deg}, leading {c[-1] if c.size else 0})"
            )
        v, dv = cls._polynomial_parts(c)
        return cls(v, dv, {"form": "polynomial", "coeffs": c.tolist()})

    @classmethod
    def from_description(cls, desc: dict) -> "PotentialSpec":
        if desc.get("form") == "polynomial":
            return cls.polynomial(desc["coeffs"])
        if desc.get("form") == "sum":
            base, pert = desc["terms"]
            _, eps = desc["weights"]
            return cls.from_description(base).plus(Perturbation.from_description(pert), eps)
        if desc.get("form") == "scaled":
            factor = float(desc["factor"])
            if factor <= 0:
                raise PotentialError("a confining potential can only be scaled by a positive factor")
            return cls.from_description(desc["field"]).scaled(factor)
        raise PotentialError(f"unknown potential form: {desc.get('form')!r}")


class Perturbation(Field):
    """Variation ``dv`` of the external field."""

    @classmethod
    def polynomial(cls, coeffs) -> "Perturbation":
        c = np.asarray(coeffs, dtype=float)
        v, dv = cls._polynomial_parts(c)
        return cls(v, dv, {"form": "polynomial", "coeffs": c.tolist()})

    @classmethod
    def constant(cls, c: float) -> "Perturbation":
        return cls(lambda x: np.full(np.shape(x), float(c)), lambda x: np.zeros(np.shape(x)),
                   {"form": "constant", "value": float(c)})

    @classmethod
    def gaussian(cls, center: float, width: float, amplitude: float = 1.0) -> "Perturbation":
        if width <= 0:
            raise PotentialError("bump width must be positive")

        def v(x):
            return amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)

        def dv(x):
            return -(x - center) / width**2 * v(x)

        return cls(v, dv, {"form": "gaussian", "center": float(center),
                           "width": float(width), "amplitude": float(amplitude)})

    @classmethod
    def chebyshev(cls, k: int, interval: tuple[float, float]) -> "Perturbation":
        """``T_k`` of the affine map sending ``interval`` to ``[-1, 1]``."""
        lo, hi = interval
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        T = np.polynomial.Chebyshev.basis(k)
        dT = T.deriv()
        return cls(lambda x: T((x - c) / h), lambda x: dT((x - c) / h) / h,
                   {"form": "chebyshev", "k": int(k), "interval": [float(lo), float(hi)]})

    @classmethod
    def from_description(cls, desc: dict) -> "Perturbation":
        form = desc.get("form")
        if form == "polynomial":
            return cls.polynomial(desc["coeffs"])
        if form == "constant":
            return cls.constant(desc["value"])
        if form == "gaussian":
            return cls.gaussian(desc["center"], desc["width"], desc.get("amplitude", 1.0))
        if form == "chebyshev":
            return cls.chebyshev(desc["k"], tuple(desc["interval"]))
        if form == "scaled":
            return cls.from_description(desc["field"]).scaled(desc["factor"])
        raise PotentialError(f"unknown perturbation form: {form!r}")
