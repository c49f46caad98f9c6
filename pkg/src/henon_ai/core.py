"""Hénon parameters, the map, its Jacobian and the analytic parameter regions.

Parameters live in two charts that are used interchangeably::

    (a, b)      H(x, y) = (sqrt(a) (1 - x^2) - b y, x)
    (eps, r)    eps x_{i+1} - (1 - x_i^2) + r x_{i-1} = 0

with ``eps = 1/sqrt(a)`` and ``r = b/sqrt(a)``.  The sequence ``(x_i)``
solves the recurrence exactly when ``(x_i, x_{i-1})`` is a Hénon orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameter, ZeroJacobian

SQRT_HALF = 1.0 / math.sqrt(2.0)
STERLING_MEISS_FACTOR = (5.0 + 2.0 * math.sqrt(5.0)) / 4.0


@dataclass(frozen=True)
class Params:
    """Hénon parameters carried in both charts.

    ``(a, b)`` is primary.  The anti-integrable limit ``eps = 0`` is
    representable through :meth:`from_eps_r`; there ``a`` is infinite and
    ``b`` is 0 when ``r = 0`` and a signed infinity otherwise.
    """

    a: float
    b: float
    eps: float
    r: float

    def __post_init__(self):
        if not (self.a > 0):
            raise InvalidParameter(f"a must be positive, got {self.a!r}")
        if not (self.eps >= 0) or math.isnan(self.r):
            raise InvalidParameter(f"invalid chart values eps={self.eps!r}, r={self.r!r}")

    @classmethod
    def from_ab(cls, a: float, b: float) -> "Params":
        a = float(a)
        b = float(b)
        if not (a > 0) or not math.isfinite(b):
            raise InvalidParameter(f"need a > 0 and finite b, got a={a!r}, b={b!r}")
        eps = 1.0 / math.sqrt(a)
        return cls(a=a, b=b, eps=eps, r=b * eps)

    @classmethod
    def from_eps_r(cls, eps: float, r: float) -> "Params":
        eps = float(eps)
        r = float(r)
        if not (eps >= 0) or not math.isfinite(eps) or not math.isfinite(r):
            raise InvalidParameter(f"need eps >= 0 and finite r, got eps={eps!r}, r={r!r}")
        if eps == 0.0:
            b = 0.0 if r == 0.0 else math.copysign(math.inf, r)
            return cls(a=math.inf, b=b, eps=0.0, r=r)
        e2 = eps * eps
        a = 1.0 / e2 if e2 > 0.0 else math.inf
        return cls(a=a, b=r / eps, eps=eps, r=r)

    @property
    def sqrt_a(self) -> float:
        return math.sqrt(self.a)

    @property
    def at_ai_limit(self) -> bool:
        return self.eps == 0.0

    def swapped(self) -> "Params":
        """Parameters with eps and r exchanged (time reversal)."""
        return Params.from_eps_r(self.r, self.eps)


class PlanarPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class RegionFlags:
    sterling_meiss: bool
    improved_horseshoe: bool
    dn_radius: float


def henon_step(p: Params, pt) -> PlanarPoint:
    x, y = pt
    with np.errstate(over="ignore", invalid="ignore"):
        xn = p.sqrt_a * (1.0 - x * x) - p.b * y
    return PlanarPoint(float(xn), float(x))


def henon_inverse_step(p: Params, pt) -> PlanarPoint:
    if p.b == 0.0:
        raise ZeroJacobian("the Hénon map with b = 0 is not invertible")
    xn, yn = pt
    with np.errstate(over="ignore", invalid="ignore"):
        y = (p.sqrt_a * (1.0 - yn * yn) - xn) / p.b
    return PlanarPoint(float(yn), float(y))


def henon_jacobian(p: Params, pt) -> np.ndarray:
    x = pt[0]
    return np.array([[-2.0 * p.sqrt_a * x, -p.b], [1.0, 0.0]])


def dn_bound(p: Params) -> float:
    """Sup-norm radius of the box holding every bounded orbit."""
    s = p.eps + abs(p.r)
    return 0.5 * (s + math.sqrt(s * s + 4.0))


def improved_horseshoe(p: Params) -> bool:
    """a > 2 (1 + |b|)^2, evaluated as eps + |r| < 1/sqrt(2)."""
    return p.eps + abs(p.r) < SQRT_HALF


def improved_horseshoe_ab(a: float, b: float) -> bool:
    return a > 2.0 * (1.0 + abs(b)) ** 2


def sterling_meiss(p: Params) -> bool:
    if p.at_ai_limit:
        return True
    return p.a >= STERLING_MEISS_FACTOR * (1.0 + abs(p.b)) ** 2


def region_flags(p: Params) -> RegionFlags:
    return RegionFlags(
        sterling_meiss=sterling_meiss(p),
        improved_horseshoe=improved_horseshoe(p),
        dn_radius=dn_bound(p),
    )
