"""The one-dimensional quadratic map Q_a(x) = sqrt(a) (1 - x^2).

Q_a is hyperbolic when the critical point 0 either escapes or is attracted
to a periodic cycle.  Its bounded invariant set away from that cycle is
reached here only through periodic points, which are enumerated by
sign-change root isolation of Q_a^n(x) - x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, InvalidParameter, NotHyperbolic

CYCLE_TOL = 1e-9
WARMUP = 10_000
MAX_CYCLE_PERIOD = 512
MULTIPLIER_MARGIN = 1e-6
DEDUPE_TOL = 1e-8
ATTRACTOR_MATCH_TOL = 1e-6


def q_step(a: float, x):
    return math.sqrt(a) * (1.0 - x * x)


def q_deriv(a: float, x):
    return -2.0 * math.sqrt(a) * x


def q_bound(a: float) -> float:
    """Radius of the interval holding every bounded Q_a orbit.

    This is the modulus of the negative fixed point, i.e. the
    Devaney-Nitecki radius at r = 0.
    """
    eps = 1.0 / math.sqrt(a)
    return 0.5 * (eps + math.sqrt(eps * eps + 4.0))


@dataclass(frozen=True)
class AttractingCycle:
    period: int
    cycle: tuple
    multiplier: float


@dataclass(frozen=True)
class Escape:
    iterations: int


@dataclass(frozen=True)
class Undecided:
    iterations: int


QuadClass = AttractingCycle | Escape | Undecided


def is_hyperbolic(cls) -> bool:
    return isinstance(cls, (AttractingCycle, Escape))


def classify(a: float, max_iter: int = WARMUP, r_escape: float | None = None,
             tol: float = CYCLE_TOL, max_period: int = MAX_CYCLE_PERIOD) -> QuadClass:
    """Follow the critical orbit of Q_a and decide which hyperbolic case applies.

    After ``max_iter`` warm-up steps the tail is scanned for a return within
    ``tol``; the smallest return time is the period.  The cycle is accepted
    as attracting only if ``|multiplier| < 1 - MULTIPLIER_MARGIN``.
    """
    if not (a > 0):
        raise InvalidParameter(f"a must be positive, got {a!r}")
    if max_iter < 1:
        raise InvalidParameter("max_iter must be >= 1")
    s = math.sqrt(a)
    if r_escape is None:
        r_escape = q_bound(a) + 1.0

    x = 0.0
    for k in range(1, max_iter + 1):
        x = s * (1.0 - x * x)
        if abs(x) > r_escape:
            return Escape(iterations=k)

    x0 = x
    tail = [x0]
    for k in range(1, max_period + 1):
        x = s * (1.0 - x * x)
        if abs(x) > r_escape:
            return Escape(iterations=max_iter + k)
        if abs(x - x0) < tol:
            cycle = tuple(tail)
            mult = 1.0
            for c in cycle:
                mult *= -2.0 * s * c
            if abs(mult) < 1.0 - MULTIPLIER_MARGIN:
                return AttractingCycle(period=k, cycle=cycle, multiplier=mult)
            break
        tail.append(x)
    return Undecided(iterations=max_iter + len(tail))


@dataclass(frozen=True)
class PeriodicPoint:
    x: float
    multiplier: float
    in_lambda: bool


@dataclass(frozen=True)
class QPeriodicSet:
    a: float
    n: int
    points: tuple = field(default_factory=tuple)

    @property
    def lambda_points(self) -> list[PeriodicPoint]:
        return [p for p in self.points if p.in_lambda]


def _iterate_with_derivative(s: float, x: np.ndarray, n: int):
    y = x.copy()
    d = np.ones_like(x)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            d *= -2.0 * s * y
            y = s * (1.0 - y * y)
    return y, d


def turning_points(a: float, n: int) -> np.ndarray:
    """Critical points of Q_a^n: preimages of 0 under Q_a^k for k < n."""
    s = math.sqrt(a)
    level = np.array([0.0])
    found = [level]
    for _ in range(n - 1):
        level = level[level <= s]
        root = np.sqrt(1.0 - level / s)
        level = np.concatenate([-root, root])
        found.append(level)
    return np.unique(np.concatenate(found))


def _golden_argmax(s: float, n: int, lo: np.ndarray, hi: np.ndarray, iters: int = 90):
    """Vectorised golden-section search for the maximum of (Q^n)'."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        gc = _iterate_with_derivative(s, c, n)[1]
        gd = _iterate_with_derivative(s, d, n)[1]
        right = gc < gd
        lo = np.where(right, c, lo)
        hi = np.where(right, hi, d)
    return 0.5 * (lo + hi)


def _bisect_level(s: float, n: int, lo: np.ndarray, hi: np.ndarray, rising: bool,
                  iters: int = 90) -> np.ndarray:
    """Point where (Q^n)' crosses 1 on a piece where it is monotone."""
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = _iterate_with_derivative(s, mid, n)[1] < 1.0
        move_lo = below if rising else ~below
        lo = np.where(move_lo, mid, lo)
        hi = np.where(move_lo, hi, mid)
    return 0.5 * (lo + hi)


def _isolate(s: float, n: int, lo: float, hi: float) -> np.ndarray:
    """Brackets [l, r] on which f(x) = Q^n(x) - x is monotone and changes sign.

    Q^n is monotone between consecutive turning points.  On a decreasing
    lap f is strictly decreasing.  On an increasing lap (Q^n)' vanishes at
    both ends and, by the negative Schwarzian derivative, has a single
    interior maximum, so f splits into at most three monotone pieces.
    """
    a = s * s
    tp = turning_points(a, n)
    tp = tp[(tp > lo) & (tp < hi)]
    edges = np.concatenate([[lo], tp, [hi]])
    left, right = edges[:-1], edges[1:]
    mid = 0.5 * (left + right)
    increasing = _iterate_with_derivative(s, mid, n)[1] > 0

    pieces = [np.stack([left[~increasing], right[~increasing]], axis=1)]
    il, ir = left[increasing], right[increasing]
    if il.size:
        peak = _golden_argmax(s, n, il, ir)
        gpeak = _iterate_with_derivative(s, peak, n)[1]
        flat = ~(gpeak > 1.0)
        pieces.append(np.stack([il[flat], ir[flat]], axis=1))
        sl, sr, sp = il[~flat], ir[~flat], peak[~flat]
        if sl.size:
            p1 = _bisect_level(s, n, sl, sp, rising=True)
            p2 = _bisect_level(s, n, sp, sr, rising=False)
            pieces += [np.stack(pair, axis=1) for pair in ((sl, p1), (p1, p2), (p2, sr))]
    br = np.concatenate(pieces, axis=0)
    fl = _iterate_with_derivative(s, br[:, 0], n)[0] - br[:, 0]
    fr = _iterate_with_derivative(s, br[:, 1], n)[0] - br[:, 1]
    with np.errstate(invalid="ignore"):
        hit = ((np.signbit(fl) != np.signbit(fr)) & ~np.isnan(fl) & ~np.isnan(fr)) | (fl == 0.0)
    return br[hit]


def _bisect(s: float, n: int, br: np.ndarray, iters: int = 60) -> np.ndarray:
    lo = br[:, 0].copy()
    hi = br[:, 1].copy()
    flo = _iterate_with_derivative(s, lo, n)[0] - lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = _iterate_with_derivative(s, mid, n)[0] - mid
        left = np.signbit(fm) == np.signbit(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _newton_polish(s: float, n: int, x: np.ndarray, br: np.ndarray, steps: int = 3) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(steps):
            y, d = _iterate_with_derivative(s, x, n)
            xn = x - (y - x) / (d - 1.0)
            inside = (xn >= br[:, 0]) & (xn <= br[:, 1]) & np.isfinite(xn)
            x = np.where(inside, xn, x)
    return x


def periodic_roots(a: float, n: int) -> np.ndarray:
    """All real solutions of Q_a^n(x) = x, sorted and de-duplicated."""
    s = math.sqrt(a)
    bound = q_bound(a)
    pad = 1e-7 * bound
    br = _isolate(s, n, -bound - pad, bound + pad)
    if len(br) == 0:
        return np.empty(0)
    order = np.argsort(br[:, 0])
    br = br[order]
    x = _newton_polish(s, n, _bisect(s, n, br), br)
    # Pieces hold at most one root each; duplicates only arise at shared ends.
    shared = br[1:, 0] == br[:-1, 1]
    keep = np.ones(len(x), dtype=bool)
    close = np.abs(np.diff(x)) <= np.minimum(DEDUPE_TOL, 16.0 * np.spacing(np.abs(x[1:])))
    keep[1:] = ~(shared & close)
    x = np.sort(x[keep])
    if len(x) > 2 ** n:
        raise BudgetExceeded(f"found {len(x)} roots of a degree-{2 ** n} polynomial")
    return x


def q_periodic_points(a: float, n: int, cls: QuadClass | None = None) -> QPeriodicSet:
    """Periodic points of period dividing ``n`` with their multipliers.

    Points of the attracting cycle (if any) are flagged ``in_lambda=False``.
    """
    if not (a > 0):
        raise InvalidParameter(f"a must be positive, got {a!r}")
    if not 1 <= n <= 16:
        raise InvalidParameter(f"period must be in 1..16, got {n}")
    if cls is None:
        cls = classify(a)
    if not is_hyperbolic(cls):
        raise NotHyperbolic(f"Q_a at a={a} is not classified as hyperbolic: {cls}")
    roots = periodic_roots(a, n)
    _, mult = _iterate_with_derivative(math.sqrt(a), roots, n)
    attractor = np.array(cls.cycle) if isinstance(cls, AttractingCycle) else np.empty(0)
    points = []
    for x, m in zip(roots, mult):
        on_attractor = attractor.size > 0 and np.min(np.abs(attractor - x)) < ATTRACTOR_MATCH_TOL
        points.append(PeriodicPoint(x=float(x), multiplier=float(m), in_lambda=not on_attractor))
    return QPeriodicSet(a=a, n=n, points=tuple(points))


@dataclass(frozen=True)
class ExpansionEstimate:
    C: float
    lam: float


def expansion_estimate(a: float, n: int) -> ExpansionEstimate:
    """Smallest per-step expansion rate over the period-n points of Lambda."""
    pts = q_periodic_points(a, n).lambda_points
    if not pts:
        raise NotHyperbolic(f"no period-{n} points of Lambda at a={a}")
    lam = min(abs(p.multiplier) ** (1.0 / n) for p in pts)
    return ExpansionEstimate(C=1.0, lam=lam)
