"""Quasi-hyperbolicity checks on the periodic skeleton of continued orbits.

For a periodic orbit the linearised recurrence zeta_{i+1} = DH(z_i) zeta_i
has a non-trivial bounded solution exactly when the monodromy matrix has
an eigenvalue on the unit circle (Floquet).  Only periodic orbits are
checked; non-periodic members of the invariant set are not.

Uniform hyperbolicity of chain-recurrent subsets follows analytically from
quasi-hyperbolicity and is not computed here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .continuation import (ContinuationResult, SolverOptions, SymbolWord,
                           build_anchor_fullshift, newton_continue)
from .core import Params
from .errors import EmptyInput, InvalidParameter, NotConverged

UNIT_CIRCLE_TOL = 1e-6


@dataclass(frozen=True)
class MonodromyReport:
    matrix: np.ndarray
    eigenvalues: tuple
    moduli: tuple
    det_check: float
    quasi_hyperbolic: bool
    margin: float
    log_scale: float = 0.0


def _eig2(m: np.ndarray, det: float | None = None) -> tuple:
    tr = m[0, 0] + m[1, 1]
    if det is None:
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = cmath.sqrt(tr * tr / 4.0 - det)
    half = tr / 2.0
    # Avoid cancellation: take the larger root first, the other from det.
    big = half + disc if half.real >= 0 else half - disc
    small = det / big if big != 0 else half - disc
    return big, small


def monodromy(p: Params, res: ContinuationResult,
              unit_circle_tol: float = UNIT_CIRCLE_TOL) -> MonodromyReport:
    """Ordered product DH(z_{n-1}) ... DH(z_0) along the orbit.

    The product is carried as Q R with a QR step per factor, so the
    determinant (and with it the contracting eigenvalue) keeps full
    relative accuracy.  R is rescaled by its largest entry; ``log_scale``
    is the natural log of the factored-out scale and ``matrix`` is the
    true product when it is representable.
    """
    if not res.converged:
        raise NotConverged("monodromy needs a converged orbit")
    if not p.eps > 0:
        raise InvalidParameter("monodromy needs eps > 0")
    Q = np.eye(2)
    R = np.eye(2)
    log_scale = 0.0
    log_det = 0.0
    det_sign = 1.0
    for xi in res.orbit:
        J = np.array([[-2.0 * xi / p.eps, -p.r / p.eps], [1.0, 0.0]])
        Q, Rk = np.linalg.qr(J @ Q)
        R = Rk @ R
        d = Rk[0, 0] * Rk[1, 1]
        det_sign *= math.copysign(1.0, d)
        log_det += math.log(abs(d)) if d != 0 else -math.inf
        s = np.max(np.abs(R))
        if s > 0:
            R = R / s
            log_scale += math.log(s)
    M = Q @ R
    det_sign *= math.copysign(1.0, np.linalg.det(Q))
    # det of the rescaled M, computed from the per-step R diagonals.
    det_m = det_sign * math.exp(log_det - 2.0 * log_scale) if math.isfinite(log_det) else 0.0
    lam = _eig2(M, det_m)
    scale = math.exp(log_scale) if log_scale < 700 else math.inf
    eig = tuple(complex(l) * scale for l in lam)
    # Moduli through logs so that huge products stay finite where possible.
    moduli = tuple(math.exp(min(700.0, math.log(abs(l)) + log_scale)) if l != 0 else 0.0
                   for l in lam)
    det_check = det_sign * math.exp(log_det) if log_det < 700 else math.inf
    matrix = M * scale
    margin = min(abs(m - 1.0) for m in moduli)
    return MonodromyReport(matrix=matrix, eigenvalues=eig, moduli=moduli, det_check=float(det_check),
                           quasi_hyperbolic=margin > unit_circle_tol, margin=margin,
                           log_scale=log_scale)


def df_margin(p: Params, res: ContinuationResult) -> float:
    """Smallest singular value of DF at the continued orbit."""
    if not res.converged:
        raise NotConverged("df_margin needs a converged orbit")
    from .continuation import assemble_jacobian
    return float(np.linalg.svd(assemble_jacobian(p, res.orbit), compute_uv=False).min())


@dataclass(frozen=True)
class SeparationReport:
    min_pairwise: float
    count: int


def _is_rotation(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> int | None:
    """Smallest k with u shifted by k equal to v, or None."""
    if len(u) != len(v):
        return None
    for k in range(len(u)):
        if np.max(np.abs(np.roll(u, -k) - v)) <= tol:
            return k
    return None


def cyclic_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over cyclic alignments of the sup-distance between u and v."""
    return min(float(np.max(np.abs(np.roll(u, -k) - v))) for k in range(len(u)))


def separation(results: Sequence[ContinuationResult]) -> SeparationReport:
    """Smallest distance between continued orbits of distinct words.

    Pairs whose anchors are non-trivial rotations of one another describe
    the same orbit and are skipped; identical anchors are compared, so a
    duplicated input shows up as a zero distance.
    """
    if not results:
        raise EmptyInput("separation needs at least one orbit")
    if any(not r.converged for r in results):
        raise NotConverged("separation needs converged orbits")
    best = math.inf
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            u, v = results[i], results[j]
            if len(u) != len(v):
                raise InvalidParameter("separation needs orbits of one period")
            if u.anchor is not None and v.anchor is not None:
                k = _is_rotation(u.anchor.values, v.anchor.values)
                if k is not None and not np.array_equal(u.anchor.values, v.anchor.values):
                    continue
            best = min(best, cyclic_distance(u.orbit, v.orbit))
    return SeparationReport(min_pairwise=best, count=len(results))


def reverse_sequence(x: np.ndarray) -> np.ndarray:
    """y_i = x_{-i} with indices mod n."""
    return np.roll(x[::-1], 1)


def time_reversal_check(p: Params, res: ContinuationResult, tol: float = 1e-8,
                        opts: SolverOptions | None = None) -> bool:
    """Continue the reversed word with eps and r exchanged and compare.

    A sequence solves the recurrence at (eps, r) exactly when its time
    reversal solves it at (r, eps).
    """
    if not res.converged:
        raise NotConverged("time reversal check needs a converged orbit")
    if not (p.eps > 0 and p.r > 0):
        raise InvalidParameter("time reversal check needs eps > 0 and r > 0")
    anchor = res.anchor
    if anchor is None or anchor.word is None:
        raise InvalidParameter("time reversal check needs a full-shift anchor")
    q = p.swapped()
    other = newton_continue(q, build_anchor_fullshift(anchor.word.reversed()), opts)
    return bool(np.max(np.abs(reverse_sequence(res.orbit) - other.orbit)) <= tol)
