"""Continuation of anti-integrable anchors to genuine Hénon orbits.

A periodic orbit of period n is a cyclic zero of

    F_i(x; eps) = eps x_{i+1} - (1 - x_i^2) + r x_{i-1},   i mod n.

At eps = 0 the zeros are the anchors: sign words (r = 0) or backward
orbits of the quadratic map Q_{1/r^2} (r > 0).  Anchors are continued to
eps > 0 with damped Newton or with the frozen-Jacobian contraction
x -> x - DF(anchor; 0)^{-1} F(x; eps).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import quadratic
from .core import Params, PlanarPoint
from .errors import (Divergence, InvalidParameter, NoConvergence, NotConverged,
                     NotOnLambda, SingularAnchorJacobian, SingularJacobian)

PIVOT_TOL = 1e-14
ANCHOR_TOL = 1e-12
ARMIJO_C = 1e-4
MIN_STEP = 2.0 ** -20


@dataclass(frozen=True)
class SymbolWord:
    """Cyclic word over {-1, +1}; written as ``+-+`` on the command line."""

    symbols: tuple

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise InvalidParameter("a symbol word needs at least one symbol")
        if any(s not in (-1, 1) for s in self.symbols):
            raise InvalidParameter(f"symbols must be +1 or -1, got {self.symbols}")
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    @classmethod
    def parse(cls, text: str) -> "SymbolWord":
        table = {"+": 1, "-": -1}
        try:
            return cls(tuple(table[c] for c in text.strip()))
        except KeyError:
            raise InvalidParameter(f"word must contain only '+' and '-', got {text!r}") from None

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def shift(self, k: int = 1) -> "SymbolWord":
        """Left shift: the result's i-th symbol is this word's (i+k)-th."""
        k %= len(self.symbols)
        return SymbolWord(self.symbols[k:] + self.symbols[:k])

    def reversed(self) -> "SymbolWord":
        """Time reversal fixing index 0: w'_i = w_{-i}."""
        s = self.symbols
        return SymbolWord((s[0],) + tuple(reversed(s[1:])))


def all_words(n: int) -> Iterator[SymbolWord]:
    for s in itertools.product((1, -1), repeat=n):
        yield SymbolWord(s)


@dataclass(frozen=True, eq=False)
class AnchorSequence:
    """A cyclic zero of F(.; 0) with r = r_hat."""

    values: np.ndarray
    r_hat: float = 0.0
    word: SymbolWord | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def residual(self) -> float:
        x = self.values
        return float(np.max(np.abs(1.0 - x * x - self.r_hat * np.roll(x, 1))))


def build_anchor_fullshift(w: SymbolWord) -> AnchorSequence:
    return AnchorSequence(values=np.array(w.symbols, dtype=float), r_hat=0.0, word=w)


def build_anchor_markov(r_hat: float, q_point: float, n: int,
                        tol: float = 1e-10) -> AnchorSequence:
    """Anchor x with x_0 = q_point and x_{i-1} = Q_{1/r_hat^2}(x_i).

    The values are laid out so that index i-1 holds the Q-image of index i,
    i.e. the forward Q-orbit of ``q_point`` is read backwards in time.
    """
    if not (r_hat > 0):
        raise InvalidParameter(f"r_hat must be positive, got {r_hat!r}")
    a = 1.0 / (r_hat * r_hat)
    s = math.sqrt(a)
    orbit = [float(q_point)]
    mult = 1.0
    for _ in range(n):
        mult *= -2.0 * s * orbit[-1]
        orbit.append(s * (1.0 - orbit[-1] ** 2))
    if abs(orbit[n] - orbit[0]) > tol * max(1.0, abs(orbit[0]), abs(mult)):
        raise NotOnLambda(f"{q_point!r} is not a period-{n} point of Q_{a:g}")
    if not abs(mult) > 1.0:
        raise NotOnLambda(f"{q_point!r} lies on an attracting cycle (multiplier {mult:.6g})")
    # orbit[k] = Q^k(x_0) must sit at index -k.
    values = np.array([orbit[(-i) % n] for i in range(n)])
    anchor = AnchorSequence(values=values, r_hat=float(r_hat))
    if anchor.residual() > tol * max(1.0, abs(mult)):
        raise NotOnLambda(f"anchor residual {anchor.residual():.3g} too large")
    return anchor


def markov_anchors(r_hat: float, n: int) -> list[AnchorSequence]:
    """One anchor per period-n point of Lambda_{1/r_hat^2}."""
    pts = quadratic.q_periodic_points(1.0 / (r_hat * r_hat), n)
    return [build_anchor_markov(r_hat, p.x, n) for p in pts.lambda_points]


def assemble_residual(p: Params, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return p.eps * np.roll(x, -1) - (1.0 - x * x) + p.r * np.roll(x, 1)


def assemble_jacobian(p: Params, x) -> np.ndarray:
    """Cyclic tridiagonal DF; wrap-around entries add up for n <= 2."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = np.diag(2.0 * x)
    idx = np.arange(n)
    np.add.at(J, (idx, (idx + 1) % n), p.eps)
    np.add.at(J, (idx, (idx - 1) % n), p.r)
    return J


class PathRule:
    """How r follows eps along a homotopy towards the target parameters."""

    def r_at(self, eps: float, target: Params) -> float:
        raise NotImplementedError


class ConstantB(PathRule):
    def r_at(self, eps, target):
        return eps * target.b

    def __repr__(self):
        return "ConstantB()"


class ConstantRhat(PathRule):
    def r_at(self, eps, target):
        return target.r

    def __repr__(self):
        return "ConstantRhat()"


class TableLookup(PathRule):
    """Piecewise-linear r(eps) through user-supplied knots."""

    def __init__(self, eps_knots: Sequence[float], r_knots: Sequence[float]):
        e = np.asarray(eps_knots, dtype=float)
        r = np.asarray(r_knots, dtype=float)
        if e.ndim != 1 or e.shape != r.shape or len(e) < 2 or np.any(np.diff(e) <= 0):
            raise InvalidParameter("table needs >= 2 knots with strictly increasing eps")
        self.eps_knots = e
        self.r_knots = r

    @classmethod
    def from_file(cls, path) -> "TableLookup":
        """Read ``eps,r`` rows; a non-numeric header line is skipped."""
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        try:
            float(lines[0].split(",")[0])
        except (ValueError, IndexError):
            lines = lines[1:]
        data = np.loadtxt(lines, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1])

    def r_at(self, eps, target):
        return float(np.interp(eps, self.eps_knots, self.r_knots))

    def __repr__(self):
        return f"TableLookup({len(self.eps_knots)} knots)"


@dataclass(frozen=True)
class SolverOptions:
    residual_tol: float = 1e-12
    max_iter: int = 50
    homotopy_steps: int = 1
    path: PathRule | None = None
    eps_seed: float = 1e-3
    initial: np.ndarray | None = field(default=None, compare=False)


@dataclass(frozen=True, eq=False)
class ContinuationResult:
    orbit: np.ndarray
    params: Params
    residual_norm: float
    iterations: int
    min_singular: float
    anchor_distance: float
    converged: bool
    anchor: AnchorSequence | None = None

    def __len__(self) -> int:
        return len(self.orbit)


def _min_singular(p: Params, x: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        J = assemble_jacobian(p, x)
        if not np.all(np.isfinite(J)):
            return 0.0
        return float(np.linalg.svd(J, compute_uv=False).min())


def _make_result(p, x, anchor, iterations, tol) -> ContinuationResult:
    with np.errstate(all="ignore"):
        res = float(np.max(np.abs(assemble_residual(p, x))))
        dist = float(np.max(np.abs(x - anchor.values)))
    smin = _min_singular(p, x)
    ok = bool(res <= tol and smin > 0 and np.all(np.isfinite(x)))
    x = x.copy()
    x.setflags(write=False)
    return ContinuationResult(orbit=x, params=p, residual_norm=res, iterations=iterations,
                              min_singular=smin, anchor_distance=dist, converged=ok, anchor=anchor)


def _factor(J: np.ndarray, exc=SingularJacobian):
    if not np.all(np.isfinite(J)):
        raise exc("non-finite Jacobian")
    lu, piv = lu_factor(J, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise exc("LU pivot below 1e-14")
    return lu, piv


def _newton(p: Params, x: np.ndarray, tol: float, max_iter: int):
    """Damped Newton with Armijo backtracking.  Returns (x, iterations)."""
    Fx = assemble_residual(p, x)
    for it in range(max_iter + 1):
        if np.max(np.abs(Fx)) <= tol:
            return x, it
        if it == max_iter:
            break
        lu_piv = _factor(assemble_jacobian(p, x))
        dx = lu_solve(lu_piv, Fx, check_finite=False)
        norm0 = np.linalg.norm(Fx)
        t = 1.0
        while True:
            xn = x - t * dx
            with np.errstate(all="ignore"):
                Fn = assemble_residual(p, xn)
                normn = np.linalg.norm(Fn)
            if np.isfinite(normn) and normn <= (1.0 - ARMIJO_C * t) * norm0:
                break
            t *= 0.5
            if t < MIN_STEP:
                # Round-off floor: accept a full step that cannot be improved.
                raise NoConvergence(f"line search stalled at |F|={norm0:.3e}", x)
        x, Fx = xn, Fn
    raise NoConvergence(f"no convergence in {max_iter} iterations", x)


def homotopy_path(p: Params, steps: int, seed: float, rule: PathRule) -> list[Params]:
    """Parameters visited on the way to ``p``; eps grows geometrically."""
    if steps <= 1 or p.eps == 0.0:
        return [p]
    seed = min(seed, p.eps / 10.0)
    eps = seed * (p.eps / seed) ** (np.arange(steps) / (steps - 1))
    path = [Params.from_eps_r(e, rule.r_at(e, p)) for e in eps[:-1]]
    return path + [p]


def default_path(anchor: AnchorSequence) -> PathRule:
    return ConstantB() if anchor.r_hat == 0.0 else ConstantRhat()


def newton_continue(p: Params, anchor: AnchorSequence,
                    opts: SolverOptions | None = None) -> ContinuationResult:
    """Continue ``anchor`` to a zero of F(.; p.eps) by damped Newton.

    Raises NoConvergence or SingularJacobian; the exception carries the
    last iterate as a non-converged ContinuationResult on ``.result``.
    """
    opts = opts or SolverOptions()
    x = np.array(anchor.values if opts.initial is None else opts.initial, dtype=float)
    if len(x) != len(anchor):
        raise InvalidParameter("initial guess and anchor differ in length")
    rule = opts.path or default_path(anchor)
    total = 0
    for q in homotopy_path(p, opts.homotopy_steps, opts.eps_seed, rule):
        try:
            x, it = _newton(q, x, opts.residual_tol, opts.max_iter)
        except (NoConvergence, SingularJacobian) as exc:
            last = exc.result if exc.result is not None else x
            exc.result = _make_result(q, np.asarray(last), anchor, total, opts.residual_tol)
            raise
        total += it
    return _make_result(p, x, anchor, total, opts.residual_tol)


def contraction_continue(p: Params, anchor: AnchorSequence,
                         opts: SolverOptions | None = None) -> ContinuationResult:
    """Iterate x -> x - DF(anchor; 0)^{-1} F(x; eps) with one LU factorisation."""
    opts = opts or SolverOptions()
    limit = Params.from_eps_r(0.0, anchor.r_hat)
    lu_piv = _factor(assemble_jacobian(limit, anchor.values), SingularAnchorJacobian)
    x = np.array(anchor.values if opts.initial is None else opts.initial, dtype=float)
    Fx = assemble_residual(p, x)
    prev = math.inf
    growth = 0
    for it in range(opts.max_iter + 1):
        norm = float(np.max(np.abs(Fx)))
        if norm <= opts.residual_tol:
            return _make_result(p, x, anchor, it, opts.residual_tol)
        growth = growth + 1 if norm >= prev else 0
        if not math.isfinite(norm) or growth >= 3 or it == opts.max_iter:
            break
        prev = norm
        x = x - lu_solve(lu_piv, Fx, check_finite=False)
        with np.errstate(all="ignore"):
            Fx = assemble_residual(p, x)
    raise NoConvergence("contraction iteration did not converge",
                        _make_result(p, x, anchor, it, opts.residual_tol))


def neumann_solve(r_hat: float, anchor: AnchorSequence, eta, tol: float = 1e-14,
                  max_terms: int = 100_000) -> np.ndarray:
    """Solve r_hat xi_{i-1} + 2 x_i xi_i = eta_i by summing the Neumann series.

    Term N at index i is (-r_hat)^N eta_{i-N} / prod_{k=0..N} 2 x_{i-k},
    which is built from term N-1 by one cyclic shift and a scaling.
    """
    x = np.asarray(anchor.values, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != x.shape:
        raise InvalidParameter("eta and anchor differ in length")
    if r_hat < 0:
        raise InvalidParameter("r_hat must be non-negative")
    term = eta / (2.0 * x)
    if r_hat == 0.0:
        return term
    factor = -r_hat / (2.0 * x)
    total = term.copy()
    prev = np.max(np.abs(term))
    growth = 0
    for _ in range(max_terms):
        term = factor * np.roll(term, 1)
        size = np.max(np.abs(term))
        total += term
        if size < tol:
            return total
        growth = growth + 1 if size > prev else 0
        if growth >= 3 or not np.isfinite(size):
            raise Divergence("Neumann series terms grow; anchor is not expanding")
        prev = size
    raise Divergence(f"Neumann series did not reach {tol:g} in {max_terms} terms")


def orbit_to_planar(res: ContinuationResult, projection: str = "backward") -> list[PlanarPoint]:
    """Phase-space points of a continued orbit.

    ``backward`` gives (x_i, x_{i-1}), the Hénon orbit itself;
    ``forward`` gives (x_i, x_{i+1}).
    """
    if not res.converged:
        raise NotConverged("orbit did not converge")
    x = res.orbit
    if projection == "backward":
        other = np.roll(x, 1)
    elif projection == "forward":
        other = np.roll(x, -1)
    else:
        raise InvalidParameter(f"unknown projection {projection!r}")
    return [PlanarPoint(float(u), float(v)) for u, v in zip(x, other)]


def continue_anchor(p: Params, anchor: AnchorSequence, opts: SolverOptions | None = None,
                    solver: str = "newton") -> ContinuationResult:
    """Run a solver and fold failures into a non-converged result."""
    fn = {"newton": newton_continue, "contraction": contraction_continue}[solver]
    try:
        return fn(p, anchor, opts)
    except (NoConvergence, SingularJacobian) as exc:
        if exc.result is not None:
            return replace(exc.result, converged=False)
        x = np.array(anchor.values)
        return ContinuationResult(orbit=x, params=p, residual_norm=math.inf, iterations=0,
                                  min_singular=0.0, anchor_distance=math.nan,
                                  converged=False, anchor=anchor)


def to_record(res: ContinuationResult) -> dict:
    """Orbit record as written by the CLI."""
    p = res.params
    rec = {"a": p.a, "b": p.b, "eps": p.eps, "r": p.r}
    anchor = res.anchor
    if anchor is not None and anchor.word is not None:
        rec["word"] = str(anchor.word)
    elif anchor is not None:
        rec["q_anchor"] = float(anchor.values[0])
        rec["r_hat"] = anchor.r_hat
    if anchor is not None:
        rec["anchor"] = [float(v) for v in anchor.values]
    rec.update(
        orbit=[float(v) for v in res.orbit],
        residual_norm=res.residual_norm,
        min_singular=res.min_singular,
        anchor_distance=res.anchor_distance,
        iterations=res.iterations,
        converged=res.converged,
    )
    return rec


def from_record(rec: dict) -> ContinuationResult:
    if math.isfinite(rec["a"]):
        p = Params.from_ab(rec["a"], rec["b"])
    else:
        p = Params.from_eps_r(rec["eps"], rec["r"])
    if "word" in rec:
        anchor = build_anchor_fullshift(SymbolWord.parse(rec["word"]))
    elif "anchor" in rec:
        anchor = AnchorSequence(values=np.array(rec["anchor"]), r_hat=rec.get("r_hat", 0.0))
    else:
        anchor = None
    orbit = np.array(rec["orbit"], dtype=float)
    orbit.setflags(write=False)
    return ContinuationResult(
        orbit=orbit, params=p, residual_norm=rec["residual_norm"],
        iterations=rec["iterations"], min_singular=rec["min_singular"],
        anchor_distance=rec.get("anchor_distance", math.nan),
        converged=rec["converged"], anchor=anchor)
