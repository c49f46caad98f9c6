"""Parameter charts and the hyperbolic-plateau scan.

Charts map Hénon parameters (a, b) to bounded pictures:

    ab      identity
    epsr    (1/sqrt(a), b/sqrt(a))
    mobius  (a + ib - 1)/(a + ib + 1)                 right half-plane -> unit disc
    sphere  (4a, 4b, a^2 + b^2 - 4)/(a^2 + b^2 + 4)   inverse stereographic projection
    semidisc (rho, theta) = ((2/pi) atan sqrt(a + b^2), atan(b/sqrt(a)))

The scan classifies each raster cell by continuing every sign word of a
fixed length and testing the resulting orbits for quasi-hyperbolicity.  It
is a heuristic picture, not a rigorous certification.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .continuation import SolverOptions, all_words, build_anchor_fullshift, continue_anchor
from .core import Params, RegionFlags, region_flags
from .errors import DomainError, InvalidParameter
from .hyperbolicity import monodromy

DISTINCT_TOL = 1e-6


class Chart(str, Enum):
    AB = "ab"
    EPS_R = "epsr"
    MOBIUS_DISC = "mobius"
    SPHERE = "sphere"
    SEMI_DISC = "semidisc"


def chart_forward(c: Chart | str, a, b):
    c = Chart(c)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if c in (Chart.EPS_R, Chart.SEMI_DISC):
        if np.any(~(a > 0)):
            raise DomainError(f"chart {c.value} needs a > 0")
    elif np.any(~(a >= 0)):
        raise DomainError(f"chart {c.value} needs a >= 0")

    if c is Chart.AB:
        out = (a, b)
    elif c is Chart.EPS_R:
        s = np.sqrt(a)
        out = (1.0 / s, b / s)
    elif c is Chart.MOBIUS_DISC:
        w = (a + 1j * b - 1.0) / (a + 1j * b + 1.0)
        out = (w.real, w.imag)
    elif c is Chart.SPHERE:
        q = a * a + b * b
        d = q + 4.0
        out = (4.0 * a / d, 4.0 * b / d, (q - 4.0) / d)
    else:
        out = (2.0 / math.pi * np.arctan(np.sqrt(a + b * b)), np.arctan(b / np.sqrt(a)))
    return tuple(float(v) if v.ndim == 0 else v for v in out)


def chart_inverse(c: Chart | str, coords):
    c = Chart(c)
    coords = [np.asarray(v, dtype=float) for v in coords]
    if c is Chart.AB:
        a, b = coords
    elif c is Chart.EPS_R:
        eps, r = coords
        if np.any(~(eps > 0)):
            raise DomainError("epsr inverse needs eps > 0")
        a, b = 1.0 / (eps * eps), r / eps
    elif c is Chart.MOBIUS_DISC:
        w = coords[0] + 1j * coords[1]
        if np.any(~(np.abs(w) < 1.0)):
            raise DomainError("mobius inverse needs |w| < 1")
        z = (1.0 + w) / (1.0 - w)
        a, b = z.real, z.imag
    elif c is Chart.SPHERE:
        X, Y, Z = coords
        if np.any(Z >= 1.0) or np.any(X < 0):
            raise DomainError("sphere inverse needs Z < 1 and X >= 0")
        rho2 = X * X + Y * Y
        with np.errstate(divide="ignore", invalid="ignore"):
            # 2/(1-Z) loses digits near the north pole; use 2(1+Z)/(X^2+Y^2) there.
            k = np.where(Z <= 0.0, 2.0 / (1.0 - Z), 2.0 * (1.0 + Z) / rho2)
        a, b = X * k, Y * k
    else:
        rho, theta = coords
        if np.any(~((rho >= 0) & (rho < 1.0))) or np.any(~(np.abs(theta) < math.pi / 2)):
            raise DomainError("semidisc inverse needs 0 <= rho < 1 and |theta| < pi/2")
        s2 = np.tan(math.pi * rho / 2.0) ** 2
        t = np.tan(theta)
        a = s2 / (1.0 + t * t)
        b = t * np.sqrt(a)
    return tuple(float(v) if np.ndim(v) == 0 else v for v in (a, b))


class CellKind(str, Enum):
    FULL_HORSESHOE = "FullHorseshoe"
    PARTIAL = "Partial"
    NONE_CONTINUED = "NoneContinued"
    OUT_OF_DOMAIN = "OutOfDomain"


GRAY = {
    CellKind.FULL_HORSESHOE: 255,
    CellKind.PARTIAL: 128,
    CellKind.NONE_CONTINUED: 32,
    CellKind.OUT_OF_DOMAIN: 0,
}


@dataclass(frozen=True)
class CellClass:
    kind: CellKind
    converged: int = 0
    of: int = 0
    analytic: RegionFlags | None = None
    a: float = math.nan
    b: float = math.nan


@dataclass(frozen=True)
class ScanRaster:
    chart: Chart
    window: tuple
    width: int
    height: int
    cells: tuple
    meta: dict = field(default_factory=dict)

    def cell(self, i: int, j: int) -> CellClass:
        return self.cells[j * self.width + i]

    def kinds(self) -> np.ndarray:
        """Cell kinds as a (height, width) array indexed [j, i]."""
        return np.array([c.kind.value for c in self.cells]).reshape(self.height, self.width)


def default_scan_options() -> SolverOptions:
    return SolverOptions(residual_tol=1e-10, max_iter=30, homotopy_steps=12)


def classify_params(p: Params, m: int, opts: SolverOptions | None = None) -> CellClass:
    """Continue all 2^m words at ``p``; count the good, distinct, hyperbolic orbits."""
    flags = region_flags(p)
    total = 2 ** m
    if p.at_ai_limit:
        return CellClass(CellKind.FULL_HORSESHOE, total, total, flags, p.a, p.b)
    opts = opts or default_scan_options()
    kept: list[np.ndarray] = []
    for w in all_words(m):
        res = continue_anchor(p, build_anchor_fullshift(w), opts)
        if not res.converged:
            continue
        if any(np.max(np.abs(res.orbit - y)) <= DISTINCT_TOL for y in kept):
            continue
        if not monodromy(p, res).quasi_hyperbolic:
            continue
        kept.append(res.orbit)
    good = len(kept)
    if good == total:
        kind = CellKind.FULL_HORSESHOE
    elif good == 0:
        kind = CellKind.NONE_CONTINUED
    else:
        kind = CellKind.PARTIAL
    return CellClass(kind, good, total, flags, p.a, p.b)


def cell_centers(window, width: int, height: int):
    umin, umax, vmin, vmax = window
    u = umin + (np.arange(width) + 0.5) * (umax - umin) / width
    v = vmin + (np.arange(height) + 0.5) * (vmax - vmin) / height
    return u, v


def cell_params(chart: Chart, u: float, v: float, hemisphere: str = "north") -> Params | None:
    """Parameters at chart coordinates (u, v), or None outside the domain."""
    try:
        if chart is Chart.EPS_R:
            if u == 0.0:
                return Params.from_eps_r(0.0, v)
            a, b = chart_inverse(chart, (u, v))
        elif chart is Chart.SPHERE:
            rest = 1.0 - u * u - v * v
            if rest < 0:
                return None
            z = math.sqrt(rest) if hemisphere == "north" else -math.sqrt(rest)
            a, b = chart_inverse(chart, (u, v, z))
        else:
            a, b = chart_inverse(chart, (u, v))
        if not (a > 0) or not math.isfinite(a) or not math.isfinite(b):
            return None
        return Params.from_ab(a, b)
    except DomainError:
        return None


def _scan_cell(args):
    chart, u, v, m, opts, hemisphere = args
    p = cell_params(chart, u, v, hemisphere)
    if p is None:
        return CellClass(CellKind.OUT_OF_DOMAIN)
    return classify_params(p, m, opts)


def scan(chart: Chart | str, window, grid, m: int, solver_opts: SolverOptions | None = None,
         threads: int = 1, hemisphere: str = "north") -> ScanRaster:
    """Classify every cell centre of a ``grid = (width, height)`` raster.

    ``window = (umin, umax, vmin, vmax)`` in chart coordinates.  For the
    sphere chart (u, v) = (X, Y) on the chosen hemisphere.  Output does not
    depend on ``threads``.
    """
    chart = Chart(chart)
    width, height = grid
    if not 1 <= m <= 8:
        raise InvalidParameter("word length m must be in 1..8")
    if width < 1 or height < 1 or width * height > 10 ** 6:
        raise InvalidParameter("grid must have between 1 and 10^6 cells")
    u, v = cell_centers(window, width, height)
    opts = solver_opts or default_scan_options()
    jobs = [(chart, float(u[i]), float(v[j]), m, opts, hemisphere)
            for j in range(height) for i in range(width)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_scan_cell, jobs, chunksize=max(1, len(jobs) // (8 * threads))))
    else:
        cells = [_scan_cell(job) for job in jobs]
    meta = {"m": m, "residual_tol": opts.residual_tol, "max_iter": opts.max_iter,
            "homotopy_steps": opts.homotopy_steps, "hemisphere": hemisphere}
    return ScanRaster(chart=chart, window=tuple(window), width=width, height=height,
                      cells=tuple(cells), meta=meta)


def write_raster_csv(raster: ScanRaster, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "a", "b", "class", "converged", "of",
                    "sterling_meiss", "improved_horseshoe", "dn_radius"])
        for j in range(raster.height):
            for i in range(raster.width):
                c = raster.cell(i, j)
                f = c.analytic
                w.writerow([i, j, repr(c.a), repr(c.b), c.kind.value, c.converged, c.of,
                            "" if f is None else int(f.sterling_meiss),
                            "" if f is None else int(f.improved_horseshoe),
                            "" if f is None else repr(f.dn_radius)])


def write_raster_pgm(raster: ScanRaster, path) -> None:
    """Binary PGM; the top image row is the largest v."""
    pixels = bytearray()
    for j in reversed(range(raster.height)):
        for i in range(raster.width):
            pixels.append(GRAY[raster.cell(i, j).kind])
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + bytes(pixels))


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    magic, dims, maxval, body = data.split(b"\n", 3)
    if magic != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(t) for t in dims.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(int(h), int(w))


def reference_curves(chart: Chart | str, a_max: float = 100.0, samples: int = 400):
    """Images of the lines b = +1 and b = -1 for a in (0, a_max]."""
    chart = Chart(chart)
    a = a_max * np.arange(1, samples + 1) / samples
    curves = {}
    for b in (1.0, -1.0):
        coords = chart_forward(chart, a, np.full_like(a, b))
        curves[f"b={b:+g}"] = (a, np.full_like(a, b), coords)
    return curves


def write_overlays_csv(chart: Chart | str, path, a_max: float = 100.0, samples: int = 400) -> None:
    chart = Chart(chart)
    curves = reference_curves(chart, a_max, samples)
    ncoord = 3 if chart is Chart.SPHERE else 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve", "a", "b"] + [f"c{k}" for k in range(ncoord)])
        for name, (a, b, coords) in curves.items():
            for k in range(len(a)):
                w.writerow([name, repr(float(a[k])), repr(float(b[k]))]
                           + [repr(float(c[k])) for c in coords])


def default_threads() -> int:
    return os.cpu_count() or 1
