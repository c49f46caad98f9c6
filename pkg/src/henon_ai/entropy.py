"""Topological entropy from growth of periodic-point counts.

Counts are of period-n points (not primitive orbits), so the full shift
gives exactly 2^n.  ``h_n = ln(N_n) / n`` and the estimate is read off the
table by one of three rules:

* ``last``: h_n at the largest n, the limit definition (default);
* ``max``: the largest h_n;
* ``fit``: least-squares slope of ln N_n against n.

``max`` over-estimates whenever short periods are over-represented, e.g.
inside the period-3 window of the quadratic map where N_1..N_3 = 2, 4, 8
while the entropy is the log of the golden mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import quadratic
from .continuation import (SolverOptions, all_words, build_anchor_fullshift,
                           continue_anchor, markov_anchors)
from .core import Params
from .errors import InvalidParameter

DISTINCT_TOL = 1e-8
MAX_PERIOD = 14


class Method(str, Enum):
    LAST_ROW = "last"
    MAX_ROW = "max"
    LINEAR_FIT = "fit"


@dataclass(frozen=True)
class FullShift:
    pass


@dataclass(frozen=True)
class QBackbone:
    r_hat: float | None = None


@dataclass(frozen=True)
class EntropyRow:
    n: int
    count: int
    h_n: float


@dataclass(frozen=True)
class EntropyTable:
    rows: tuple
    estimate: float
    method: Method
    failures: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "count", "h_n"])
            for row in self.rows:
                w.writerow([row.n, row.count, repr(row.h_n)])
            w.writerow(["estimate", self.method.value, repr(self.estimate)])


def make_table(counts: dict, method: Method | str = Method.LAST_ROW,
               failures: dict | None = None) -> EntropyTable:
    method = Method(method)
    rows = tuple(EntropyRow(n, c, math.log(c) / n if c > 0 else -math.inf)
                 for n, c in sorted(counts.items()))
    usable = [r for r in rows if r.count > 0]
    if not usable:
        est = -math.inf
    elif method is Method.MAX_ROW:
        est = max(r.h_n for r in usable)
    elif method is Method.LAST_ROW:
        est = usable[-1].h_n
    else:
        if len(usable) < 2:
            est = usable[0].h_n
        else:
            n = np.array([r.n for r in usable], dtype=float)
            est = float(np.polyfit(n, np.log([r.count for r in usable]), 1)[0])
    return EntropyTable(rows=rows, estimate=est, method=method, failures=dict(failures or {}))


def _distinct(orbits: list[np.ndarray]) -> int:
    kept: list[np.ndarray] = []
    for x in orbits:
        if all(np.max(np.abs(x - y)) > DISTINCT_TOL for y in kept):
            kept.append(x)
    return len(kept)


def henon_periodic_census(p: Params, n: int, family=FullShift(),
                          opts: SolverOptions | None = None) -> tuple[int, int]:
    """(count of distinct continued period-n points, failed continuations)."""
    if not 1 <= n <= MAX_PERIOD:
        raise InvalidParameter(f"period must be in 1..{MAX_PERIOD}")
    if isinstance(family, QBackbone):
        r_hat = p.r if family.r_hat is None else family.r_hat
        anchors = markov_anchors(r_hat, n)
    else:
        anchors = [build_anchor_fullshift(w) for w in all_words(n)]
    if p.eps == 0.0:
        return len(anchors), 0
    orbits = []
    failed = 0
    for anchor in anchors:
        res = continue_anchor(p, anchor, opts)
        if res.converged:
            orbits.append(res.orbit)
        else:
            failed += 1
    return _distinct(orbits), failed


def count_henon_periodic(p: Params, n: int, family=FullShift(),
                         opts: SolverOptions | None = None) -> int:
    return henon_periodic_census(p, n, family, opts)[0]


def entropy_estimate(p: Params, max_n: int, family=FullShift(),
                     method: Method | str = Method.LAST_ROW,
                     opts: SolverOptions | None = None) -> EntropyTable:
    if not 1 <= max_n <= MAX_PERIOD:
        raise InvalidParameter(f"max_n must be in 1..{MAX_PERIOD}")
    counts, failures = {}, {}
    for n in range(1, max_n + 1):
        counts[n], failed = henon_periodic_census(p, n, family, opts)
        if failed:
            failures[n] = failed
    return make_table(counts, method, failures)


def quadratic_entropy(a: float, max_n: int, method: Method | str = Method.LAST_ROW) -> EntropyTable:
    """Entropy of Q_a on Lambda from counts of its period-n points."""
    if not 1 <= max_n <= MAX_PERIOD:
        raise InvalidParameter(f"max_n must be in 1..{MAX_PERIOD}")
    cls = quadratic.classify(a)
    counts = {n: len(quadratic.q_periodic_points(a, n, cls).lambda_points)
              for n in range(1, max_n + 1)}
    return make_table(counts, method)
