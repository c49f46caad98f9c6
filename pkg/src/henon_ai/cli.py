"""Command line interface.

Subcommands: classify-quadratic, continue, orbits, entropy, scan,
transform, verify.  Exit codes: 0 success, 1 partial result or
non-convergence, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import entropy, hyperbolicity, paramspace, quadratic
from .continuation import (ConstantB, ConstantRhat, SolverOptions, SymbolWord, TableLookup,
                           all_words, assemble_residual, build_anchor_fullshift,
                           build_anchor_markov, continue_anchor, from_record,
                           markov_anchors, orbit_to_planar, to_record)
from .core import Params
from .errors import DomainError, HenonAIError, InvalidParameter


@dataclass
class RunReport:
    exit_code: int
    artifacts: list = field(default_factory=list)
    summary: str = ""


class UsageError(Exception):
    pass


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _add_params(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("parameters (give --a/--b or --eps/--r)")
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--eps", type=float)
    g.add_argument("--r", type=float)


def _checked(make, u, v) -> Params:
    try:
        return make(u, v)
    except InvalidParameter as exc:
        raise UsageError(str(exc)) from None


def _params(ns) -> Params:
    ab = ns.a is not None or ns.b is not None
    er = ns.eps is not None or ns.r is not None
    if ab and er:
        raise UsageError("--a/--b and --eps/--r are mutually exclusive")
    if ab:
        if ns.a is None or ns.b is None:
            raise UsageError("--a and --b must be given together")
        return _checked(Params.from_ab, ns.a, ns.b)
    if er:
        if ns.eps is None or ns.r is None:
            raise UsageError("--eps and --r must be given together")
        return _checked(Params.from_eps_r, ns.eps, ns.r)
    raise UsageError("parameters required: --a/--b or --eps/--r")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-12, help="residual tolerance")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--homotopy-steps", type=int, default=1)
    p.add_argument("--path", default=None,
                   help="constant-b | constant-rhat | table:<csv file of eps,r>")


def _path_rule(spec):
    if spec is None:
        return None
    if spec == "constant-b":
        return ConstantB()
    if spec == "constant-rhat":
        return ConstantRhat()
    if spec.startswith("table:"):
        try:
            return TableLookup.from_file(spec[len("table:"):])
        except (OSError, ValueError, InvalidParameter) as exc:
            raise UsageError(f"bad path table: {exc}") from None
    raise UsageError(f"unknown path rule {spec!r}")


def _solver_opts(ns) -> SolverOptions:
    if ns.tol <= 0 or ns.max_iter < 1 or ns.homotopy_steps < 1:
        raise UsageError("--tol must be positive, --max-iter and --homotopy-steps >= 1")
    return SolverOptions(residual_tol=ns.tol, max_iter=ns.max_iter,
                         homotopy_steps=ns.homotopy_steps, path=_path_rule(ns.path))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="henon-ai", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify-quadratic", help="classify Q_a(x) = sqrt(a)(1 - x^2)")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--max-iter", type=int, default=quadratic.WARMUP)
    p.add_argument("--r-escape", type=float, default=None)
    p.add_argument("--out")

    p = sub.add_parser("continue", help="continue one anchor to a periodic orbit")
    _add_params(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--word", type=_word_arg)
    src.add_argument("--q-anchor", type=float)
    p.add_argument("--period", type=int, help="period of --q-anchor")
    p.add_argument("--r-hat", type=float, help="r_hat for --q-anchor (default: r)")
    p.add_argument("--solver", choices=["newton", "contraction"], default="newton")
    p.add_argument("--projection", choices=["backward", "forward"], default="backward")
    _add_solver(p)
    p.add_argument("--out")

    p = sub.add_parser("orbits", help="continue every anchor of one period")
    _add_params(p)
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--family", choices=["fullshift", "qbackbone"], default="fullshift")
    p.add_argument("--threads", type=int, default=None)
    _add_solver(p)
    p.add_argument("--out")

    p = sub.add_parser("entropy", help="entropy from periodic point counts")
    _add_params(p)
    p.add_argument("--max-period", type=int, required=True)
    p.add_argument("--family", choices=["fullshift", "qbackbone", "quadratic"],
                   default="fullshift")
    p.add_argument("--method", choices=[m.value for m in entropy.Method],
                   default=entropy.Method.LAST_ROW.value)
    p.add_argument("--threads", type=int, default=None)
    _add_solver(p)
    p.add_argument("--out")

    p = sub.add_parser("scan", help="plateau raster in a parameter chart")
    p.add_argument("--chart", choices=[c.value for c in paramspace.Chart], required=True)
    p.add_argument("--window", type=float, nargs=4, required=True,
                   metavar=("UMIN", "UMAX", "VMIN", "VMAX"))
    p.add_argument("--grid", type=int, nargs=2, required=True, metavar=("W", "H"))
    p.add_argument("--m", type=int, default=4, help="word length")
    p.add_argument("--hemisphere", choices=["north", "south"], default="north")
    p.add_argument("--a-max", type=float, default=100.0, help="extent of b=+-1 overlays")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--homotopy-steps", type=int, default=12)
    p.add_argument("--path", default=None)
    p.add_argument("--out", required=True, help="base path for .csv/.pgm/_overlays.csv")

    p = sub.add_parser("transform", help="map parameters through a chart")
    p.add_argument("--chart", choices=[c.value for c in paramspace.Chart], required=True)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--inverse", type=float, nargs="+", metavar="C")

    p = sub.add_parser("verify", help="re-check an orbit record")
    p.add_argument("--orbit-file", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    return parser


def _word_arg(text: str) -> SymbolWord:
    try:
        return SymbolWord.parse(text)
    except HenonAIError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _cmd_classify(ns) -> RunReport:
    if not ns.a > 0 or ns.max_iter < 1:
        raise UsageError("--a must be positive and --max-iter >= 1")
    cls = quadratic.classify(ns.a, ns.max_iter, ns.r_escape)
    rec = {"a": ns.a, "class": type(cls).__name__}
    rec.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cls).items()})
    text = json.dumps(rec)
    print(text)
    arts = []
    if ns.out:
        _dump_json(rec, ns.out)
        arts.append(ns.out)
    return RunReport(0 if quadratic.is_hyperbolic(cls) else 1, arts, text)


def _cmd_continue(ns) -> RunReport:
    p = _params(ns)
    opts = _solver_opts(ns)
    if ns.word is not None:
        anchor = build_anchor_fullshift(ns.word)
    else:
        if ns.period is None or ns.period < 1:
            raise UsageError("--q-anchor needs --period >= 1")
        r_hat = p.r if ns.r_hat is None else ns.r_hat
        anchor = build_anchor_markov(r_hat, ns.q_anchor, ns.period)
    res = continue_anchor(p, anchor, opts, solver=ns.solver)
    rec = to_record(res)
    if res.converged:
        rec["projection"] = ns.projection
        rec["planar"] = [list(pt) for pt in orbit_to_planar(res, ns.projection)]
    arts = []
    if ns.out:
        _dump_json(rec, ns.out)
        arts.append(ns.out)
    summary = (f"converged={res.converged} residual={res.residual_norm:.3e} "
               f"iterations={res.iterations} min_singular={res.min_singular:.6g}")
    print(summary)
    return RunReport(0 if res.converged else 1, arts, summary)


def _anchors(p: Params, n: int, family: str):
    if family == "qbackbone":
        return markov_anchors(p.r, n)
    return [build_anchor_fullshift(w) for w in all_words(n)]


def _continue_job(args):
    p, anchor, opts = args
    return continue_anchor(p, anchor, opts)


def _map(fn, jobs, threads):
    threads = threads or paramspace.default_threads()
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _cmd_orbits(ns) -> RunReport:
    p = _params(ns)
    opts = _solver_opts(ns)
    if not 1 <= ns.period <= entropy.MAX_PERIOD:
        raise UsageError(f"--period must be in 1..{entropy.MAX_PERIOD}")
    anchors = _anchors(p, ns.period, ns.family)
    results = _map(_continue_job, [(p, a, opts) for a in anchors], ns.threads)
    good = [r for r in results if r.converged]
    distinct = entropy._distinct([r.orbit for r in good])
    arts = []
    if ns.out:
        _dump_json([to_record(r) for r in results], ns.out)
        arts.append(ns.out)
    summary = f"period={ns.period} anchors={len(anchors)} converged={len(good)} distinct={distinct}"
    print(summary)
    ok = len(good) == len(anchors) and distinct == len(anchors)
    return RunReport(0 if ok else 1, arts, summary)


def _cmd_entropy(ns) -> RunReport:
    if not 1 <= ns.max_period <= entropy.MAX_PERIOD:
        raise UsageError(f"--max-period must be in 1..{entropy.MAX_PERIOD}")
    if ns.family == "quadratic":
        if ns.a is None or ns.b is not None or ns.eps is not None or ns.r is not None:
            raise UsageError("--family quadratic takes --a only")
        table = entropy.quadratic_entropy(ns.a, ns.max_period, ns.method)
    else:
        p = _params(ns)
        family = entropy.QBackbone() if ns.family == "qbackbone" else entropy.FullShift()
        table = entropy.entropy_estimate(p, ns.max_period, family, ns.method, _solver_opts(ns))
    arts = []
    if ns.out:
        table.to_csv(ns.out)
        arts.append(ns.out)
    summary = f"estimate={table.estimate:.10g} method={table.method.value}"
    if table.failures:
        summary += f" failures={table.failures}"
    for row in table.rows:
        print(f"{row.n},{row.count},{row.h_n:.10g}")
    print(summary)
    return RunReport(1 if table.failures else 0, arts, summary)


def emit_raster(raster: paramspace.ScanRaster, basepath, a_max: float = 100.0) -> RunReport:
    base = str(basepath)
    paths = [base + ".csv", base + ".pgm", base + "_overlays.csv"]
    try:
        paramspace.write_raster_csv(raster, paths[0])
        paramspace.write_raster_pgm(raster, paths[1])
        paramspace.write_overlays_csv(raster.chart, paths[2], a_max=a_max)
    except OSError as exc:
        return RunReport(1, [], f"could not write raster: {exc}")
    counts = {}
    for c in raster.cells:
        counts[c.kind.value] = counts.get(c.kind.value, 0) + 1
    return RunReport(0, paths, " ".join(f"{k}={v}" for k, v in sorted(counts.items())))


def _cmd_scan(ns) -> RunReport:
    if not 1 <= ns.m <= 8:
        raise UsageError("--m must be in 1..8")
    if ns.grid[0] < 1 or ns.grid[1] < 1 or ns.grid[0] * ns.grid[1] > 10 ** 6:
        raise UsageError("--grid must have between 1 and 10^6 cells")
    opts = _solver_opts(ns)
    raster = paramspace.scan(ns.chart, tuple(ns.window), tuple(ns.grid), ns.m, opts,
                             threads=ns.threads or paramspace.default_threads(),
                             hemisphere=ns.hemisphere)
    report = emit_raster(raster, ns.out, ns.a_max)
    print(report.summary)
    return report


def _cmd_transform(ns) -> RunReport:
    chart = paramspace.Chart(ns.chart)
    if ns.inverse is not None:
        if ns.a is not None or ns.b is not None:
            raise UsageError("--inverse excludes --a/--b")
        need = 3 if chart is paramspace.Chart.SPHERE else 2
        if len(ns.inverse) != need:
            raise UsageError(f"chart {chart.value} takes {need} coordinates")
        fn, args = paramspace.chart_inverse, (chart, ns.inverse)
    else:
        if ns.a is None or ns.b is None:
            raise UsageError("--a and --b are required")
        fn, args = paramspace.chart_forward, (chart, ns.a, ns.b)
    try:
        out = fn(*args)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    text = " ".join(f"{v + 0.0:.17g}" for v in out)
    print(text)
    return RunReport(0, [], text)


def verify_record(rec: dict, tol: float = 1e-10) -> dict:
    """Recompute residual, monodromy and shift equivariance of an orbit record."""
    res = from_record(rec)
    p = res.params
    checks = {}
    residual = float(np.max(np.abs(assemble_residual(p, res.orbit))))
    checks["residual"] = {"value": residual, "ok": residual <= tol}
    n = len(res.orbit)
    if p.eps > 0:
        mono = hyperbolicity.monodromy(p, res)
        expect = p.b ** n
        det_err = abs(mono.det_check - expect)
        checks["monodromy"] = {"moduli": list(mono.moduli), "margin": mono.margin,
                               "ok": mono.quasi_hyperbolic}
        checks["det_check"] = {"value": mono.det_check, "expected": expect,
                               "ok": det_err <= 1e-8 * max(1.0, abs(expect))}
    anchor = res.anchor
    if anchor is not None and n > 1:
        if anchor.word is not None:
            shifted = build_anchor_fullshift(anchor.word.shift(1))
        else:
            shifted = build_anchor_markov(anchor.r_hat, float(anchor.values[1]), n)
        other = continue_anchor(p, shifted, SolverOptions(residual_tol=min(tol, 1e-12)))
        dist = float(np.max(np.abs(other.orbit - np.roll(res.orbit, -1)))) \
            if other.converged else math.inf
        checks["shift_equivariance"] = {"value": dist, "ok": dist <= 1e-9}
    return checks


def _cmd_verify(ns) -> RunReport:
    try:
        rec = json.loads(Path(ns.orbit_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read orbit file: {exc}") from None
    if not rec.get("converged", False):
        print("orbit record is not converged")
        return RunReport(1, [], "orbit record is not converged")
    checks = verify_record(rec, ns.tol)
    ok = all(c["ok"] for c in checks.values())
    text = json.dumps(checks)
    print(text)
    arts = []
    if ns.out:
        _dump_json(checks, ns.out)
        arts.append(ns.out)
    return RunReport(0 if ok else 1, arts, text)


COMMANDS = {
    "classify-quadratic": _cmd_classify,
    "continue": _cmd_continue,
    "orbits": _cmd_orbits,
    "entropy": _cmd_entropy,
    "scan": _cmd_scan,
    "transform": _cmd_transform,
    "verify": _cmd_verify,
}


def _glue_words(argv):
    """Join ``--word -+`` into ``--word= -+`` so argparse does not see an option.

    The leading space keeps argparse from discarding a bare ``--`` value;
    word parsing strips it.
    """
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--word":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--word= {nxt}")
        elif tok.startswith("--word="):
            out.append("--word= " + tok[len("--word="):])
        else:
            out.append(tok)
    return out


def run(argv=None) -> RunReport:
    parser = build_parser()
    argv = _glue_words(sys.argv[1:] if argv is None else list(argv))
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return RunReport(int(exc.code or 0), [], "usage")
    try:
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"{parser.prog} {ns.command}: error: {exc}", file=sys.stderr)
        return RunReport(2, [], str(exc))
    except HenonAIError as exc:
        print(f"{parser.prog} {ns.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return RunReport(1, [], str(exc))


def main(argv=None) -> None:
    sys.exit(run(argv).exit_code)
