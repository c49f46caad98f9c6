import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve

from henon_ai.continuation import (AnchorSequence, ConstantB, ConstantRhat, SolverOptions,
                                   SymbolWord, TableLookup, all_words, assemble_jacobian,
                                   assemble_residual, build_anchor_fullshift, build_anchor_markov,
                                   continue_anchor, contraction_continue, from_record,
                                   homotopy_path, markov_anchors, neumann_solve, newton_continue,
                                   orbit_to_planar, to_record)
from henon_ai.core import Params, henon_step
from henon_ai.errors import (Divergence, InvalidParameter, NoConvergence, NotConverged,
                             NotOnLambda)
from henon_ai.quadratic import q_periodic_points

P10 = Params.from_ab(10, 0.3)
RHAT3 = 1 / math.sqrt(3)

words = st.lists(st.sampled_from([1, -1]), min_size=1, max_size=8).map(
    lambda s: SymbolWord(tuple(s)))


def constant_root(p):
    s = p.eps + p.r
    return (-s + math.sqrt(s * s + 4.0)) / 2.0


def test_word_parsing():
    w = SymbolWord.parse("+-+")
    assert w.symbols == (1, -1, 1) and str(w) == "+-+"
    assert str(w.shift(1)) == "-++"
    with pytest.raises(InvalidParameter):
        SymbolWord.parse("+x")
    with pytest.raises(InvalidParameter):
        SymbolWord(())
    assert len(list(all_words(4))) == 16


def test_fullshift_anchor():
    assert list(build_anchor_fullshift(SymbolWord.parse("+")).values) == [1.0]
    a = build_anchor_fullshift(SymbolWord.parse("+-"))
    assert list(a.values) == [1.0, -1.0] and a.r_hat == 0.0


@given(words)
def test_fullshift_anchor_is_exact_zero(w):
    a = build_anchor_fullshift(w)
    assert a.residual() == 0.0
    assert np.all(assemble_residual(Params.from_eps_r(0, 0), a.values) == 0.0)


def test_markov_anchor_fixed_point():
    xs = (-1 + math.sqrt(13)) / (2 * math.sqrt(3))
    a = build_anchor_markov(RHAT3, xs, 1)
    assert a.values[0] == pytest.approx(0.75216, abs=1e-5)
    assert a.residual() <= 1e-12


def test_markov_anchor_two_cycle():
    pts = [p.x for p in q_periodic_points(3, 2).points]
    fixed = {round(x, 9) for x in (p.x for p in q_periodic_points(3, 1).points)}
    cyc = [x for x in pts if round(x, 9) not in fixed]
    a = build_anchor_markov(RHAT3, cyc[0], 2)
    assert a.values[0] != pytest.approx(a.values[1])
    assert a.residual() <= 1e-12
    s = math.sqrt(3)
    # x_{i-1} = Q(x_i)
    assert a.values[1] == pytest.approx(s * (1 - a.values[0] ** 2), abs=1e-14)


def test_markov_anchor_rejects_attractor():
    xs = (-1 + math.sqrt(3)) / (2 * math.sqrt(0.5))
    with pytest.raises(NotOnLambda):
        build_anchor_markov(1 / math.sqrt(0.5), xs, 1)
    with pytest.raises(NotOnLambda):
        build_anchor_markov(RHAT3, 0.1, 1)


def test_markov_anchors_period_three():
    anchors = markov_anchors(RHAT3, 3)
    assert len(anchors) == 8
    for a in anchors:
        x = a.values
        assert np.max(np.abs(np.roll(x, 1) - math.sqrt(3) * (1 - x * x))) <= 1e-12


def test_residual_examples():
    assert np.all(assemble_residual(Params.from_eps_r(0, 0), [1, -1, 1, -1]) == 0)
    x = np.full(3, 0.81536)
    assert np.max(np.abs(assemble_residual(P10, x))) <= 1e-4


@given(words, st.floats(0, 1), st.floats(-1, 1))
def test_residual_at_anchor_bound(w, eps, r):
    p = Params.from_eps_r(eps, r)
    x = build_anchor_fullshift(w).values
    res = assemble_residual(p, x)
    assert np.allclose(res, eps * np.roll(x, -1) + r * np.roll(x, 1), atol=1e-15)
    assert np.max(np.abs(res)) <= (eps + abs(r)) * np.max(np.abs(x)) + 1e-15


def test_jacobian_examples():
    assert assemble_jacobian(Params.from_eps_r(0, 0), [1.0]).tolist() == [[2.0]]
    J = assemble_jacobian(P10, [1.0, 1.0, 1.0])
    assert np.allclose(np.diag(J), 2.0)
    e, r = P10.eps, P10.r
    assert J[0, 1] == J[1, 2] == J[2, 0] == e
    assert J[1, 0] == J[2, 1] == J[0, 2] == r
    assert e == pytest.approx(0.31623, abs=1e-5) and r == pytest.approx(0.09487, abs=1e-5)
    assert assemble_jacobian(P10, [0.5]).item() == pytest.approx(1 + e + r, rel=1e-15)
    J2 = assemble_jacobian(P10, [0.5, -0.5])
    assert J2[0, 1] == J2[1, 0] == pytest.approx(e + r, rel=1e-15)
    J0 = assemble_jacobian(Params.from_eps_r(0, 0), [0.0, 1.0])
    assert np.linalg.svd(J0, compute_uv=False).min() == 0.0


def test_jacobian_finite_differences():
    rng = np.random.default_rng(7)
    h = 1e-6
    for n in (1, 2, 3, 7):
        x = rng.uniform(-1.2, 1.2, n)
        J = assemble_jacobian(P10, x)
        for _ in range(50):
            d = rng.normal(size=n)
            d /= np.linalg.norm(d)
            fd = (assemble_residual(P10, x + h * d) - assemble_residual(P10, x - h * d)) / (2 * h)
            assert np.linalg.norm(fd - J @ d) <= 1e-6


def test_newton_at_ai_limit_returns_anchor():
    anchor = build_anchor_fullshift(SymbolWord.parse("+--+"))
    res = newton_continue(Params.from_eps_r(0, 0), anchor)
    assert res.iterations == 0 and res.converged
    assert np.array_equal(res.orbit, anchor.values)


def test_newton_constant_word():
    res = newton_continue(P10, build_anchor_fullshift(SymbolWord.parse("+")))
    xs = constant_root(P10)
    assert res.converged and res.residual_norm <= 1e-12
    assert res.orbit[0] == pytest.approx(xs, abs=1e-14)
    assert res.orbit[0] == pytest.approx(0.81536, abs=5e-6)
    assert res.anchor_distance == pytest.approx(0.1846, abs=1e-4)
    assert res.min_singular > 0


def test_newton_all_words_length_8():
    orbits = []
    for w in all_words(8):
        res = newton_continue(P10, build_anchor_fullshift(w))
        assert res.converged and res.residual_norm <= 1e-12 and res.min_singular > 0
        orbits.append(res.orbit)
    X = np.array(orbits)
    d = np.max(np.abs(X[:, None, :] - X[None, :, :]), axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1.0


def test_shift_equivariance():
    for n in range(1, 9):
        for w in all_words(n):
            x = newton_continue(P10, build_anchor_fullshift(w)).orbit
            y = newton_continue(P10, build_anchor_fullshift(w.shift(1))).orbit
            assert np.max(np.abs(y - np.roll(x, -1))) <= 1e-10


def test_uniqueness_in_ball():
    rng = np.random.default_rng(3)
    for n in range(1, 7):
        for w in all_words(n):
            anchor = build_anchor_fullshift(w)
            ref = newton_continue(P10, anchor).orbit
            for _ in range(100 if n <= 2 else 8):
                d = rng.uniform(-1, 1, n)
                d *= rng.uniform(0, 0.2) / max(np.max(np.abs(d)), 1e-300)
                opts = SolverOptions(initial=anchor.values + d)
                assert np.max(np.abs(newton_continue(P10, anchor, opts).orbit - ref)) <= 1e-9


def test_anchor_distance_shrinks_with_eps():
    anchor = build_anchor_fullshift(SymbolWord.parse("+-"))
    ps = [Params.from_ab(a, 0.3) for a in (1e2, 1e3, 1e4)]
    dist = [newton_continue(p, anchor).anchor_distance for p in ps]
    assert dist[0] > dist[1] > dist[2]
    K = 1.25 * dist[-1] / ps[-1].eps
    assert all(d <= K * p.eps for d, p in zip(dist, ps))


def test_contraction_agrees_with_newton():
    for w in ("+-", "++-", "+--+-", "+"):
        anchor = build_anchor_fullshift(SymbolWord.parse(w))
        a = newton_continue(P10, anchor)
        b = contraction_continue(P10, anchor)
        assert b.converged
        assert np.max(np.abs(a.orbit - b.orbit)) <= 1e-9


def test_contraction_at_ai_limit():
    anchor = build_anchor_fullshift(SymbolWord.parse("+-+"))
    res = contraction_continue(Params.from_eps_r(0, 0), anchor)
    assert res.iterations == 0 and np.array_equal(res.orbit, anchor.values)


def test_contraction_fails_outside_regime():
    anchor = build_anchor_fullshift(SymbolWord.parse("+--+-"))
    p = Params.from_ab(1.2, 0.3)
    try:
        res = contraction_continue(p, anchor)
    except NoConvergence as exc:
        assert exc.result is not None and not exc.result.converged
    else:
        assert res.residual_norm <= 1e-12


def test_newton_failure_carries_result():
    anchor = build_anchor_fullshift(SymbolWord.parse("+--+-++"))
    res = continue_anchor(Params.from_ab(0.3, 2.0), anchor, SolverOptions(max_iter=5))
    assert not res.converged


@settings(max_examples=40, deadline=None)
@given(words, st.floats(0.0, 0.3), st.floats(-0.3, 0.3))
def test_converged_results_satisfy_invariants(w, eps, r):
    p = Params.from_eps_r(eps, r)
    res = continue_anchor(p, build_anchor_fullshift(w))
    assert res.converged
    assert np.max(np.abs(assemble_residual(p, res.orbit))) <= 1e-12
    assert res.min_singular > 0
    b = newton_continue(p, build_anchor_fullshift(w))
    c = contraction_continue(p, build_anchor_fullshift(w))
    assert np.max(np.abs(b.orbit - c.orbit)) <= 1e-9


def test_homotopy_path_rules():
    p = Params.from_ab(4, 0.5)
    path = homotopy_path(p, 5, 1e-3, ConstantB())
    assert path[-1] == p
    eps = [q.eps for q in path]
    assert np.all(np.diff(eps) > 0)
    assert all(q.b == pytest.approx(0.5, rel=1e-12) for q in path)
    path = homotopy_path(p, 5, 1e-3, ConstantRhat())
    assert all(q.r == pytest.approx(p.r, rel=1e-15) for q in path)
    table = TableLookup([0.0, 1.0], [0.0, 0.5])
    path = homotopy_path(p, 4, 1e-3, table)
    assert path[1].r == pytest.approx(0.5 * path[1].eps, rel=1e-12)
    assert homotopy_path(p, 1, 1e-3, ConstantB()) == [p]


def test_table_lookup_file(tmp_path):
    f = tmp_path / "path.csv"
    f.write_text("eps,r\n0,0\n0.5,0.1\n1,0.3\n")
    t = TableLookup.from_file(f)
    assert t.r_at(0.25, P10) == pytest.approx(0.05)


def test_homotopy_reaches_harder_parameters():
    # Markov anchor continued with r held at r_hat.
    anchor = markov_anchors(RHAT3, 1)[1]
    p = Params.from_eps_r(0.05, RHAT3)
    res = newton_continue(p, anchor, SolverOptions(homotopy_steps=6))
    assert res.converged and res.anchor_distance < 0.1


def test_neumann_diagonal_case():
    anchor = AnchorSequence(values=np.array([1.0, 1.0]))
    assert list(neumann_solve(0.0, anchor, [1.0, 1.0])) == [0.5, 0.5]


def test_neumann_constant_markov_anchor():
    anchor = markov_anchors(RHAT3, 1)[1]
    x = anchor.values[0]
    assert x == pytest.approx(0.75216, abs=1e-5)
    xi = neumann_solve(RHAT3, anchor, [1.0])
    assert xi[0] == pytest.approx(1 / (2 * x + RHAT3), abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7])
def test_neumann_matches_dense_solve(n):
    rng = np.random.default_rng(n)
    lim = Params.from_eps_r(0.0, RHAT3)
    for anchor in markov_anchors(RHAT3, n):
        eta = rng.normal(size=n)
        xi = neumann_solve(RHAT3, anchor, eta, tol=1e-14)
        ref = solve(assemble_jacobian(lim, anchor.values), eta)
        assert np.max(np.abs(xi - ref)) <= 1e-8
        lhs = RHAT3 * np.roll(xi, 1) + 2 * anchor.values * xi
        assert np.max(np.abs(lhs - eta)) <= 10 * 1e-14 * max(1, np.max(np.abs(eta))) * 10


def test_neumann_diverges_without_expansion():
    anchor = AnchorSequence(values=np.array([0.1]), r_hat=1.0)
    with pytest.raises(Divergence):
        neumann_solve(1.0, anchor, [1.0])


def test_planar_projection():
    res = newton_continue(P10, build_anchor_fullshift(SymbolWord.parse("+")))
    (pt,) = orbit_to_planar(res)
    assert pt[0] == pt[1] == res.orbit[0]
    res = newton_continue(P10, build_anchor_fullshift(SymbolWord.parse("+-")))
    u, v = res.orbit
    pts = orbit_to_planar(res)
    assert pts == [(u, v), (v, u)]
    assert np.allclose(henon_step(P10, pts[0]), pts[1], atol=1e-12)
    fwd = orbit_to_planar(res, "forward")
    assert fwd == [(u, v), (v, u)]


@settings(max_examples=30, deadline=None)
@given(words)
def test_planar_points_form_henon_orbit(w):
    res = newton_continue(P10, build_anchor_fullshift(w))
    pts = orbit_to_planar(res)
    for i, pt in enumerate(pts):
        nxt = pts[(i + 1) % len(pts)]
        assert max(abs(c - d) for c, d in zip(henon_step(P10, pt), nxt)) <= 1e-9


def test_planar_requires_convergence():
    res = continue_anchor(Params.from_ab(0.3, 2.0), build_anchor_fullshift(SymbolWord.parse("+--+-++")),
                          SolverOptions(max_iter=3))
    with pytest.raises(NotConverged):
        orbit_to_planar(res)


def test_record_round_trip():
    res = newton_continue(P10, build_anchor_fullshift(SymbolWord.parse("++-")))
    rec = json.loads(json.dumps(to_record(res)))
    back = from_record(rec)
    assert np.array_equal(back.orbit, res.orbit)
    assert back.params == res.params
    assert str(back.anchor.word) == "++-"
    mark = newton_continue(Params.from_eps_r(0.05, RHAT3), markov_anchors(RHAT3, 2)[0],
                           SolverOptions(homotopy_steps=4))
    back = from_record(json.loads(json.dumps(to_record(mark))))
    assert np.array_equal(back.anchor.values, mark.anchor.values)
