import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmano.errors import QDomainError
from qmano.fricke import (
    ThetaParams,
    a_to_A,
    classify_fiber,
    duplicate_lines,
    fricke_eval,
    goldman_bracket,
    gradient_determinant,
    involution,
    jimbo_cross_check,
    jimbo_param,
    jimbo_param_d,
    jimbo_parameter_of,
    lines_24,
    orbit,
    singular_point_search,
    smoothness,
    surface_point,
    two_line_values,
)

from conftest import rng

cplx = st.builds(complex, st.floats(-2, 2), st.floats(-2, 2))
CAYLEY_SINGULAR = {(-2, -2, -2), (-2, 2, 2), (2, -2, 2), (2, 2, -2)}


def _random_e(g):
    return ThetaParams(tuple(np.exp(g.normal(size=4) * 0.4 + 1j * g.uniform(-3, 3, size=4))))


def _surface_point(a, X0, Xt):
    A = a_to_A(a)
    b = X0 * Xt - A.A1
    c = X0 ** 2 + Xt ** 2 - A.A0 * X0 - A.At * Xt + A.Ainf
    return (X0, Xt, (-b + cmath.sqrt(b * b - 4 * c)) / 2)


def test_a_to_A_values():
    assert a_to_A((0, 0, 0, 0)) == a_to_A([0j] * 4)
    A = a_to_A((0, 0, 0, 0))
    assert (A.A0, A.At, A.A1, A.Ainf) == (0, 0, 0, -4)
    A = a_to_A((2, 2, 2, 2))
    assert (A.A0, A.At, A.A1, A.Ainf) == (8, 8, 8, 28)


def test_theta_params():
    tp = ThetaParams.from_thetas((0.5, 0.5, 0.5, 0.5))
    assert np.allclose(tp.e, [1j] * 4) and np.allclose(tp.a, [0] * 4, atol=1e-15)
    tp = ThetaParams.from_a((3, 0.5j, -1, 2.5))
    assert np.allclose(tp.a, (3, 0.5j, -1, 2.5))
    with pytest.raises(QDomainError):
        ThetaParams((1, 0, 1, 1))


def test_cayley_cubic():
    a = (0, 0, 0, 0)
    for X in CAYLEY_SINGULAR:
        F, grad = fricke_eval(X, a)
        assert F == 0 and grad == (0, 0, 0)
    assert surface_point((2, 2, -2), a).on_surface
    assert not surface_point((1, 1, 0), a).on_surface


def test_singular_point_search_cayley():
    hits = singular_point_search((0, 0, 0, 0), starts=2000, seed=0)
    found = {tuple(int(round(v.real)) for v in h) for h in hits}
    assert found == CAYLEY_SINGULAR
    g = rng(10)
    assert singular_point_search(_random_e(g), starts=500, seed=1) == []


@given(cplx, cplx, cplx)
def test_gradient_matches_finite_differences(x0, xt, x1):
    a = (0.3, -1.2 + 0.5j, 2.1, 0.7j)
    X = (x0, xt, x1)
    _, grad = fricke_eval(X, a)
    h = 1e-6
    for m in range(3):
        Xp, Xm = list(X), list(X)
        Xp[m] += h
        Xm[m] -= h
        fd = (fricke_eval(Xp, a)[0] - fricke_eval(Xm, a)[0]) / (2 * h)
        assert abs(fd - grad[m]) < 1e-6 * max(1, abs(grad[m]))


@given(cplx, cplx, cplx, st.sampled_from(["0", "t", "1"]))
def test_determinant_identity(x0, xt, x1, k):
    a = (0.3 - 0.1j, -1.2 + 0.5j, 2.1, 0.7j)
    X = (x0, xt, x1)
    F, grad = fricke_eval(X, a)
    kk = "0t1".index(k)
    assert abs(gradient_determinant(X, a, k) - (grad[kk] ** 2 - 4 * F)) < 1e-9 * max(1, abs(F), abs(grad[kk]) ** 2)


def test_goldman_bracket():
    a = (0.3, 1j, -0.5, 1.4)
    X = (0.2 + 1j, -0.7, 1.1 - 0.3j)
    _, grad = fricke_eval(X, a)
    assert goldman_bracket(X, a, "0", "t") == grad[2]
    assert goldman_bracket(X, a, "t", "1") == grad[0]
    assert goldman_bracket(X, a, "1", "0") == grad[1]
    for i in "0t1":
        assert goldman_bracket(X, a, i, i) == 0
        for j in "0t1":
            assert goldman_bracket(X, a, i, j) == -goldman_bracket(X, a, j, i)


def test_24_lines_on_surface():
    g = rng(11)
    for _ in range(3):
        e = _random_e(g)
        lines = lines_24(e)
        assert len(lines) == 24
        assert not duplicate_lines(lines)
        for ln in lines:
            for t in (0, 1.3 - 0.4j, -2.2j):
                F, _ = fricke_eval(ln.point(t), e)
                assert abs(F) < 1e-11 * max(1, max(abs(v) for v in ln.point(t))) ** 3


def test_smoothness():
    g = rng(12)
    rep = smoothness(_random_e(g))
    assert rep.smooth and rep.lines_distinct and rep.two_line_values_distinct
    assert rep.resonant == (False,) * 4 and len(rep.products) == 8
    # e = i everywhere gives the Cayley cubic: singular, resonance-free, lines collide
    rep = smoothness((1j, 1j, 1j, 1j))
    assert not rep.smooth and not rep.lines_distinct
    assert rep.resonant == (False,) * 4
    assert smoothness((1, 2, 3, 4)).resonant == (True, False, False, False)


def test_classify_fiber():
    g = rng(13)
    e = _random_e(g)
    assert classify_fiber(e, 2).kind == "Parabola"
    assert classify_fiber(e, -2, l="t").kind == "Parabola"
    for l in ("0", "t", "1"):
        for c in two_line_values(e, l):
            fc = classify_fiber(e, c, l=l)
            assert fc.kind == "TwoLines" and len(fc.lines) == 2
        fc = classify_fiber(e, 0.7 + 0.2j, l=l)
        assert fc.kind == "GenericConic"
        for X in fc.points:
            assert surface_point(X, e, tol=1e-9).on_surface


def test_jimbo_parameterization():
    g = rng(14)
    e = _random_e(g)
    X1 = 0.4 - 1.1j
    seen = []
    for s in (0.5, 1.7 - 0.3j, -2j, 3.0):
        X0, Xt = jimbo_param(e, X1, s)
        assert surface_point((X0, Xt, X1), e, tol=1e-11).on_surface
        assert abs(jimbo_parameter_of(e, (X0, Xt, X1)) - s) < 1e-10 * abs(s)
        seen.append((X0, Xt))
    assert min(abs(p[0] - q[0]) + abs(p[1] - q[1]) for i, p in enumerate(seen) for q in seen[:i]) > 1e-3
    with pytest.raises(QDomainError):
        jimbo_param(e, 2.0, 1.0)
    with pytest.raises(QDomainError):
        jimbo_param(e, two_line_values(e, "1")[0], 1.0)


def test_jimbo_trigonometric_route():
    g = rng(15)
    for _ in range(20):
        th = g.uniform(0.05, 0.95, size=4) + 1j * g.normal(size=4) * 0.1
        sigma1 = complex(g.uniform(0.1, 0.9), g.normal() * 0.1)
        s = cmath.exp(complex(g.normal(), g.uniform(-3, 3)))
        X = jimbo_param_d(th, sigma1, s)
        a = ThetaParams.from_thetas(th)
        assert surface_point(X, a, tol=1e-9).on_surface
        assert abs(X[2] - 2 * cmath.cos(cmath.pi * sigma1)) < 1e-12
        assert jimbo_cross_check(th, sigma1, s) < 1e-10


def test_involutions():
    g = rng(16)
    e = _random_e(g)
    X = _surface_point(e, 0.3 + 0.2j, -0.8 + 0.5j)
    assert surface_point(X, e).on_surface
    for l in ("0", "t", "1"):
        Y = involution(X, e, l)
        assert Y.on_surface
        Z = involution(Y.X, e, l).X
        assert max(abs(u - v) for u, v in zip(X, Z)) < 1e-12


def test_orbit():
    e = ThetaParams.from_a((0.3, 0.5, -0.2, 0.8))
    X = _surface_point(e, 0.4, -0.3)
    pts = orbit(X, e, 60)
    assert len(pts) == 60
    distinct = []
    for p in pts:
        assert surface_point(p, e, tol=1e-8).on_surface
        if all(max(abs(u - v) for u, v in zip(p, d)) > 1e-8 for d in distinct):
            distinct.append(p)
    assert len(distinct) > 50
