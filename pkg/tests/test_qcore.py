import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmano.errors import PoleError, QDomainError
from qmano.qcore import (
    QParam,
    annulus_rep,
    congruent,
    de_rham_solution,
    e_char,
    log_distance,
    pochhammer,
    q_log,
    theta,
    theta_D,
    theta_deriv,
)

from conftest import Q_VALUES, annulus_points

Q05 = QParam(0.5)


def test_qparam_rejects_bad_modulus():
    for q in (0, 1, 1.5, -1):
        with pytest.raises(QDomainError):
            QParam(q)


def test_theta_zero_on_minus_one():
    assert abs(theta(Q05, -1)) < 1e-14


def test_theta_at_one_matches_series_oracle():
    # bilateral sum at 30 digits
    assert theta(Q05, 1) == pytest.approx(3.2832651213103077326, rel=1e-14)


@pytest.mark.parametrize("q, x, expected", [
    (0.3 + 0.1j, 0.7 - 0.2j, 2.2342758429166878582 + 0.06858911449822424779j),
    (0.8 * cmath.exp(0.3j), -0.4 + 0.5j, 0.30713731420941465293 + 0.5218009533929475094j),
])
def test_theta_complex_q_matches_series_oracle(q, x, expected):
    assert abs(theta(QParam(q), x) - expected) <= 1e-12 * abs(expected)


def test_theta_rejects_zero():
    with pytest.raises(QDomainError):
        theta(Q05, 0)


@pytest.mark.parametrize("q", Q_VALUES)
def test_theta_vanishes_simply_on_spiral(q):
    qp = QParam(q)
    for k in range(-3, 4):
        x = -(qp.q ** k)
        d = abs(theta_deriv(qp, x))
        assert abs(theta(qp, x)) <= 1e-12 * max(1.0, d * abs(x))
        assert d > 1e-8


@pytest.mark.parametrize("q", Q_VALUES)
def test_theta_functional_equations(q):
    qp = QParam(q)

    @given(annulus_points(qp))
    def check(x):
        t = theta(qp, x)
        ref = abs(t / x)
        assert abs(theta(qp, qp.q * x) - t / x) <= 1e-10 * ref
        assert abs(theta(qp, 1 / x) - t / x) <= 1e-10 * ref

    check()


def test_theta_vectorised_matches_scalar():
    qp = QParam(0.3 + 0.1j)
    xs = np.array([0.5 + 0.2j, -0.3 + 0.9j, 0.95])
    vec = theta(qp, xs)
    assert np.allclose(vec, [theta(qp, x) for x in xs], rtol=1e-15, atol=0)


def test_theta_deriv_matches_finite_difference():
    qp = QParam(0.3 + 0.1j)
    for x in (0.6 + 0.3j, -0.4 + 0.2j, 2.0 - 1.0j):
        h = 1e-6 * abs(x)
        fd = (theta(qp, x + h) - theta(qp, x - h)) / (2 * h)
        assert abs(theta_deriv(qp, x) - fd) <= 1e-5 * abs(fd)


def test_theta_D_is_euler_derivative():
    qp = QParam(0.5)
    x = 0.4 + 0.7j
    assert abs(theta_D(qp, x, 1) - x * theta_deriv(qp, x)) < 1e-13


@pytest.mark.parametrize("q", Q_VALUES)
def test_q_log_shift(q):
    qp = QParam(q)

    @given(annulus_points(qp))
    def check(x):
        if log_distance(qp, x, -1) < 1e-3:
            return
        assert abs(q_log(qp, qp.q * x) - q_log(qp, x) + 1) <= 1e-10 * max(1, abs(q_log(qp, x)))

    check()


def test_de_rham_solution():
    qp = QParam(0.3 + 0.1j)
    c, a, b = 0.7 - 0.2j, 1.3 + 0.4j, 2.0
    for x in (0.5 + 0.5j, -0.9 + 0.1j, 1.7j):
        f = de_rham_solution(qp, c, a, b, x)
        assert abs(de_rham_solution(qp, c, a, b, qp.q * x) - f - c) < 1e-10 * max(1, abs(f))


def test_pochhammer_values():
    assert pochhammer(Q05, 0.3, 0) == 1
    assert pochhammer(Q05, 1.0, 3) == 0
    # 30-digit infinite product
    assert pochhammer(Q05, 0.5, math.inf) == pytest.approx(0.28878809508660242128, rel=1e-14)


@pytest.mark.parametrize("q", Q_VALUES)
def test_jacobi_triple_product(q):
    qp = QParam(q)

    @given(annulus_points(qp))
    def check(x):
        prod = pochhammer(qp, qp.q) * pochhammer(qp, -x) * pochhammer(qp, -qp.q / x)
        t = theta(qp, x)
        assert abs(t - prod) <= 1e-10 * max(abs(t), 1e-300) + 1e-14

    check()


def test_e_char():
    qp = QParam(0.3 + 0.1j)
    c = 0.8 - 0.5j
    assert abs(e_char(qp, 1.0, 0.4 + 0.3j) - 1) < 1e-15
    assert abs(e_char(qp, c, -c)) < 1e-14
    for x in (0.4 + 0.3j, -0.2 + 0.7j):
        assert abs(e_char(qp, c, qp.q * x) / e_char(qp, c, x) - c) < 1e-10 * abs(c)
    with pytest.raises(PoleError):
        e_char(qp, c, -qp.q)


def test_annulus_rep_examples():
    r = annulus_rep(Q05, 1.7857142857)
    assert r.shift == -1 and r.value == pytest.approx(0.89285714285)
    r = annulus_rep(Q05, -5)
    assert (r.value, r.shift) == (-0.625, -3)
    r = annulus_rep(Q05, 0.7)
    assert (r.value, r.shift) == (0.7, 0)
    # boundary convention: |v| = 1 is inside, |v| = |q| is not
    assert annulus_rep(Q05, 1.0).value == 1.0
    assert annulus_rep(Q05, 0.5).value == 1.0


@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_annulus_rep_properties(x):
    for q in Q_VALUES:
        qp = QParam(q)
        r = annulus_rep(qp, x)
        assert abs(qp.q) < abs(r.value) <= 1.0
        assert abs(r.original(qp) - x) <= 1e-12 * abs(x)
        again = annulus_rep(qp, r.value)
        assert again.shift == 0 and again.value == r.value


def test_congruent_examples():
    assert congruent(Q05, 0.3, 0.3) == 0
    assert congruent(Q05, 0.25, 1) == 2
    assert congruent(Q05, 0.3, 1) is None
    # straddling |z| = 1 from either side
    assert congruent(Q05, 1.0000000000000002, 1) == 0
    assert congruent(Q05, 1, 1.0000000000000002) == 0


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.integers(-6, 6))
def test_congruent_recovers_shift(a, k):
    qp = QParam(0.3 + 0.1j)
    assert congruent(qp, a * qp.q ** k, a) == k


def test_log_distance_complex_q_inner_boundary():
    qp = QParam(0.5 * cmath.exp(0.5j))
    assert log_distance(qp, qp.q * 1.0001, 1) == pytest.approx(1e-4, rel=1e-3)
    assert log_distance(qp, 3, 3 * qp.q ** 5) < 1e-12
