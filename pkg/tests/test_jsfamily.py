import numpy as np
import pytest

from qmano.errors import MembershipError, TangencyError
from qmano.jsfamily import (
    PAIRS,
    GaugePair,
    LocalData,
    MonodromyMatrix,
    det_profile,
    det_scale,
    gauge_apply,
    generate_quadric,
    line_membership,
    lines_containing,
    nonzero_column,
    nonzero_row,
    pi_invariant,
    pi_prime,
    reducible,
    transpose,
    validate,
)
from qmano.mano import line_matrix, phi, q_invariant
from qmano.projective import INF, ZERO
from qmano.qcore import QParam, theta
from qmano.qspaces import VElement

from conftest import pants_sample, rng


@pytest.fixture(scope="module")
def pants_ref(ref):
    g = rng(1)
    return [pants_sample(ref, (1, 2), g) for _ in range(3)]


def test_validate_reference(ref):
    rep = validate(ref)
    assert rep.fr and rep.fr_shift == 0 and rep.nr
    assert abs(ref.x_product - 0.6) < 1e-15
    assert rep.ns[(1, 2)] and rep.hyp8[(1, 2)]
    # -rho1/x3 and -rho2/x1 coincide modulo q for the pair (1, 3)
    assert not rep.hyp8[(1, 3)] and not rep.hyp48
    assert not rep.has_splitting
    assert rep.ok


def test_validate_random_dataset(rnd):
    rep = validate(rnd)
    assert rep.ok and rep.hyp48 and not rep.has_splitting


def test_non_resonance_failure():
    qp = QParam(0.5)
    x1 = 0.6
    x4 = 0.6 / (x1 * 0.5 * x1 * 0.8)
    rep = validate(LocalData(qp, (1, 3), (1, 5), (x1, 0.5 * x1, 0.8, x4)))
    assert not rep.nr and "x1/x2" in rep.nr_failures


def _splitting_data():
    # x1 x2 = rho1/sigma2, hence x3 x4 = rho2/sigma1
    qp = QParam(0.5)
    x1, x3 = 0.6, 0.7
    x2 = 1 / (5 * x1)
    x4 = 3 / (x3)
    return LocalData(qp, (1, 3), (1, 5), (x1, x2, x3, x4))


def test_splitting_reported():
    local = _splitting_data()
    rep = validate(local)
    assert rep.fr and rep.has_splitting
    assert any(s[0] == (1, 2) for s in rep.splittings)


def test_reducible_matrix_needs_splitting():
    local = _splitting_data()
    qp = local.qp
    x1, x2, x3, x4 = local.xs
    # m11 = 0, m12 has zeros at x1, x2 and m21 at x3, x4
    m12 = VElement.from_roots(qp, [-x1, -x2], a=1 / 5)
    m21 = VElement.from_roots(qp, [-x3, -x4], a=3 / 1)
    m11 = VElement.zero(qp, 2, 1.0)
    m22 = VElement.from_roots(qp, [0.4 + 0.3j, (3 / 5) / (0.4 + 0.3j)], a=3 / 5)
    M = MonodromyMatrix(local, m11, m12, m21, m22)
    _, resid = det_profile(M)
    assert resid < 1e-10
    red, which = reducible(M)
    assert red and which == [(1, 1)]
    # row 1 vanishes at x1 and x2, so Pi_12 is 0/0; the cross pairs are degenerate
    for j in (3, 4):
        v = pi_invariant(M, 1, j)
        assert v.close(ZERO) or v.close(INF)


def test_det_profile_on_pants(ref, rnd, pants_ref):
    for _, M, _ in pants_ref:
        assert det_profile(M)[1] < 1e-8
    g = rng(2)
    _, M, _ = pants_sample(rnd, (2, 4), g)
    assert det_profile(M)[1] < 1e-8


def test_det_profile_rejects_diagonal(ref):
    qp = ref.qp
    m11 = VElement.from_roots(qp, [0.5 + 0.5j, 1 / (0.5 + 0.5j)], a=1.0)
    m22 = VElement.from_roots(qp, [0.3j, (3 / 5) / 0.3j], a=3 / 5)
    M = MonodromyMatrix(ref, m11, VElement.zero(qp, 2, 1 / 5), VElement.zero(qp, 2, 3.0), m22)
    with pytest.raises(MembershipError):
        det_profile(M)
    assert not det_profile(M, raise_on_fail=False)[1] < 1e-7


def test_det_q_shift(ref, pants_ref):
    _, M, _ = pants_ref[0]
    q = ref.qp.q
    for x in (0.4 + 0.3j, -0.7 + 0.1j):
        lhs = M.det(q * x) / M.det(x)
        assert abs(lhs - ref.x_product / x ** 4) < 1e-8 * abs(lhs)


def test_fuchs_economy(ref, pants_ref):
    # vanishing at three singularities forces the fourth
    _, M, _ = pants_ref[0]
    for x in ref.xs:
        assert abs(M.det(x)) <= 1e-9 * det_scale(M, x)


def test_rank_one_and_columns(ref, pants_ref):
    _, M, _ = pants_ref[1]
    for i in range(1, 5):
        m = M(ref.x(i))
        assert abs(np.linalg.det(m)) <= 1e-8 * np.linalg.norm(m) ** 2
        f, g = nonzero_column(M, i)
        c1, c2 = m[:, 0], m[:, 1]
        assert abs(c1[0] * c2[1] - c1[1] * c2[0]) <= 1e-8 * np.linalg.norm(c1) * np.linalg.norm(c2)


def test_null_row_gives_zero_component(ref):
    M, _ = line_matrix(ref, "rho", 1, 1, t=0.7 - 0.2j)
    f, g = nonzero_column(M, 1)
    assert abs(f) <= 1e-8 * abs(g)


def test_pi_matches_phi_and_column_choice(ref, pants_ref):
    for p, M, _ in pants_ref:
        assert pi_invariant(M, 1, 2).distance(phi(ref, (1, 2), p.xi.value)) < 1e-8
        for i, j in PAIRS:
            base = pi_invariant(M, i, j)
            assert base.distance(pi_invariant(M, i, j, columns=(2, 2))) < 1e-7
            assert pi_prime(M, i, j).distance(pi_prime(M, i, j, rows=(2, 1))) < 1e-7


def test_gauge_invariance(ref, pants_ref):
    g = rng(3)
    _, M, _ = pants_ref[2]
    ident = gauge_apply(M, GaugePair((1, 1), (1, 1)))
    assert np.allclose(ident(0.3 + 0.2j), M(0.3 + 0.2j), rtol=1e-15)
    for _ in range(5):
        gp = GaugePair(tuple(np.exp(g.normal(size=2) + 1j * g.normal(size=2))),
                       tuple(np.exp(g.normal(size=2) + 1j * g.normal(size=2))))
        N = gauge_apply(M, gp)
        x = 0.45 - 0.15j
        fac = gp.gamma[0] * gp.gamma[1] / (gp.delta[0] * gp.delta[1])
        assert abs(N.det(x) - fac * M.det(x)) < 1e-10 * abs(fac * M.det(x))
        for i, j in PAIRS:
            assert pi_invariant(N, i, j).distance(pi_invariant(M, i, j)) < 1e-10
            assert pi_prime(N, i, j).distance(pi_prime(M, i, j)) < 1e-10
        assert reducible(N) == reducible(M)
        assert lines_containing(N) == lines_containing(M)


def test_gauge_rejects_zero():
    with pytest.raises(Exception):
        GaugePair((1, 0), (1, 1))


def test_transpose_duality(ref, pants_ref):
    _, M, _ = pants_ref[0]
    Mt = transpose(M)
    assert det_profile(Mt)[1] < 1e-8
    for i, j in PAIRS:
        assert pi_prime(M, i, j).distance(pi_invariant(Mt, i, j)) < 1e-10


def test_pants_matrices_irreducible(pants_ref):
    for _, M, _ in pants_ref:
        assert reducible(M) == (False, [])


def test_pi_prime_zero_column(ref):
    # a null column of M(x3) puts Pi'_34 at 0 or infinity
    M, _ = line_matrix(ref, "sigma", 1, 3, t=0.4 + 0.1j)
    v = pi_prime(M, 3, 4)
    assert v.close(ZERO) or v.close(INF)


def test_line_membership_incidences(ref, rnd):
    for local in (ref, rnd):
        M, _ = line_matrix(local, "rho", 1, 1, t=0.3 + 0.8j)
        assert line_membership(M, "rho", 1, 1)
        for j in (2, 3, 4):
            assert pi_invariant(M, 1, j).close(ZERO)
        M, _ = line_matrix(local, "sigma", 1, 3, t=-0.6 + 0.2j)
        assert pi_invariant(M, 1, 2).close(q_invariant(local, 1, (1, 2), 3))
        for i in range(1, 5):
            for h in (1, 2):
                for h2 in (1, 2):
                    assert not (line_membership(M, "rho", h, i) and line_membership(M, "sigma", h2, i))


def test_special_fibers_are_two_lines(ref):
    # Pi12 = 0: exactly one of {f1 = 0, g2 = 0} away from the crossing, both at it
    for t, expect in ((0.6 - 0.3j, 1), (0.0, 2)):
        M, _ = line_matrix(ref, "rho", 1, 1, t=t, partner=2)
        assert pi_invariant(M, 1, 2).close(ZERO)
        n = line_membership(M, "rho", 1, 1) + line_membership(M, "rho", 2, 2)
        assert n == expect


def test_generate_quadric_round_trip(ref, rnd):
    made = 0
    for local in (ref, rnd):
        for seed in range(4):
            M = generate_quadric(local, seed)
            if M is None:
                continue
            made += 1
            assert det_profile(M)[1] < 1e-7
            pi_invariant(M, 1, 2)
    assert made >= 6


def test_generate_quadric_tangency(ref, monkeypatch):
    import qmano.jsfamily as js

    # coordinates for which Q(cf - lam cu) = (1 - lam)**2
    monkeypatch.setattr(js, "quadric_coords", lambda *a, **k: np.array([1.0, 0, 0, 1.0], dtype=complex))
    with pytest.raises(TangencyError):
        generate_quadric(ref, 0)
