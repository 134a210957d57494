from types import SimpleNamespace

import numpy as np
import pytest

from relaxshock import hugoniot_endstates
from relaxshock.errors import (CountMismatch, EigenvalueInStrip, NoPositiveMargin,
                               NotGenuinelyNonlinear, RankDropInconsistent, SymmetrizerMissing)
from relaxshock.model import EndStates, custom_model, sample_neighborhood
from relaxshock.numerics import eigen_small
from relaxshock.structure import (block_coupling_check, check_assumption_2_4, check_gnl,
                                  check_symmetrizer, find_kawashima_K, genuine_coupling_check,
                                  hyperbolicity_strip_check, kawashima_margin,
                                  reduced_symmetrizer_check, structure_report)


def linear(A, dQ, S=None):
    """Duck-typed model with constant A, dQ and S at every state."""
    A = np.asarray(A, float)
    m = A.shape[0]
    return SimpleNamespace(name="linear", n=1, r=m - 1, A=A, U_star=lambda u: np.zeros(m),
                           dQ=lambda U: np.asarray(dQ, float),
                           S=None if S is None else (lambda U: np.asarray(S, float)))


def test_jin_xin_symmetrizer(jx):
    m, _ = jx
    # at u = 0, P = I and S~ = I
    np.testing.assert_allclose(m.S(m.U_star(np.zeros(1))), np.eye(2))
    assert check_symmetrizer(m, np.zeros(1)).passed
    # away from 0: S = P^-T diag(1 - f'^2, 1) P^-1 with P = [[1, 0], [f'(u), 1]]
    u = 0.2
    Pinv = np.linalg.inv(np.array([[1.0, 0.0], [u, 1.0]]))
    S = Pinv.T @ np.diag([1 - u * u, 1.0]) @ Pinv
    np.testing.assert_allclose(m.S(m.U_star(np.array([u]))), S, atol=1e-15)
    SA = S @ m.A
    np.testing.assert_allclose(SA, SA.T, atol=1e-15)
    assert check_symmetrizer(m, np.array([u])).passed


def test_symmetrizer_identity_passes():
    e = check_symmetrizer(linear([[0, 1], [1, 0]], [[0, 0], [0, -1]], np.eye(2)), np.zeros(1))
    assert e.passed


def test_symmetrizer_indefinite_fails():
    e = check_symmetrizer(linear([[0, 1], [1, 0]], [[0, 0], [0, -1]], np.diag([1.0, -1.0])),
                          np.zeros(1))
    assert not e.passed
    np.testing.assert_allclose(np.abs(e.witness["eigenvector"]), [0, 1])


def test_symmetrizer_missing():
    with pytest.raises(SymmetrizerMissing):
        check_symmetrizer(linear(np.eye(2), np.zeros((2, 2))), np.zeros(1))


def test_kawashima_jin_xin(jx):
    m, _ = jx
    pair = find_kawashima_K(m, np.zeros(1))
    np.testing.assert_array_equal(pair.K + pair.K.T, 0)
    assert pair.theta >= 0.4
    SdQ = m.S(m.U_star(np.zeros(1))) @ m.dQ(m.U_star(np.zeros(1)))
    G = pair.K @ m.A - SdQ
    assert np.min(eigen_small(0.5 * (G + G.T), symmetric=True).real) >= pair.theta - 1e-10


def test_kawashima_hand_example():
    # K = kappa [[0,1],[-1,0]] gives Sym(K A - S dQ) = diag(kappa, 1 - kappa)
    A, SdQ = np.array([[0.0, 1], [1, 0]]), np.diag([0.0, -1])
    K = 0.5 * np.array([[0.0, 1], [-1, 0]])
    assert kawashima_margin(K, A, SdQ) == pytest.approx(0.5)
    pair = find_kawashima_K(linear(A, np.diag([0.0, -1]), np.eye(2)), np.zeros(1))
    assert pair.theta == pytest.approx(0.5, abs=1e-3)


def test_kawashima_no_transport():
    pair = find_kawashima_K(linear(np.zeros((2, 2)), np.diag([-1.0, -2.0]), np.eye(2)),
                            np.zeros(1))
    np.testing.assert_array_equal(pair.K, 0)
    assert pair.theta == pytest.approx(1.0)


def test_kawashima_fails_without_coupling():
    with pytest.raises(NoPositiveMargin):
        find_kawashima_K(linear(np.diag([1.0, 2.0]), np.diag([0.0, -1]), np.eye(2)), np.zeros(1))


def test_genuine_coupling(jx):
    m, _ = jx
    ok, wit, worst = genuine_coupling_check(m, np.zeros(1))
    assert ok and wit is None and worst > 0.1
    ok, wit, _ = genuine_coupling_check(linear(np.diag([1.0, 2.0]), np.diag([0.0, -1])),
                                        np.zeros(1))
    assert not ok
    np.testing.assert_allclose(np.abs(wit["eigenvector"]), [1, 0])


@pytest.mark.parametrize("fixture", ["jx", "bw"])
def test_block_coupling_agrees(fixture, request):
    m, _ = request.getfixturevalue(fixture)
    for u in sample_neighborhood(m, 0.2, 5):
        assert genuine_coupling_check(m, u)[0] == block_coupling_check(m, u)[0]


def test_left_kernel_constant_rank(jx, bw):
    m, red = jx
    assert check_assumption_2_4(red, sample_neighborhood(m, 0.3, 5)).passed
    m, red = bw
    assert check_assumption_2_4(red, sample_neighborhood(m, 0.2, 5)).passed
    for u in sample_neighborhood(m, 0.2, 5):
        np.testing.assert_allclose(np.abs(red.left_kernel(u)), [[1, 0]], atol=1e-10)
        P = red.pi_star(u)
        np.testing.assert_allclose(P @ P, P, atol=1e-10)
        np.testing.assert_allclose(P @ red.b_star(u), 0, atol=1e-10)


def test_left_kernel_rank_drop():
    kern = {0: np.zeros((0, 2)), 1: np.array([[1.0, 0.0]])}
    red = SimpleNamespace(left_kernel=lambda u: kern[int(u[0])])
    with pytest.raises(RankDropInconsistent):
        check_assumption_2_4(red, [np.zeros(1), np.ones(1)])


def test_gnl_jin_xin(jx):
    _, red = jx
    alpha, r, gnl = check_gnl(red, np.zeros(1))
    assert alpha == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(r, [-1.0])
    assert gnl == pytest.approx(-1.0, rel=1e-6)
    assert check_gnl(red, np.array([0.01]))[0] == pytest.approx(0.01)


def test_gnl_linear_flux():
    red = SimpleNamespace(df_star=lambda u: np.array([[0.3]]))
    with pytest.raises(NotGenuinelyNonlinear):
        check_gnl(red, np.zeros(1))


def test_reduced_symmetrizer(jx, bw):
    for m, red in (jx, bw):
        for u in sample_neighborhood(m, 0.2, 5):
            assert reduced_symmetrizer_check(m, red, u).passed


def test_strip_count(jx):
    m, red = jx
    ends = hugoniot_endstates(red, m, 0.1)
    e = hyperbolicity_strip_check(m, red, ends, 1e-3, 0.0)
    assert e.passed and e.witness["count"] == 4
    with pytest.raises(EigenvalueInStrip):
        hyperbolicity_strip_check(m, red, ends, 1e-3, 10 * e.margin)


def test_strip_degenerate(jx):
    m, red = jx
    with pytest.raises(EigenvalueInStrip):
        hyperbolicity_strip_check(m, red, hugoniot_endstates(red, m, 0.0), 1e-3, 0.0)


def test_strip_count_mismatch(jx):
    m, red = jx
    # both ends on the same side of the sonic point: not a Lax shock
    ends = EndStates(np.array([0.1]), np.array([0.05]), 0.05)
    with pytest.raises(CountMismatch):
        hyperbolicity_strip_check(m, red, ends, 1e-3, 0.0)


def test_strip_margin_linear_in_eps(jx):
    from relaxshock.solver import fit_slope
    m, red = jx
    eps = (0.05, 0.1, 0.2)
    margins = [hyperbolicity_strip_check(m, red, hugoniot_endstates(red, m, e), 1e-3, 0.0).margin
               for e in eps]
    assert 0.9 <= fit_slope(eps, margins) <= 1.1


@pytest.mark.parametrize("fixture", ["jx", "bw"])
def test_report_passes(fixture, request):
    m, red = request.getfixturevalue(fixture)
    rep = structure_report(m, red, epsilon=0.1)
    assert rep.passed
    doc = rep.to_json()
    assert all({"check_name", "status", "margin"} <= set(c) for c in doc["checks"])


def test_report_flags_missing_symmetrizer(jx):
    m, red = jx
    bare = custom_model("bare", m.A, 1, m.q, m.dq_du, m.dq_dv, m.u0, v_star=m.v_star)
    rep = structure_report(bare, red, epsilon=0.1)
    assert not rep.passed
