import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relaxshock import broadwell_model, build_reduced, hugoniot_endstates, jin_xin_model
from relaxshock.errors import (EquilibriumBranchUndefined, LeftNeighborhood,
                               SubcharacteristicViolation)
from relaxshock.model import (Flux, broadwell_densities, custom_model, equilibrium_residual,
                              equilibrium_spectrum_margin, model_from_config,
                              sample_neighborhood)


def test_jin_xin_blocks():
    m = jin_xin_model()
    assert (m.n, m.r) == (1, 1)
    np.testing.assert_array_equal(m.A, [[0, 1], [1, 0]])
    assert abs(m.q(np.array([0.2]), np.array([0.02]))[0]) <= 1e-15
    assert equilibrium_spectrum_margin(m, np.array([0.37])) == pytest.approx(1.0)
    assert m.d_v_star(np.array([0.3]))[0, 0] == pytest.approx(0.3)
    assert equilibrium_residual(m, np.zeros(1)) == 0.0
    assert equilibrium_residual(m, np.array([0.1])) == 0.0


def test_jin_xin_wave_speed():
    m = jin_xin_model(a=2.0)
    np.testing.assert_array_equal(m.A, [[0, 1], [4, 0]])


def test_subcharacteristic_violation():
    steep = Flux("steep", lambda u: 2 * u + 0.5 * u * u, lambda u: 2 + u, lambda u: 1.0 + 0 * u)
    with pytest.raises(SubcharacteristicViolation):
        jin_xin_model(a=1.0, flux=steep)
    with pytest.raises(ValueError):
        jin_xin_model(a=0.0)


def test_broadwell_equilibrium():
    m = broadwell_model()
    assert (m.n, m.r) == (2, 1)
    for u in sample_neighborhood(m, 0.3):
        assert equilibrium_residual(m, u) <= 1e-10
        assert equilibrium_spectrum_margin(m, u) >= 0.1
    red = build_reduced(m)
    assert np.all(np.linalg.eigvalsh(red.b_star(m.u0) + red.b_star(m.u0).T) >= -1e-12)
    assert np.linalg.matrix_rank(red.b_star(m.u0)) == 1


def test_broadwell_densities_physical():
    m = broadwell_model()
    U = m.U_star(m.u0)
    assert np.all(broadwell_densities(U) > 0)
    with pytest.raises(EquilibriumBranchUndefined):
        m.v_star(np.array([-0.5, 0.0]))


def _diag_model(d):
    d = np.asarray(d, float)
    r = d.size
    return custom_model(
        "diag", np.eye(1 + r), 1,
        q=lambda u, v: d * (v - u[0]), dq_du=lambda u, v: -d[:, None] * np.ones((r, 1)),
        dq_dv=lambda u, v: np.diag(d), u0=np.zeros(1))


def test_margin_diagonal():
    m = _diag_model([-2.0, -5.0])
    assert equilibrium_spectrum_margin(m, np.zeros(1)) == pytest.approx(2.0)
    # v_star found by Newton from the default seed
    assert equilibrium_residual(m, np.array([0.3])) <= 1e-10


def test_margin_degenerate():
    m = _diag_model([0.0, -1.0])
    assert equilibrium_spectrum_margin(m, np.zeros(1)) <= 0.0


@pytest.mark.parametrize("make", [jin_xin_model, broadwell_model])
def test_d_v_star_consistency(make):
    m = make()
    for u in sample_neighborhood(m, 0.2, count=6):
        ub, vb = u, m.v_star(u)
        ift = -np.linalg.solve(m.dq_dv(ub, vb), m.dq_du(ub, vb))
        np.testing.assert_allclose(m.d_v_star(u), ift, atol=1e-8)
        errs = []
        for h in (1e-3, 5e-4):
            fd = np.column_stack([(m.v_star(u + h * e) - m.v_star(u - h * e)) / (2 * h)
                                  for e in np.eye(m.n)])
            errs.append(np.max(np.abs(m.d_v_star(u) - fd)))
        assert errs[1] <= max(errs[0] / 3, 1e-10)


def test_d2_v_star_jin_xin():
    m = jin_xin_model()
    np.testing.assert_allclose(m.d2_v_star(np.array([0.2])).ravel(), [1.0], atol=1e-6)


def test_hugoniot_jin_xin_examples():
    m = jin_xin_model()
    red = build_reduced(m)
    e = hugoniot_endstates(red, m, 0.1)
    np.testing.assert_allclose([e.u_minus[0], e.u_plus[0]], [0.05, -0.05], atol=1e-13)
    e = hugoniot_endstates(red, m, 0.2)
    np.testing.assert_allclose([e.u_minus[0], e.u_plus[0]], [0.1, -0.1], atol=1e-13)
    assert red.f_star(e.u_minus)[0] == pytest.approx(0.005, abs=1e-14)
    e = hugoniot_endstates(red, m, 0.0)
    np.testing.assert_array_equal(e.u_minus, e.u_plus)


def test_hugoniot_eps_max():
    m = jin_xin_model()
    with pytest.raises(LeftNeighborhood):
        hugoniot_endstates(build_reduced(m), m, 0.9)


@settings(max_examples=15, deadline=None)
@given(eps=st.floats(0.01, 0.3))
def test_hugoniot_broadwell_invariants(eps):
    m = broadwell_model()
    red = build_reduced(m)
    e = hugoniot_endstates(red, m, eps)
    f = hugoniot_endstates(red, m, eps, r_sign=-1.0)
    assert np.linalg.norm(red.f_star(e.u_minus) - red.f_star(e.u_plus)) <= 1e-12
    assert np.linalg.norm(e.u_plus - e.u_minus) == pytest.approx(eps, rel=1e-10)
    np.testing.assert_allclose(f.u_minus, e.u_plus, atol=1e-10)
    np.testing.assert_allclose(f.u_plus, e.u_minus, atol=1e-10)


def test_model_from_config():
    assert model_from_config({"name": "broadwell"}).name == "broadwell"
    assert model_from_config({"name": "jin_xin", "a": 2.0}).A[1, 0] == 4.0
    with pytest.raises(ValueError):
        model_from_config({"name": "custom"})
