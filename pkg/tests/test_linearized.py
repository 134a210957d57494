from types import SimpleNamespace

import numpy as np
import pytest

from conftest import EPSILONS
from relaxshock import hugoniot_endstates, ns_profile
from relaxshock.errors import (BorderResidualTooLarge, EigenvalueNotSimple, NoViscosityConvergence,
                               SpectralGapViolation)
from relaxshock.linearized import (_stencil, apply_right_inverse, assemble, ce_right_inverse_fluid,
                                   default_delta, energy_diagnostic, macro_micro, phase_vector,
                                   slow_fast_split, viscosity_sweep)
from relaxshock.numerics import fd_derivative
from relaxshock.solver import fit_slope
from relaxshock.spaces import GridFunction, NormSpec, weighted_norm


def bump_field(x, eps, m, ell=None, n=None):
    """Smooth decaying test field with ``ell . u(0) = 0`` on the first ``n`` components."""
    t = eps * x
    base = np.stack([np.tanh(t) / np.cosh(t) * (1 + 0.3 * j) + (j % 2) / np.cosh(2 * t)
                     for j in range(m)], axis=1)
    if ell is not None:
        c = base[np.argmin(np.abs(x)), :n]
        base[:, :n] -= np.outer(1 / np.cosh(2 * t), ell * (ell @ c))
    return base


# phase vector

def test_phase_vector(jx, jx_profiles):
    _, red = jx
    np.testing.assert_allclose(phase_vector(red, np.zeros(1)), [1.0])
    diag = SimpleNamespace(df_star=lambda u: np.diag([0.0, 1.0]))
    np.testing.assert_allclose(phase_vector(diag, np.zeros(2)), [1.0, 0.0])
    with pytest.raises(EigenvalueNotSimple):
        phase_vector(SimpleNamespace(df_star=lambda u: np.zeros((2, 2))), np.zeros(2))
    p = jx_profiles[0.1]
    du0 = fd_derivative(p.u_NS.values, p.u_NS.h, 1)[p.u_NS.zero_index]
    assert abs(phase_vector(red, np.zeros(1)) @ du0) >= 0.9 * 0.1**2 / 8


def test_M_is_order_eps2(jx, jx_profiles, bw):
    m, _ = jx
    # Jin-Xin: dq does not depend on v, so M vanishes identically
    assert np.all(assemble(m, jx_profiles[0.1]).M == 0)
    m, red = bw
    sups = []
    for e in EPSILONS:
        p = ns_profile(red, m, hugoniot_endstates(red, m, e))
        sups.append(np.max(np.abs(assemble(m, p).M)))
    assert fit_slope(EPSILONS, sups) >= 1.8


# assembly

@pytest.mark.parametrize("eta", [0.0, 1e-3])
def test_constant_state_first_block(jx, jx_profiles, eta):
    m, _ = jx
    op = assemble(m, jx_profiles[0.1], eta=eta)
    U = np.tile([0.3, -0.7], (op.N, 1))
    f, _ = op.apply(U)
    expected = m.A11 @ [0.3] + m.A12 @ [-0.7]
    np.testing.assert_allclose(f, np.broadcast_to(expected, f.shape), atol=1e-13)


def test_translation_derivative(jx, jx_profiles):
    # L applied to U_NS' equals the derivative of the profile equations up to M U_NS'
    m, _ = jx
    for eps in EPSILONS:
        p = jx_profiles[eps]
        op = assemble(m, p, eta=0.0)
        Ud = fd_derivative(p.U, p.u_NS.h, 1)
        f, g = op.apply(Ud)
        Mterm = op.to_cells(np.einsum("kij,kj->ki", op.M, Ud))
        assert np.max(np.abs(f)) <= 1e-3 * eps**2
        assert np.max(np.abs(g + Mterm)) <= 1e-3 * eps**2


def test_second_difference_symbol():
    # -d^2 stencil on sin(pi x / X) has the discrete eigenvalue (4/h^2) sin^2(pi h / 2X)
    X, N = 10.0, 201
    x = np.linspace(-X, X, N)
    h = x[1] - x[0]
    mode = np.sin(np.pi * (x + X) / (2 * X))
    D2 = np.zeros((N, N))
    for i in range(N):
        idx, w = _stencil(i, N, 2, h)
        D2[i, list(idx)] = w
    lam = 4 / h**2 * np.sin(np.pi * h / (4 * X)) ** 2
    np.testing.assert_allclose((D2 @ mode)[1:-1], -lam * mode[1:-1], atol=1e-12)


# right inverse

@pytest.mark.parametrize("eta", [0.0, 1e-3])
@pytest.mark.parametrize("fixture", ["jx", "bw"])
def test_manufactured_solution(fixture, eta, request, jx_profiles, bw_profile):
    m, red = request.getfixturevalue(fixture)
    prof = jx_profiles[0.1] if fixture == "jx" else bw_profile
    op = assemble(m, prof, eta=eta)
    V = bump_field(prof.x, 0.1, m.n + m.r, op.ell, m.n)
    assert abs(op.ell @ V[op.i0, :m.n]) <= 1e-14
    f, g = op.apply(V)
    U = op.solve_box(f, g)
    np.testing.assert_allclose(U.values, V, atol=1e-10)
    assert op.last_beta <= 1e-8


def test_zero_rhs(jx, jx_profiles):
    m, _ = jx
    op = assemble(m, jx_profiles[0.1])
    z = np.zeros((op.N, 1))
    assert np.all(apply_right_inverse(op, z, z).values == 0)


def test_phase_condition_holds(bw, bw_profile):
    m, _ = bw
    op = assemble(m, bw_profile)
    rng = np.random.default_rng(0)
    t = 0.1 * bw_profile.x
    f = np.outer(1 / np.cosh(t), rng.standard_normal(m.n))
    g = np.outer(np.tanh(t) / np.cosh(t), rng.standard_normal(m.r))
    U = apply_right_inverse(op, f, g)
    assert abs(op.ell @ U.values[op.i0, :m.n]) <= 1e-12 * np.max(np.abs(U.values))


def test_border_residual_guard(jx, jx_profiles):
    m, _ = jx
    op = assemble(m, jx_profiles[0.1])
    # a non-decaying forcing leaves the far field excited
    f = np.ones((op.N, 1))
    with pytest.raises(BorderResidualTooLarge):
        apply_right_inverse(op, f, 0 * f)
    apply_right_inverse(op, f, 0 * f, beta_tol=None)
    assert op.last_beta > 1e-3


# macro-micro and energy

def test_macro_micro(jx, jx_profiles):
    m, _ = jx
    p = jx_profiles[0.1]
    op = assemble(m, p)
    u = np.cos(0.1 * p.x)[:, None]
    # equilibrium-consistent perturbation: v = dv*(u_NS) u
    U = GridFunction(p.x, np.hstack([u, p.u_NS.values * u]), 0.1)
    mm = macro_micro(op, U)
    np.testing.assert_allclose(mm.v_tilde.values, 0, atol=1e-16)
    np.testing.assert_allclose(mm.p[:, 0, 0], -p.u_NS.values[:, 0])
    Cs = []
    for e in EPSILONS:
        q = jx_profiles[e]
        Z = GridFunction(q.x, np.zeros((q.x.size, 2)), e)
        Cs.append(macro_micro(assemble(m, q), Z).C_tilde_sup)
    assert fit_slope(EPSILONS, Cs) >= 1.8


def test_energy_constants_uniform(jx, jx_profiles):
    m, _ = jx
    c0, ck = [], []
    for eps in EPSILONS:
        p = jx_profiles[eps]
        op = assemble(m, p)
        t = eps * p.x
        f = GridFunction(p.x, 0.5 / np.cosh(t), eps)
        g = GridFunction(p.x, np.tanh(t) / np.cosh(t), eps)
        U = apply_right_inverse(op, f, g)
        d = energy_diagnostic(op, U, f, g, delta=default_delta(p), k=2)
        assert d["lhs"] <= d["C_emp"] * d["rhs"] * (1 + 1e-12)
        c0.append(d["C_emp"])
        ck.append(d["C_emp_k"])
    assert max(c0) / min(c0) <= 3 and max(ck) / min(ck) <= 3


def test_energy_zero(jx, jx_profiles):
    m, _ = jx
    op = assemble(m, jx_profiles[0.1])
    Z = GridFunction(op.x, np.zeros((op.N, 2)), 0.1)
    z = np.zeros((op.N, 1))
    d = energy_diagnostic(op, Z, z, z)
    assert d["lhs"] == d["rhs"] == d["C_emp"] == 0.0


# slow/fast splitting and fluid inverse

def test_split_scalar():
    m = np.linspace(0.05, -0.05, 11)
    s = slow_fast_split(m, 0.1)
    np.testing.assert_array_equal(s.omega, 1.0)
    np.testing.assert_allclose(s.mu, m / 0.1)
    assert s.p_plus.shape[1:] == (0, 0)


def test_split_diagonal():
    eps, mu0 = 0.1, -0.3
    m = np.tile(np.diag([eps * mu0, 1.0]), (5, 1, 1))
    s = slow_fast_split(m, eps, h=1.0)
    np.testing.assert_allclose(np.abs(s.omega[0]), np.eye(2)[:, ::-1], atol=1e-14)
    np.testing.assert_allclose(s.mu, mu0)
    np.testing.assert_allclose(s.p_plus[:, 0, 0], 1.0)


def test_split_gap_violation():
    eps = 0.1
    m = np.tile(np.diag([0.0, 1.0]), (5, 1, 1))
    m[2, 1, 1] = 0.1
    with pytest.raises(SpectralGapViolation):
        slow_fast_split(m, eps)


def test_split_jin_xin(jx, jx_profiles):
    _, red = jx
    p = jx_profiles[0.1]
    _, s = ce_right_inverse_fluid(red, p, 0 * p.u_NS.values, return_split=True)
    assert s.mu_minus == pytest.approx(0.5, rel=0.05)
    assert s.mu_plus == pytest.approx(-0.5, rel=0.05)
    assert s.alpha >= 0.25
    u = p.u_NS.values[:, 0]
    np.testing.assert_allclose(s.mu, u / (1 - u**2) / 0.1, atol=1e-12)


def test_split_broadwell(bw, bw_profile):
    _, red = bw
    _, s = ce_right_inverse_fluid(red, bw_profile, 0 * bw_profile.u_NS.values, return_split=True)
    assert s.alpha > 0 and s.mu_minus > 0 > s.mu_plus
    assert s.reconstruction_error <= 1e-8


def test_fluid_inverse_zero(jx, jx_profiles):
    _, red = jx
    p = jx_profiles[0.1]
    assert np.all(ce_right_inverse_fluid(red, p, 0 * p.u_NS.values).values == 0)


@pytest.mark.parametrize("fixture", ["jx", "bw"])
def test_fluid_inverse_manufactured(fixture, request):
    m, red = request.getfixturevalue(fixture)
    ends = hugoniot_endstates(red, m, 0.1)
    ell = phase_vector(red, m.u0)
    errs = []
    for h in (0.5, 0.25):
        p = ns_profile(red, m, ends, h=h)
        x = p.x
        t = 0.1 * x
        # u with ell . u(0) = 0 and its exact derivative
        e1 = ell
        e2 = np.linalg.svd(ell[None, :])[2][-1] if m.n > 1 else np.zeros(1)
        u = np.outer(np.tanh(t) / np.cosh(t), e1) + np.outer(1 / np.cosh(t), e2)
        du = 0.1 * (np.outer((1 - 2 * np.tanh(t) ** 2) / np.cosh(t), e1)
                    - np.outer(np.tanh(t) / np.cosh(t), e2))
        hr = np.array([red.b_star(ub) @ a - red.df_star(ub) @ b
                       for ub, a, b in zip(p.u_NS.values, du, u)])
        got = ce_right_inverse_fluid(red, p, hr)
        assert abs(ell @ got.values[p.u_NS.zero_index]) <= 1e-12
        errs.append(np.max(np.abs(got.values - u)))
    assert errs[1] <= 1e-3
    assert errs[0] / errs[1] >= 3.0


# viscosity

def test_viscosity_sweep(jx, jx_profiles):
    m, _ = jx
    p = jx_profiles[0.1]
    t = 0.1 * p.x
    f = GridFunction(p.x, 0.5 / np.cosh(t), 0.1)
    g = GridFunction(p.x, np.tanh(t) / np.cosh(t), 0.1)
    rep = viscosity_sweep(m, p, f, g)
    assert rep["passed"] and rep["ratios"][0] <= 0.5
    z = f.with_values(0 * f.values)
    rep0 = viscosity_sweep(m, p, z, z)
    assert all(np.all(U.values == 0) for U in rep0["solutions"])
    with pytest.raises(ValueError):
        viscosity_sweep(m, p, f, g, eta_list=(1e-3, 1e-2, 1e-4))


def test_viscosity_sweep_strict_failure(jx, jx_profiles):
    m, _ = jx
    p = jx_profiles[0.1]
    t = 0.1 * p.x
    f = GridFunction(p.x, 0.5 / np.cosh(t), 0.1)
    with pytest.raises(NoViscosityConvergence):
        viscosity_sweep(m, p, f, f, eta_list=(1e-2, 1e-3, 1e-4), ratio_max=1e-6)
