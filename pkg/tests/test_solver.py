import numpy as np
import pytest

from conftest import EPSILONS, exact_jin_xin
from relaxshock import hugoniot_endstates, ns_profile
from relaxshock.errors import LeftBall, LeftNeighborhood, MaxIterExceeded
from relaxshock.solver import (SolverOptions, box_residual, epsilon_sweep, fit_slope,
                               fixed_point_solve, nonlinear_residual, nonlinear_term,
                               run_pipeline, verify_theorem_bounds)
from relaxshock.spaces import GridFunction


def test_exact_oracle_second_order(jx):
    # the discrete fixed point approaches the closed-form shock at rate h^2
    m, red = jx
    errs = []
    for h in (0.5, 0.25, 0.125):
        _, prof, sol = run_pipeline(m, 0.1, SolverOptions(h=h), red)
        u, v = exact_jin_xin(prof.x, 0.1)
        errs.append(np.max(np.abs(sol.U_bar.values[:, 0] - u)))
        assert np.max(np.abs(sol.U_bar.values[:, 1] - v)) <= 1e-15
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_converged_examples(jx_sweep):
    row, prof, sol = jx_sweep[0.1]
    assert sol.iterations <= 8
    assert sol.increments[-1] <= 1e-10
    assert all(r <= 0.5 for r in sol.ratios)
    assert abs(sol.info["phase"]) <= 1e-12
    assert sol.norms["H2"] <= sol.info["ball_radius"]
    assert sol.first_iterate_norm == pytest.approx(sol.norms["H2"], rel=0.5)
    # bounded by C eps^2; for Jin-Xin the corrector is one order smaller still
    norms = [jx_sweep[e][2].norms["H2"] for e in EPSILONS]
    assert max(n / e**2 for n, e in zip(norms, EPSILONS)) <= 0.05
    assert fit_slope(EPSILONS, norms) == pytest.approx(3.0, abs=0.1)


def test_restart_from_first_iterate(jx):
    m, red = jx
    prof = ns_profile(red, m, hugoniot_endstates(red, m, 0.1))
    ref = fixed_point_solve(m, red, prof)
    T0 = fixed_point_solve(m, red, prof, SolverOptions(tol=1e9, max_iter=1)).U
    again = fixed_point_solve(m, red, prof, U0=T0)
    assert np.max(np.abs(again.U.values - ref.U.values)) <= 1e-9


def test_nonlinear_term_burgers(jx_profiles, jx):
    m, _ = jx
    prof = jx_profiles[0.1]
    x = prof.x
    zero = GridFunction(x, np.zeros((x.size, 2)), 0.1)
    np.testing.assert_array_equal(nonlinear_term(m, prof, zero).values, 0)
    w = 1e-3 / np.cosh(0.1 * x)
    U = GridFunction(x, np.column_stack([w, 0.5 * w]), 0.1)
    # second block of Q is -(v - u^2/2): remainder is +w^2/2
    np.testing.assert_allclose(nonlinear_term(m, prof, U).values[:, 0], 0.5 * w**2, atol=1e-18)


def test_nonlinear_term_quadratic(bw_profile, bw):
    m, _ = bw
    x = bw_profile.x
    shape = np.column_stack([np.tanh(0.1 * x) / np.cosh(0.1 * x)] * 3) * [1.0, -0.5, 0.3]
    ts = (1e-3, 2e-3, 4e-3)
    sups = [np.max(np.abs(nonlinear_term(m, bw_profile, GridFunction(x, t * shape)).values))
            for t in ts]
    assert fit_slope(ts, sups) == pytest.approx(2.0, abs=0.02)


def test_nonlinear_term_neighborhood(jx_profiles, jx):
    m, _ = jx
    prof = jx_profiles[0.1]
    big = GridFunction(prof.x, np.ones((prof.x.size, 2)))
    with pytest.raises(LeftNeighborhood):
        nonlinear_term(m, prof, big)


def test_box_residual_vanishes_at_fixed_point(jx_sweep, jx):
    # the discrete equations hold at U_bar to round-off
    m, _ = jx
    _, prof, sol = jx_sweep[0.1]
    n = m.n
    moved = prof.__class__(**{**prof.__dict__,
                              "u_NS": GridFunction(prof.x, sol.U_bar.values[:, :n], 0.1),
                              "v_NS": GridFunction(prof.x, sol.U_bar.values[:, n:], 0.1)})
    d, R = box_residual(m, moved)
    assert np.max(np.abs(d)) <= 1e-14
    assert np.max(np.abs(R)) <= 1e-14


def test_nonlinear_residual_examples(jx, jx_profiles):
    m, _ = jx
    x = jx_profiles[0.1].x
    const = GridFunction(x, np.tile(m.U_star(np.array([0.03])), (x.size, 1)))
    assert nonlinear_residual(m, const) <= 1e-12
    prof = jx_profiles[0.1]
    ns = GridFunction(x, np.hstack([prof.u_NS.values, prof.v_NS.values]), 0.1)
    assert nonlinear_residual(m, ns) == pytest.approx(0.1**4 / 128, rel=0.1)


def test_nonlinear_residual_refines(jx):
    m, red = jx
    res = [run_pipeline(m, 0.1, SolverOptions(h=h), red)[2].residual for h in (0.5, 0.25)]
    assert res[0] / res[1] == pytest.approx(4, rel=0.1)


def test_eps_zero(jx):
    m, red = jx
    prof = ns_profile(red, m, hugoniot_endstates(red, m, 0.0))
    sol = fixed_point_solve(m, red, prof)
    assert sol.iterations == 0
    np.testing.assert_array_equal(sol.U.values, 0)


def test_left_ball(jx, jx_profiles):
    m, red = jx
    with pytest.raises(LeftBall):
        fixed_point_solve(m, red, jx_profiles[0.1], SolverOptions(ball_radius_factor=1e-3))


def test_max_iter(jx, jx_profiles):
    m, red = jx
    with pytest.raises(MaxIterExceeded):
        fixed_point_solve(m, red, jx_profiles[0.1], SolverOptions(tol=1e-30, max_iter=2))


def test_options_validation():
    for kw in ({"tol": 0.0}, {"max_iter": 0}, {"delta": 1.5}, {"delta": -0.1}):
        with pytest.raises(ValueError):
            SolverOptions(**kw)


def test_delta_capped_by_theta(jx_profiles, jx):
    m, red = jx
    prof = jx_profiles[0.1]
    sol = fixed_point_solve(m, red, prof, SolverOptions(delta=1.0))
    assert sol.delta <= 0.5 * prof.theta_fit / 0.1 + 1e-15


def test_bound_slopes(jx_sweep, jx):
    m, _ = jx
    b = {e: verify_theorem_bounds(m, jx_sweep[e][2], jx_sweep[e][1]) for e in EPSILONS}
    assert {"corrector_d0", "corrector_d1", "corrector_d2", "profile_d0", "profile_d1",
            "profile_d2", "kinetic_d0", "kinetic_d1", "kinetic_d2"} <= set(b[0.1])
    slope = lambda k: fit_slope(EPSILONS, [b[e][k] for e in EPSILONS])
    assert slope("corrector_d0") >= 1.8
    assert slope("profile_d0") >= 0.8
    assert slope("kinetic_d1") >= 2.7


def test_broadwell_solve(bw, bw_profile):
    m, red = bw
    sol = fixed_point_solve(m, red, bw_profile)
    assert sol.iterations <= 8
    assert all(r <= 0.5 for r in sol.ratios)
    assert sol.norms["H2"] <= sol.info["ball_radius"]
    assert sol.residual <= 1e-3 * 0.1**3


def test_fit_slope():
    assert fit_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)
    assert np.isnan(fit_slope([1], [1]))
    assert fit_slope([1, 2, 4], [0, 2, 4]) == pytest.approx(1.0)


def test_sweep_flagged_singleton(jx):
    m, _ = jx
    t = epsilon_sweep(m, [0.1])
    assert t["flagged"] and t["slopes"] == {}


def test_sweep_isolates_errors(jx):
    m, _ = jx
    t = epsilon_sweep(m, [0.05, 0.9, 0.1])
    status = [r["status"] for r in t["rows"]]
    assert status == ["ok", "error", "ok"]
    assert t["rows"][1]["error"] == "LeftNeighborhood"
    assert not t["flagged"] and t["slopes"]["sup_Rv"] >= 3.5
