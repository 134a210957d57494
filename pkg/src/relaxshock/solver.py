"""Contraction iteration for the exact profile ``U_bar = U_NS + U``.

``U`` solves ``L U = (-d, -R_box + avg(M U + N(U)))`` where ``d`` is the
discrete defect of the first-block identity on the NS profile and ``R_box``
the box-rule residual of the second block, so the converged ``U_bar``
satisfies the discrete nonlinear profile equations exactly.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .chapman_enskog import build_reduced, deviation_from_ends, ns_profile, residual_Rv
from .errors import (
    EquilibriumBranchUndefined,
    LeftBall,
    LeftNeighborhood,
    MaxIterExceeded,
    NoContraction,
    RelaxShockError,
)
from .linearized import apply_right_inverse, assemble, default_delta
from .model import hugoniot_endstates
from .numerics import fd_derivative
from .spaces import GridFunction, NormSpec, _weight, weighted_norm

NEIGHBORHOOD = 0.6


@dataclass
class SolverOptions:
    delta: float = None
    tol: float = 1e-10
    max_iter: int = 50
    ball_radius_factor: float = 1.0
    eta: float = 0.0
    L: float = 40.0
    h: float = None
    enforce_ball: bool = True
    backend: str = None

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")
        if self.delta is not None and not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass
class SolveResult:
    U: GridFunction
    U_bar: GridFunction
    iterations: int
    ratios: list
    increments: list
    norms: dict
    residual: float
    delta: float
    first_iterate_norm: float = 0.0
    info: dict = field(default_factory=dict)


def _profile_state(profile):
    return np.hstack([profile.u_NS.values, profile.v_NS.values])


def nonlinear_term(model, profile, U):
    """``N(U) = q(U_NS + U) - q(U_NS) - dq(U_NS) U`` at the nodes."""
    n = model.n
    Uv = U.values if isinstance(U, GridFunction) else np.asarray(U, dtype=float)
    if not np.all(np.isfinite(Uv)) or np.max(np.abs(Uv), initial=0.0) > NEIGHBORHOOD:
        raise LeftNeighborhood("correction left the working neighbourhood",
                               witness={"sup": float(np.max(np.abs(Uv)))})
    base = _profile_state(profile)
    out = np.empty((base.shape[0], model.r))
    for i, (B, W) in enumerate(zip(base, Uv)):
        ub, vb = B[:n], B[n:]
        try:
            out[i] = (model.q(ub + W[:n], vb + W[n:]) - model.q(ub, vb)
                      - model.dq_du(ub, vb) @ W[:n] - model.dq_dv(ub, vb) @ W[n:])
        except EquilibriumBranchUndefined as exc:
            raise LeftNeighborhood(str(exc)) from exc
    return GridFunction(profile.x, out, profile.epsilon)


def box_residual(model, profile):
    """First-block defect at nodes and box residual of the second block on cells."""
    from .chapman_enskog import ReducedSystem

    U = _profile_state(profile)
    n, h = model.n, profile.u_NS.h
    u, v = U[:, :n], U[:, n:]
    fm = ReducedSystem(model).f_star(profile.ends.u_minus)
    d = u @ model.A11.T + v @ model.A12.T - fm[None, :]
    q = np.array([model.q(a, b) for a, b in zip(u, v)])
    R = (np.diff(u, axis=0) @ model.A21.T + np.diff(v, axis=0) @ model.A22.T) / h \
        - 0.5 * (q[:-1] + q[1:])
    return d, R


def nonlinear_residual(model, U_bar):
    """``sup |A U_bar' - Q(U_bar)|`` with centered finite differences."""
    V = U_bar.values
    dV = fd_derivative(V, U_bar.h, 1)
    Q = np.array([model.Q(row) for row in V])
    return float(np.max(np.linalg.norm(dV @ model.A.T - Q, axis=1)))


def fixed_point_solve(model, reduced, profile, opts=None, U0=None, op=None):
    """Iterate ``U_{k+1} = T(U_k)`` from ``U0`` (default 0)."""
    opts = opts or SolverOptions()
    eps = profile.epsilon
    delta = default_delta(profile) if opts.delta is None else opts.delta
    if eps > 0:
        delta = min(delta, 1.0, 0.5 * profile.theta_fit / eps)
    spec = NormSpec(2, eps if eps > 0 else 1.0, delta)
    x = profile.x
    N, m = x.size, model.n + model.r
    if eps == 0:
        Z = GridFunction(x, np.zeros((N, m)), eps)
        return SolveResult(Z, GridFunction(x, _profile_state(profile), eps), 0, [], [],
                           {"H2": 0.0}, nonlinear_residual(model, Z), delta)
    if op is None:
        op = assemble(model, profile, eta=opts.eta, backend=opts.backend)
    d, Rbox = box_residual(model, profile)
    Mfull = op.M

    def T(U):
        MU = np.einsum("kij,kj->ki", Mfull, U.values)
        Nn = nonlinear_term(model, profile, U).values
        g = -Rbox + op.to_cells(MU + Nn)
        return op.solve_box(-d, g, beta_tol=None)

    U = GridFunction(x, np.zeros((N, m)), eps) if U0 is None else U0
    radius = opts.ball_radius_factor * eps ** 1.5
    incs, ratios = [], []
    first = None
    t0 = time.perf_counter()
    for it in range(1, opts.max_iter + 1):
        Un = T(U)
        if first is None:
            first = weighted_norm(Un, spec)
        inc = weighted_norm(Un - U, spec)
        incs.append(inc)
        if len(incs) >= 2 and incs[-2] > 0:
            ratios.append(inc / incs[-2])
            if len(ratios) >= 2 and ratios[-1] >= 1 and ratios[-2] >= 1:
                raise NoContraction("increments grew in two consecutive steps",
                                    witness={"ratios": ratios})
        U = Un
        if opts.enforce_ball and weighted_norm(U, spec) > radius:
            raise LeftBall(f"iterate norm {weighted_norm(U, spec):.3e} exceeds {radius:.3e}",
                           witness={"iteration": it})
        if inc <= opts.tol:
            break
    else:
        raise MaxIterExceeded(f"no convergence in {opts.max_iter} iterations",
                              witness={"increments": incs})
    U_bar = GridFunction(x, _profile_state(profile) + U.values, eps)
    norms = {"H2": weighted_norm(U, spec)}
    for k in range(3):
        norms[f"sup_d{k}"] = float(np.max(np.abs(fd_derivative(U.values, U.h, k)) if k else np.abs(U.values)))
    return SolveResult(U, U_bar, it, ratios, incs, norms, nonlinear_residual(model, U_bar),
                       delta, first, {"seconds": time.perf_counter() - t0,
                                      "phase": float(op.ell @ U.values[profile.u_NS.zero_index, :model.n]),
                                      "ball_radius": radius})


def verify_theorem_bounds(model, result, profile, delta=None):
    """Weighted sup norms of ``d^k`` of the corrector, of ``u - u_+-`` and of
    ``v - v*(u)`` for ``k = 0, 1, 2``."""
    eps = profile.epsilon
    delta = result.delta if delta is None else delta
    x, h, n = profile.x, profile.u_NS.h, model.n
    w = _weight(x, eps, delta)[:, None]
    Ub = result.U_bar.values
    corr = Ub - _profile_state(profile)
    dev = deviation_from_ends(GridFunction(x, Ub[:, :n], eps), profile.ends).values
    kin = Ub[:, n:] - np.array([model.v_star(u) for u in Ub[:, :n]])
    out = {}
    for k in range(3):
        def dk(a):
            return a if k == 0 else fd_derivative(a, h, k)
        out[f"corrector_d{k}"] = float(np.max(np.abs(w * dk(corr))))
        if k == 0:
            out["profile_d0"] = float(np.max(np.abs(w * dev)))
        else:
            out[f"profile_d{k}"] = float(np.max(np.abs(w * dk(Ub[:, :n]))))
        out[f"kinetic_d{k}"] = float(np.max(np.abs(w * dk(kin))))
    return out


def fit_slope(eps_list, values):
    e = np.asarray(eps_list, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = (v > 0) & np.isfinite(v)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(e[ok]), np.log(v[ok]), 1)[0])


def run_pipeline(model, epsilon, opts=None, reduced=None):
    """Profile, residual, corrector and bounds for a single amplitude."""
    opts = opts or SolverOptions()
    reduced = reduced or build_reduced(model)
    ends = hugoniot_endstates(reduced, model, epsilon)
    prof = ns_profile(reduced, model, ends, L=opts.L, h=opts.h)
    res = residual_Rv(model, prof)
    neg = residual_Rv(model, prof, closure="equilibrium")
    sol = fixed_point_solve(model, reduced, prof, opts)
    bounds = verify_theorem_bounds(model, sol, prof)
    dev = deviation_from_ends(prof.u_NS, ends).values
    spec = NormSpec(2, epsilon, sol.delta)
    ub, vb = sol.U_bar.values[:, :model.n], sol.U_bar.values[:, model.n:]
    kin = vb - np.array([model.v_star(u) for u in ub])
    row = {
        "epsilon": epsilon,
        "h": prof.u_NS.h,
        "X": float(prof.x[-1]),
        "theta_fit": prof.theta_fit,
        "sup_Rv": res.sup,
        "sup_Rv_equilibrium_closure": neg.sup,
        "Rv_decay_rate": res.decay_rate,
        "corrector_H2": weighted_norm(sol.U, spec),
        "corrector_sup": float(np.max(np.abs(sol.U.values))),
        "ns_d0": float(np.max(np.abs(dev))),
        "ns_d1": float(np.max(np.abs(fd_derivative(prof.u_NS.values, prof.u_NS.h, 1)))),
        "ns_d2": float(np.max(np.abs(fd_derivative(prof.u_NS.values, prof.u_NS.h, 2)))),
        "kinetic_sup": float(np.max(np.abs(kin))),
        "kinetic_sup_d1": float(np.max(np.abs(fd_derivative(kin, prof.u_NS.h, 1)))),
        "iterations": sol.iterations,
        "ratios": sol.ratios,
        "nonlinear_residual": sol.residual,
        "delta": sol.delta,
        **{f"bound_{k}": v for k, v in bounds.items()},
    }
    return row, prof, sol


SLOPE_KEYS = ("sup_Rv", "sup_Rv_equilibrium_closure", "corrector_H2", "corrector_sup",
              "ns_d0", "ns_d1", "ns_d2", "kinetic_sup", "kinetic_sup_d1")


def epsilon_sweep(model, epsilon_list, opts=None):
    """Run the pipeline for each amplitude; failures are isolated per row."""
    reduced = build_reduced(model)
    rows = []
    for eps in epsilon_list:
        try:
            row, _, _ = run_pipeline(model, eps, opts, reduced)
            row["status"] = "ok"
        except (RelaxShockError, ValueError) as exc:
            row = {"epsilon": eps, "status": "error",
                   "error": getattr(exc, "code", type(exc).__name__), "message": str(exc)}
        rows.append(row)
    good = [r for r in rows if r["status"] == "ok"]
    table = {"rows": rows, "slopes": {}, "flagged": len(good) < 2}
    if len(good) >= 2:
        es = [r["epsilon"] for r in good]
        table["slopes"] = {k: fit_slope(es, [r[k] for r in good]) for k in SLOPE_KEYS}
    return table
