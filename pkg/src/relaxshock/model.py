"""Semilinear relaxation systems ``U_t + A U_x = Q(U)`` in block form.

``U = (u, v)`` with ``u`` the n conserved (fluid) variables and ``v`` the r
relaxing (kinetic) variables; ``Q = (0, q(u, v))``.  Models are immutable
after construction.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    EquilibriumBranchUndefined,
    LeftNeighborhood,
    NewtonDivergence,
    SubcharacteristicViolation,
)
from .numerics import eigen_small, solve_dense

EPS_MAX = 0.3
D2_STEP = 1e-4
NEWTON_TOL = 1e-12


@dataclass(frozen=True)
class Flux:
    name: str
    f: Callable
    df: Callable
    d2f: Callable


BURGERS = Flux("burgers", lambda u: 0.5 * u * u, lambda u: u, lambda u: 1.0 + 0.0 * u)
FLUXES = {"burgers": BURGERS}


@dataclass(frozen=True)
class RelaxationModel:
    """System data for ``A U' = Q(U)``.

    ``q(u, v)`` returns shape ``(r,)``; ``dq_du``/``dq_dv`` return ``(r, n)``
    and ``(r, r)``.  Missing equilibrium derivatives fall back to the implicit
    function theorem (first derivative) and centered differences of it with
    step ``1e-4`` (second derivative).  A missing ``v_star`` is obtained by
    Newton's method on ``q(u, .) = 0``.
    """

    name: str
    n: int
    r: int
    A: np.ndarray
    q: Callable
    dq_du: Callable
    dq_dv: Callable
    u0: np.ndarray
    v_star_fn: Optional[Callable] = None
    d_v_star_fn: Optional[Callable] = None
    d2_v_star_fn: Optional[Callable] = None
    S: Optional[Callable] = None
    v_seed: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    # {{{ blocks

    @property
    def A11(self):
        return self.A[:self.n, :self.n]

    @property
    def A12(self):
        return self.A[:self.n, self.n:]

    @property
    def A21(self):
        return self.A[self.n:, :self.n]

    @property
    def A22(self):
        return self.A[self.n:, self.n:]

    # }}}

    def split(self, U):
        U = np.asarray(U, dtype=float)
        return U[..., :self.n], U[..., self.n:]

    def Q(self, U):
        u, v = self.split(U)
        out = np.zeros(self.n + self.r)
        out[self.n:] = self.q(u, v)
        return out

    def dQ(self, U):
        u, v = self.split(U)
        J = np.zeros((self.n + self.r, self.n + self.r))
        J[self.n:, :self.n] = self.dq_du(u, v)
        J[self.n:, self.n:] = self.dq_dv(u, v)
        return J

    def f(self, u, v):
        return self.A11 @ u + self.A12 @ v

    # {{{ equilibrium

    def v_star(self, u):
        u = np.asarray(u, dtype=float)
        if self.v_star_fn is not None:
            return np.asarray(self.v_star_fn(u), dtype=float)
        v = np.asarray(self.v_seed(u) if self.v_seed is not None else np.zeros(self.r), dtype=float)
        for _ in range(50):
            res = self.q(u, v)
            if np.linalg.norm(res) <= NEWTON_TOL:
                return v
            v = v - solve_dense(self.dq_dv(u, v), res)
            if not np.all(np.isfinite(v)):
                break
        if np.linalg.norm(self.q(u, v)) <= 1e3 * NEWTON_TOL:
            return v
        raise NewtonDivergence(f"equilibrium Newton failed at u={u.tolist()}")

    def d_v_star(self, u):
        u = np.asarray(u, dtype=float)
        if self.d_v_star_fn is not None:
            return np.atleast_2d(np.asarray(self.d_v_star_fn(u), dtype=float))
        v = self.v_star(u)
        return -solve_dense(self.dq_dv(u, v), self.dq_du(u, v))

    def d2_v_star(self, u):
        """Second derivative, shape ``(r, n, n)`` indexed ``[i, j, k] = d2 v_i / du_j du_k``."""
        u = np.asarray(u, dtype=float)
        if self.d2_v_star_fn is not None:
            return np.asarray(self.d2_v_star_fn(u), dtype=float).reshape(self.r, self.n, self.n)
        out = np.zeros((self.r, self.n, self.n))
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = D2_STEP
            out[:, :, k] = (self.d_v_star(u + e) - self.d_v_star(u - e)) / (2 * D2_STEP)
        return out

    def U_star(self, u):
        return np.concatenate([np.asarray(u, dtype=float), self.v_star(u)])

    # }}}


# {{{ built-in models

def jin_xin_model(a=1.0, flux="burgers"):
    """Jin-Xin relaxation ``u_t + v_x = 0``, ``v_t + a^2 u_x = flux(u) - v``."""
    fl = FLUXES[flux] if isinstance(flux, str) else flux
    if a <= 0:
        raise ValueError("wave speed must be positive")
    u0 = np.zeros(1)
    if abs(fl.df(u0[0])) >= a:
        raise SubcharacteristicViolation(
            f"|flux'(u0)| = {abs(fl.df(u0[0]))} >= a = {a}")
    A = np.array([[0.0, 1.0], [a * a, 0.0]])

    def q(u, v):
        return np.atleast_1d(fl.f(u[0]) - v[0])

    def dq_du(u, v):
        return np.array([[fl.df(u[0])]])

    def dq_dv(u, v):
        return np.array([[-1.0]])

    def S(U):
        # S = P^{-T} diag(a^2 - f'^2, 1) P^{-1}, P = [[1, 0], [f', 1]]
        fp = fl.df(U[0])
        Pinv = np.array([[1.0, 0.0], [-fp, 1.0]])
        St = np.diag([a * a - fp * fp, 1.0])
        return Pinv.T @ St @ Pinv

    return RelaxationModel(
        name="jin_xin", n=1, r=1, A=A, q=q, dq_du=dq_du, dq_dv=dq_dv, u0=u0,
        v_star_fn=lambda u: np.atleast_1d(fl.f(u[0])),
        d_v_star_fn=lambda u: np.array([[fl.df(u[0])]]),
        d2_v_star_fn=lambda u: np.array([[[fl.d2f(u[0])]]]),
        S=S, params={"a": a, "flux": fl.name},
    )


_BW_T = np.array([[1.0, 1.0, 2.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0]])
_BW_TINV = np.linalg.inv(_BW_T)


def broadwell_densities(U):
    """Kinetic densities ``(f_right, f_left, f_rest)`` of ``U = (rho, m, z)``."""
    return _BW_TINV @ np.asarray(U, dtype=float)


def broadwell_model(rho0=1.0, m0=0.0, frame_speed=None):
    """One-dimensional Broadwell gas in moment variables ``(rho, m; z)``.

    Velocities ``+1, -1`` (weight 1) and ``0`` (weight 2); ``rho`` and ``m``
    are conserved and ``z = f_right + f_left`` relaxes.  The system is written
    in the frame moving with ``frame_speed`` (``A -> A - s I``); by default
    ``s`` is the positive equilibrium characteristic speed at the base state,
    so that a weak standing shock exists there.
    """
    u0 = np.array([rho0, m0], dtype=float)
    if rho0 <= 0:
        raise EquilibriumBranchUndefined("base density must be positive")
    if frame_speed is None:
        ub = m0 / rho0
        frame_speed = 0.5 * (ub + np.sqrt(2.0 - ub * ub))
    s = float(frame_speed)
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]) - s * np.eye(3)

    def _check(u):
        if u[0] <= 0:
            raise EquilibriumBranchUndefined(f"nonpositive density {u[0]}")

    def q(u, v):
        rho, m = u
        return np.atleast_1d(0.5 * (rho * rho - 2 * rho * v[0] + m * m))

    def dq_du(u, v):
        return np.array([[u[0] - v[0], u[1]]])

    def dq_dv(u, v):
        return np.array([[-u[0]]])

    def v_star(u):
        _check(u)
        rho, m = u
        return np.array([(rho * rho + m * m) / (2 * rho)])

    def d_v_star(u):
        _check(u)
        rho, m = u
        return np.array([[(rho * rho - m * m) / (2 * rho * rho), m / rho]])

    def d2_v_star(u):
        _check(u)
        rho, m = u
        return np.array([[[m * m / rho**3, -m / rho**2], [-m / rho**2, 1.0 / rho]]])

    def S(U):
        dens = broadwell_densities(U)
        if np.any(dens <= 0):
            raise EquilibriumBranchUndefined(f"nonpositive kinetic density {dens.tolist()}")
        Skin = np.diag([1.0 / dens[0], 1.0 / dens[1], 2.0 / dens[2]])
        return _BW_TINV.T @ Skin @ _BW_TINV

    return RelaxationModel(
        name="broadwell", n=2, r=1, A=A, q=q, dq_du=dq_du, dq_dv=dq_dv, u0=u0,
        v_star_fn=v_star, d_v_star_fn=d_v_star, d2_v_star_fn=d2_v_star, S=S,
        params={"rho0": rho0, "m0": m0, "frame_speed": s},
    )


def custom_model(name, A, n, q, dq_du, dq_dv, u0, v_star=None, d_v_star=None,
                 d2_v_star=None, S=None, v_seed=None):
    """Register a user model; see :class:`RelaxationModel` for fallbacks."""
    A = np.asarray(A, dtype=float)
    r = A.shape[0] - n
    return RelaxationModel(name=name, n=n, r=r, A=A, q=q, dq_du=dq_du, dq_dv=dq_dv,
                           u0=np.asarray(u0, dtype=float), v_star_fn=v_star,
                           d_v_star_fn=d_v_star, d2_v_star_fn=d2_v_star, S=S,
                           v_seed=v_seed)


def model_from_config(cfg):
    name = cfg.get("name", "jin_xin")
    if name == "jin_xin":
        return jin_xin_model(a=float(cfg.get("a", 1.0)), flux=cfg.get("flux", "burgers"))
    if name == "broadwell":
        return broadwell_model(rho0=float(cfg.get("rho0", 1.0)), m0=float(cfg.get("m0", 0.0)),
                               frame_speed=cfg.get("frame_speed"))
    raise ValueError(f"model {name!r} cannot be built from configuration")

# }}}


# {{{ equilibrium checks

def equilibrium_residual(model, u):
    u = np.asarray(u, dtype=float)
    return float(np.linalg.norm(model.q(u, model.v_star(u))))


def equilibrium_spectrum_margin(model, u):
    """``theta = -max Re spec(dq/dv)`` at the equilibrium over ``u``."""
    u = np.asarray(u, dtype=float)
    w = eigen_small(model.dq_dv(u, model.v_star(u)))
    return float(-np.max(w.real))


def sample_neighborhood(model, radius, count=20):
    """Deterministic points in the ball of ``radius`` around ``u0``."""
    n = model.n
    pts = []
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    for k in range(count):
        t = (k + 0.5) / count
        if n == 1:
            d = np.array([2 * t - 1.0])
        else:
            ang = 2 * np.pi * ((k * golden) % 1.0)
            d = np.zeros(n)
            d[0], d[1] = np.cos(ang), np.sin(ang)
            d *= np.sqrt(t)
        pts.append(model.u0 + radius * d)
    return pts

# }}}


# {{{ end states

@dataclass
class EndStates:
    u_minus: np.ndarray
    u_plus: np.ndarray
    epsilon: float
    r: Optional[np.ndarray] = None

    @property
    def midpoint(self):
        return 0.5 * (self.u_minus + self.u_plus)


def hugoniot_endstates(reduced, model, epsilon, eps_max=EPS_MAX, r_sign=1.0):
    """Standing Lax shock ``(u-, u+)`` of amplitude ``epsilon`` near ``u0``.

    Solves ``f*(u-) = f*(u+)``, ``|u+ - u-| = epsilon`` and, for ``n >= 2``,
    ``(u+ + u-)/2 - u0`` orthogonal to the complement of ``r(u0)`` by Newton's
    method seeded at ``u0 -+ (epsilon/2) r``.  ``r`` is oriented so that the
    derivative of the characteristic speed along it is negative; ``r_sign=-1``
    flips that convention (and hence swaps the end states).
    """
    from .structure import check_gnl

    if epsilon > eps_max:
        raise LeftNeighborhood(f"epsilon={epsilon} exceeds eps_max={eps_max}",
                               witness={"epsilon": epsilon, "eps_max": eps_max})
    _, r, _ = check_gnl(reduced, model.u0)
    r = r_sign * r
    n = model.n
    u0 = model.u0
    if epsilon == 0:
        return EndStates(u0.copy(), u0.copy(), 0.0, r)
    # transverse directions
    if n > 1:
        _, _, Vt = np.linalg.svd(r[None, :])
        perp = Vt[1:]
    else:
        perp = np.zeros((0, n))

    def F(z):
        um, up = z[:n], z[n:]
        d = up - um
        return np.concatenate([
            reduced.f_star(up) - reduced.f_star(um),
            [d @ d - epsilon**2],
            perp @ (0.5 * (um + up) - u0),
        ])

    def J(z):
        um, up = z[:n], z[n:]
        d = up - um
        return np.block([
            [-reduced.df_star(um), reduced.df_star(up)],
            [-2 * d[None, :], 2 * d[None, :]],
            [0.5 * perp, 0.5 * perp],
        ])

    z = np.concatenate([u0 - 0.5 * epsilon * r, u0 + 0.5 * epsilon * r])
    for _ in range(60):
        res = F(z)
        if np.linalg.norm(res) < 1e-15:
            break
        step = solve_dense(J(z), res)
        z = z - step
        if not np.all(np.isfinite(z)):
            raise NewtonDivergence("Hugoniot Newton produced non-finite iterate")
        if np.linalg.norm(step) < 1e-15 * max(1.0, np.linalg.norm(z)):
            break
    um, up = z[:n], z[n:]
    if np.linalg.norm(reduced.f_star(up) - reduced.f_star(um)) > 1e-12:
        raise NewtonDivergence("Hugoniot Newton did not converge",
                               witness={"residual": float(np.linalg.norm(F(z)))})
    if np.dot(up - um, r) <= 0:
        raise NewtonDivergence("Hugoniot Newton converged to the wrong branch")
    return EndStates(um, up, float(np.linalg.norm(up - um)), r)

# }}}
