"""Reduced viscous system ``f*(u)' = (b*(u) u')'`` and the approximate profile."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CountMismatch,
    NonFiniteState,
    ShootingDivergence,
    SingularMatrix,
    SingularRelaxationBlock,
    TailBelowFloor,
    WrongLaxCount,
)
from .numerics import fd_derivative, rk4_integrate, solve_dense
from .spaces import GridFunction, decay_rate_fit, make_grid

KERNEL_RTOL = 1e-8
DEFAULT_L = 40.0
DB_STEP = 1e-6


def default_grid(epsilon, L=DEFAULT_L, h=None):
    """``X = L / eps`` and ``h = min(0.25, 0.05 / eps)``."""
    if h is None:
        h = min(0.25, 0.05 / epsilon) if epsilon > 0 else 0.25
    X = L / epsilon if epsilon > 0 else 20.0
    return make_grid(X, h)


@dataclass(frozen=True)
class ReducedSystem:
    model: object

    @property
    def n(self):
        return self.model.n

    def f_star(self, u):
        u = np.asarray(u, dtype=float)
        return self.model.f(u, self.model.v_star(u))

    def df_star(self, u):
        m = self.model
        return m.A11 + m.A12 @ m.d_v_star(u)

    def c_star(self, u):
        m = self.model
        u = np.asarray(u, dtype=float)
        v = m.v_star(u)
        dv = m.d_v_star(u)
        rhs = m.A21 + m.A22 @ dv - dv @ (m.A11 + m.A12 @ dv)
        try:
            return solve_dense(m.dq_dv(u, v), rhs)
        except SingularMatrix as exc:
            raise SingularRelaxationBlock(f"dq/dv singular at u={u.tolist()}") from exc

    def b_star(self, u):
        return -self.model.A12 @ self.c_star(u)

    def db_star(self, u, w):
        """Directional derivative ``(D b*(u)) w`` as an ``(n, n, n)``-free matrix map.

        Returns ``T`` with ``T[:, j] = (d b*/d u_j) w``.
        """
        n = self.n
        T = np.zeros((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = DB_STEP
            T[:, j] = (self.b_star(u + e) - self.b_star(u - e)) @ w / (2 * DB_STEP)
        return T

    def left_kernel(self, u):
        """Orthonormal rows spanning the left kernel of ``b*(u)``."""
        B = self.b_star(u)
        U, s, _ = np.linalg.svd(B)
        tol = KERNEL_RTOL * max(s[0] if s.size else 0.0, 1e-300)
        rank = int(np.sum(s > tol))
        return U[:, rank:].T

    def right_kernel(self, u):
        B = self.b_star(u)
        _, s, Vt = np.linalg.svd(B)
        tol = KERNEL_RTOL * max(s[0] if s.size else 0.0, 1e-300)
        rank = int(np.sum(s > tol))
        return Vt[rank:].T

    def pi_star(self, u):
        """Spectral projection onto the zero eigenspace of ``b*(u)``."""
        R = self.right_kernel(u)
        if R.shape[1] == 0:
            return np.zeros((self.n, self.n))
        L = self.left_kernel(u)
        return R @ np.linalg.solve(L @ R, L)


def build_reduced(model):
    red = ReducedSystem(model)
    red.c_star(model.u0)  # fail early on a singular relaxation block
    return red


# {{{ profile

@dataclass
class NSProfile:
    x: np.ndarray
    u_NS: GridFunction
    v_NS: GridFunction
    ends: object
    epsilon: float
    theta_fit: float
    lax_count: int
    method: str = ""
    info: dict = field(default_factory=dict)

    @property
    def U(self):
        return np.hstack([self.u_NS.values, self.v_NS.values])


def lax_count(reduced, ends):
    """Positive speeds at ``u-`` plus negative speeds at ``u+``."""
    wm = np.linalg.eigvals(reduced.df_star(ends.u_minus)).real
    wp = np.linalg.eigvals(reduced.df_star(ends.u_plus)).real
    return int(np.sum(wm > 0) + np.sum(wp < 0))


def _phase_row(reduced, model):
    """Left eigenvector of ``df*(u0)`` for the eigenvalue of smallest modulus."""
    w, VL = scipy.linalg.eig(reduced.df_star(model.u0), left=True, right=False)
    k = int(np.argmin(np.abs(w)))
    ell = np.real(VL[:, k])
    return ell / np.linalg.norm(ell)


def _profile_scalar(reduced, ends, x, i0):
    um, up = ends.u_minus, ends.u_plus
    fm = reduced.f_star(um)
    mid = ends.midpoint

    def field_(_, u):
        return (reduced.f_star(u) - fm) / reduced.b_star(u)[0, 0]

    h = float(x[1] - x[0])
    try:
        right = rk4_integrate(field_, mid, (x[i0], x[-1]), h)
        left = rk4_integrate(field_, mid, (x[i0], x[0]), h)
    except NonFiniteState as exc:
        raise ShootingDivergence("profile integration blew up", witness=exc.witness) from exc
    u = np.vstack([left.y[:-1], right.y])
    if u.shape[0] != x.size or i0 != left.y.shape[0] - 1:
        raise ShootingDivergence("profile grid mismatch")
    return u


def _end_projections(reduced, u_end, sign):
    """Rows ``y b*(u_end)`` of left generalized eigenvectors of
    ``df* w = lam b* w`` with ``sign * Re lam > 0``."""
    F = reduced.df_star(u_end)
    B = reduced.b_star(u_end)
    w, VL = scipy.linalg.eig(F, B, left=True, right=False)
    rows = []
    for lam, y in zip(w, VL.T):
        if np.isfinite(lam) and sign * lam.real > 0:
            rows.append(np.real(y.conj() @ B))
    return np.array(rows).reshape(-1, B.shape[0])


def _tail_rate(reduced, ends):
    F = reduced.df_star(ends.u_plus)
    B = reduced.b_star(ends.u_plus)
    w = scipy.linalg.eigvals(F, B)
    w = w[np.isfinite(w)]
    return float(np.min(np.abs(w))) if w.size else 1.0


def _profile_collocation(reduced, model, ends, x, i0, tol=1e-13, maxit=30):
    n = model.n
    N = x.size
    h = float(x[1] - x[0])
    um, up, mid = ends.u_minus, ends.u_plus, ends.midpoint
    fm = reduced.f_star(um)
    Lk = reduced.left_kernel(model.u0)
    k = Lk.shape[0]
    M = scipy.linalg.null_space(Lk).T if k else np.eye(n)
    ell = _phase_row(reduced, model)
    Pm = _end_projections(reduced, um, -1.0)
    Pp = _end_projections(reduced, up, +1.0)
    nb = Pm.shape[0] + Pp.shape[0]
    if nb != n - k - 1:
        raise CountMismatch(f"profile boundary count {nb} != {n - k - 1}",
                            witness={"minus": Pm.shape[0], "plus": Pp.shape[0]})

    kappa = 0.5 * _tail_rate(reduced, ends)
    d = 0.5 * (up - um)
    u = mid[None, :] + np.tanh(kappa * (x - x[i0]))[:, None] * d[None, :]

    nrows = N * k + (N - 1) * (n - k) + 1 + nb
    for it in range(maxit):
        rows, cols, vals = [], [], []
        F = np.zeros(nrows)
        r = 0

        def put(row, j, block_row):
            for c in range(n):
                if block_row[c] != 0.0:
                    rows.append(row)
                    cols.append(j * n + c)
                    vals.append(block_row[c])

        dfs = [reduced.df_star(u[i]) for i in range(N)]
        fs = np.array([reduced.f_star(u[i]) for i in range(N)])
        for i in range(N):
            if k:
                F[r:r + k] = Lk @ (fs[i] - fm)
                J = Lk @ dfs[i]
                for a in range(k):
                    put(r + a, i, J[a])
                r += k
            if i < N - 1:
                ub = 0.5 * (u[i] + u[i + 1])
                du = (u[i + 1] - u[i]) / h
                B = reduced.b_star(ub)
                F[r:r + n - k] = M @ (B @ du - 0.5 * (fs[i] + fs[i + 1]) + fm)
                dB = reduced.db_star(ub, du)
                Ji = M @ (-B / h + 0.5 * dB - 0.5 * dfs[i])
                Jn = M @ (B / h + 0.5 * dB - 0.5 * dfs[i + 1])
                for a in range(n - k):
                    put(r + a, i, Ji[a])
                    put(r + a, i + 1, Jn[a])
                r += n - k
        F[r] = ell @ (u[i0] - mid)
        put(r, i0, ell)
        r += 1
        for row in Pm:
            F[r] = row @ (u[0] - um)
            put(r, 0, row)
            r += 1
        for row in Pp:
            F[r] = row @ (u[-1] - up)
            put(r, N - 1, row)
            r += 1
        J = sp.csc_matrix((vals, (rows, cols)), shape=(nrows, N * n))
        step = spla.spsolve(J, F).reshape(N, n)
        if not np.all(np.isfinite(step)):
            raise ShootingDivergence("collocation Newton step is not finite")
        u = u - step
        if np.max(np.abs(step)) <= tol * max(1.0, np.max(np.abs(u))):
            return u, it + 1
    raise ShootingDivergence("collocation Newton did not converge",
                             witness={"last_step": float(np.max(np.abs(step)))})


def v_ns(reduced, model, uNS):
    """``v_NS = v*(u_NS) + c*(u_NS) u_NS'`` with finite-difference ``u_NS'``."""
    du = fd_derivative(uNS.values, uNS.h, 1)
    v = np.array([model.v_star(u) + reduced.c_star(u) @ d for u, d in zip(uNS.values, du)])
    return uNS.with_values(v)


def deviation_from_ends(u, ends):
    x = u.x
    ref = np.where((x < 0)[:, None], ends.u_minus[None, :], ends.u_plus[None, :])
    return u.with_values(u.values - ref)


def ns_profile(reduced, model, ends, x=None, method=None, L=DEFAULT_L, h=None, anchor=0.0):
    """Approximate viscous profile on the grid ``x`` (default grid if omitted).

    ``method`` is ``"rk4"`` (scalar only) or ``"collocation"``; by default RK4
    is used for ``n == 1``.  The phase is fixed at the grid point ``anchor``.
    """
    eps = float(ends.epsilon)
    if x is None:
        x = default_grid(eps, L, h)
    x = np.asarray(x, dtype=float)
    if method is None:
        method = "rk4" if model.n == 1 else "collocation"
    info = {}
    ia = int(np.argmin(np.abs(x - anchor)))
    if abs(x[ia] - anchor) > 1e-9 * max(1.0, abs(anchor)):
        raise ValueError(f"anchor {anchor} is not a grid point")
    if eps == 0:
        u = np.tile(ends.u_minus, (x.size, 1))
        lax = model.n + 1
    else:
        lax = lax_count(reduced, ends)
        if lax != model.n + 1:
            raise WrongLaxCount(f"Lax count {lax} != {model.n + 1}", witness={"count": lax})
        if method == "rk4":
            if model.n != 1:
                raise ValueError("rk4 profile requires a scalar reduced system")
            u = _profile_scalar(reduced, ends, x, ia)
        elif method == "collocation":
            u, its = _profile_collocation(reduced, model, ends, x, ia)
            info["newton_iterations"] = its
        else:
            raise ValueError(f"unknown profile method {method!r}")
    uNS = GridFunction(x, u, eps)
    vNS = v_ns(reduced, model, uNS)
    theta = 0.0
    if eps > 0:
        try:
            fit = decay_rate_fit(deviation_from_ends(uNS, ends))
            theta = 0.5 * (fit.rate_minus + fit.rate_plus)
        except TailBelowFloor:
            theta = float("nan")
        info["end_gap"] = float(max(np.linalg.norm(u[0] - ends.u_minus),
                                    np.linalg.norm(u[-1] - ends.u_plus)))
    return NSProfile(x, uNS, vNS, ends, eps, theta, lax, method, info)

# }}}


# {{{ residual

@dataclass
class Residual:
    R_v: GridFunction
    sup: float
    decay_rate: Optional[float]
    first_block_defect: float


def residual_Rv(model, profile, closure="chapman_enskog"):
    """``R_v = A21 u' + A22 v' - q(u, v)`` on the profile.

    ``closure="equilibrium"`` replaces ``v_NS`` by ``v*(u_NS)`` (negative
    control: the residual then only decays like ``eps**2``).
    """
    u = profile.u_NS
    if closure == "chapman_enskog":
        v = profile.v_NS
    elif closure == "equilibrium":
        v = u.with_values(np.array([model.v_star(p) for p in u.values]))
    else:
        raise ValueError(f"unknown closure {closure!r}")
    du = fd_derivative(u.values, u.h, 1)
    dv = fd_derivative(v.values, v.h, 1)
    qv = np.array([model.q(a, b) for a, b in zip(u.values, v.values)])
    R = du @ model.A21.T + dv @ model.A22.T - qv
    Rg = u.with_values(R)
    red = ReducedSystem(model)
    fm = red.f_star(profile.ends.u_minus)
    first = u.values @ model.A11.T + v.values @ model.A12.T - fm[None, :]
    rate = None
    if profile.epsilon > 0 and closure == "chapman_enskog":
        try:
            fit = decay_rate_fit(Rg)
            rate = 0.5 * (fit.rate_minus + fit.rate_plus)
        except TailBelowFloor:
            rate = None
    return Residual(Rg, Rg.sup(), rate, float(np.max(np.abs(first))) if first.size else 0.0)

# }}}
