"""The linearized profile operator, its right inverse and related diagnostics.

The operator acting on ``U = (u, v)`` is

    L U = (A11 u + A12 v - eta u',  A21 u' + A22 v' - Q21 u - Q22 v - eta v'')

with ``Q21, Q22`` the relaxation Jacobians frozen at ``(u_NS, v*(u_NS))``.
The first block is imposed at every node and the second block by the box
(midpoint) rule on every cell; one phase row ``ell . u(0) = 0`` and, for
``r > 1``, projection rows at ``+-X`` close the system.  Unknowns are
interleaved node by node so the matrix is banded.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    A11StarSingular,
    BorderResidualTooLarge,
    CountMismatch,
    EigenvalueNotSimple,
    NoViscosityConvergence,
    SingularBorderedSystem,
    SingularMatrix,
    SlowEigenvalueNotSimple,
    SpectralGapViolation,
)
from .numerics import BandedLU, BandedSystem, eigen_small, fd_derivative
from .spaces import GridFunction, NormSpec, weighted_norm

DEFAULT_ETA = 1e-3
BETA_TOL = 1e-3


def phase_vector(reduced, u0):
    """Unit left eigenvector of ``df*(u0)`` for its eigenvalue of smallest modulus."""
    F = reduced.df_star(np.asarray(u0, dtype=float))
    w, VL = scipy.linalg.eig(F, left=True, right=False)
    k = int(np.argmin(np.abs(w)))
    others = np.delete(w, k)
    if abs(w[k].imag) > 1e-12 or (others.size and np.min(np.abs(others - w[k])) < 1e-6):
        raise EigenvalueNotSimple(f"eigenvalue {w[k]} of df*(u0) is not simple and real")
    ell = np.real(VL[:, k])
    ell /= np.linalg.norm(ell)
    if ell[np.argmax(np.abs(ell))] < 0:
        ell = -ell
    return ell


def default_delta(profile):
    """``0.25 * theta`` with ``theta`` the profile decay rate in the stretched variable."""
    if profile.epsilon <= 0 or not np.isfinite(profile.theta_fit):
        return 0.0
    return float(min(1.0, 0.25 * profile.theta_fit / profile.epsilon))


def _stencil(i, N, k, h):
    if k == 1:
        if 0 < i < N - 1:
            return (i - 1, i + 1), (-0.5 / h, 0.5 / h)
        if i == 0:
            return (0, 1, 2), (-1.5 / h, 2.0 / h, -0.5 / h)
        return (N - 3, N - 2, N - 1), (0.5 / h, -2.0 / h, 1.5 / h)
    h2 = h * h
    if 0 < i < N - 1:
        return (i - 1, i, i + 1), (1 / h2, -2 / h2, 1 / h2)
    if i == 0:
        return (0, 1, 2, 3), (2 / h2, -5 / h2, 4 / h2, -1 / h2)
    return (N - 4, N - 3, N - 2, N - 1), (-1 / h2, 4 / h2, -5 / h2, 2 / h2)


def _projection_rows(E, J, sign):
    """Real rows ``y^H E`` for left generalized eigenvectors of ``J w = lam E w``
    with ``sign * Re lam > 0``."""
    w, VL = scipy.linalg.eig(J, E, left=True, right=False)
    rows = []
    for lam, y in zip(w, VL.T):
        if not np.isfinite(lam) or sign * lam.real <= 0:
            continue
        z = y.conj() @ E
        if abs(lam.imag) > 1e-12 * max(1.0, abs(lam)):
            if lam.imag > 0:
                rows.extend([z.real, z.imag])
        else:
            rows.append(z.real)
    m = E.shape[1]
    return np.array(rows, dtype=float).reshape(-1, m)


class LinearizedOperator:
    """Assembled, factored linearization about an NS profile."""

    def __init__(self, model, profile, eta=DEFAULT_ETA, ell=None, backend=None):
        from .chapman_enskog import ReducedSystem

        self.model, self.profile, self.eta = model, profile, float(eta)
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        self.reduced = ReducedSystem(model)
        self.x = profile.x
        self.h = float(self.x[1] - self.x[0])
        n, r, N = model.n, model.r, self.x.size
        self.n, self.r, self.N, self.m = n, r, N, n + r
        self.i0 = profile.u_NS.zero_index
        self.ell = phase_vector(self.reduced, model.u0) if ell is None else np.asarray(ell, float)
        ub, vb = profile.u_NS.values, profile.v_NS.values
        self.Q21 = np.empty((N, r, n))
        self.Q22 = np.empty((N, r, r))
        self.M = np.empty((N, r, n + r))
        for i in range(N):
            vs = model.v_star(ub[i])
            self.Q21[i] = model.dq_du(ub[i], vs)
            self.Q22[i] = model.dq_dv(ub[i], vs)
            self.M[i, :, :n] = model.dq_du(ub[i], vb[i]) - self.Q21[i]
            self.M[i, :, n:] = model.dq_dv(ub[i], vb[i]) - self.Q22[i]
        self._assemble()
        try:
            self.lu = BandedLU(self.banded, backend=backend)
        except SingularMatrix as exc:
            raise SingularBorderedSystem("linearized system is singular",
                                         witness=exc.witness) from exc

    # {{{ assembly

    def _end_rows(self, i, sign):
        n, r = self.n, self.r
        E = np.zeros((self.m, self.m))
        E[n:, :n] = self.model.A21
        E[n:, n:] = self.model.A22
        J = np.zeros((self.m, self.m))
        J[:n, :n] = -self.model.A11
        J[:n, n:] = -self.model.A12
        J[n:, :n] = self.Q21[i]
        J[n:, n:] = self.Q22[i]
        return _projection_rows(E, J, sign)

    def _assemble(self):
        model, n, r, m, N, h, eta = self.model, self.n, self.r, self.m, self.N, self.h, self.eta
        A11, A12, A21, A22 = model.A11, model.A12, model.A21, model.A22
        Pm = self._end_rows(0, -1.0)
        Pp = self._end_rows(N - 1, +1.0)
        if Pm.shape[0] + Pp.shape[0] != r - 1:
            raise CountMismatch(f"{Pm.shape[0] + Pp.shape[0]} projection conditions, need {r - 1}",
                                witness={"minus": Pm.shape[0], "plus": Pp.shape[0]})
        rows, cols, vals = [], [], []

        def put(row, node, block):
            block = np.atleast_2d(block)
            for a in range(block.shape[0]):
                for c in range(block.shape[1]):
                    if block[a, c] != 0.0:
                        rows.append(row + a)
                        cols.append(node * m + c)
                        vals.append(block[a, c])

        node_row = np.empty(N, dtype=int)
        cell_row = np.empty(max(N - 1, 0), dtype=int)
        R = 0
        for row in Pm:
            put(R, 0, row)
            R += 1
        self.phase_row = -1
        for i in range(N):
            node_row[i] = R
            put(R, i, np.hstack([A11, A12]))
            if eta:
                idx, wts = _stencil(i, N, 1, h)
                for j, wt in zip(idx, wts):
                    put(R, j, np.hstack([-eta * wt * np.eye(n), np.zeros((n, r))]))
            R += n
            if i == self.i0:
                self.phase_row = R
                put(R, i, np.concatenate([self.ell, np.zeros(r)]))
                R += 1
            if i < N - 1:
                cell_row[i] = R
                for j, s in ((i, -1.0), (i + 1, 1.0)):
                    blk = np.hstack([s * A21 / h - 0.5 * self.Q21[j], s * A22 / h - 0.5 * self.Q22[j]])
                    put(R, j, blk)
                if eta:
                    for j0 in (i, i + 1):
                        idx, wts = _stencil(j0, N, 2, h)
                        for j, wt in zip(idx, wts):
                            put(R, j, np.hstack([np.zeros((r, n)), -0.5 * eta * wt * np.eye(r)]))
                R += r
        for row in Pp:
            put(R, N - 1, row)
            R += 1
        if R != N * m:
            raise CountMismatch(f"assembled {R} rows for {N * m} unknowns")
        self.node_row, self.cell_row = node_row, cell_row
        self.matrix = sp.csr_matrix((vals, (rows, cols)), shape=(R, R))
        self.banded = BandedSystem.from_sparse(self.matrix)

    # }}}

    def rhs(self, f_nodes, g_cells, phase=0.0):
        """Right-hand side vector from node values of ``f`` and cell values of ``g``."""
        b = np.zeros(self.N * self.m)
        f_nodes = np.asarray(f_nodes, dtype=float).reshape(self.N, self.n)
        g_cells = np.asarray(g_cells, dtype=float).reshape(self.N - 1, self.r)
        for a in range(self.n):
            b[self.node_row + a] = f_nodes[:, a]
        for a in range(self.r):
            b[self.cell_row + a] = g_cells[:, a]
        b[self.phase_row] = phase
        return b

    def apply(self, U):
        """``L U`` as ``(f at nodes, g on cells)``."""
        y = self.matrix @ np.asarray(U, dtype=float).reshape(-1)
        f = np.stack([y[self.node_row + a] for a in range(self.n)], axis=1)
        g = np.stack([y[self.cell_row + a] for a in range(self.r)], axis=1)
        return f, g

    def solve_box(self, f_nodes, g_cells, beta_tol=BETA_TOL):
        sol = self.lu.solve(self.rhs(f_nodes, g_cells)).reshape(self.N, self.m)
        scale = float(np.max(np.abs(sol))) if sol.size else 0.0
        beta = 0.0 if scale == 0.0 else float(
            max(np.max(np.abs(sol[0])), np.max(np.abs(sol[-1]))) / scale)
        self.last_beta = beta
        if beta_tol is not None and beta > beta_tol:
            raise BorderResidualTooLarge(f"far-field mismatch {beta:.3e} > {beta_tol:.1e}",
                                         witness={"beta": beta})
        return GridFunction(self.x, sol, self.profile.epsilon)

    def to_cells(self, g_nodes):
        g = np.asarray(g_nodes, dtype=float).reshape(self.N, -1)
        return 0.5 * (g[:-1] + g[1:])


def assemble(model, profile, eta=DEFAULT_ETA, ell=None, backend=None):
    return LinearizedOperator(model, profile, eta=eta, ell=ell, backend=backend)


def apply_right_inverse(op, f, g, beta_tol=BETA_TOL):
    """Solve ``L U = (f, g)``, ``ell . u(0) = 0`` for node data ``f`` and ``g``.

    ``f`` and ``g`` may be :class:`GridFunction` or arrays.  The far-field
    mismatch ``beta = max|U(+-X)| / max|U|`` is stored on ``op.last_beta``.
    """
    fv = f.values if isinstance(f, GridFunction) else f
    gv = g.values if isinstance(g, GridFunction) else g
    return op.solve_box(fv, op.to_cells(gv), beta_tol=beta_tol)


# {{{ macro-micro

@dataclass
class MacroMicro:
    u: GridFunction
    v_tilde: GridFunction
    p: np.ndarray
    A_tilde_sup: float = 0.0
    C_tilde_sup: float = 0.0
    Q_tilde_offdiag_sup: float = 0.0


def macro_micro(op, U):
    """``v~ = v + p u`` with ``p = -dv*(u_NS)`` and the tilde-coordinate data."""
    model, n, r = op.model, op.n, op.r
    ub = op.profile.u_NS.values
    p = np.array([-model.d_v_star(u) for u in ub])
    Uv = U.values
    u = Uv[:, :n]
    vt = Uv[:, n:] + np.einsum("kij,kj->ki", p, u)
    P = np.tile(np.eye(n + r), (op.N, 1, 1))
    P[:, n:, :n] = -p
    Pd = fd_derivative(P.reshape(op.N, -1), op.h, 1).reshape(P.shape)
    Pinv = np.linalg.inv(P)
    At = Pinv @ model.A @ P
    Ct = -Pinv @ model.A @ Pd
    Qoff = np.zeros(op.N)
    for i in range(op.N):
        dQ = np.zeros((n + r, n + r))
        dQ[n:, :n] = op.Q21[i]
        dQ[n:, n:] = op.Q22[i]
        Qt = Pinv[i] @ dQ @ P[i]
        Qoff[i] = np.max(np.abs(Qt[:, :n]))
    return MacroMicro(U.with_values(u), U.with_values(vt), p,
                      float(np.max(np.abs(At))), float(np.max(np.abs(Ct))), float(Qoff.max()))


def energy_diagnostic(op, U, f, g, delta=0.0, k=2):
    """Both sides of the basic energy estimate and its order-``k`` analogue.

    Returns the empirical constants ``C_emp = lhs / rhs``.
    """
    eps = op.profile.epsilon
    fv = f.values if isinstance(f, GridFunction) else np.asarray(f, float).reshape(op.N, -1)
    gv = g.values if isinstance(g, GridFunction) else np.asarray(g, float).reshape(op.N, -1)
    mm = macro_micro(op, U)
    x, h = op.x, op.h

    def L2(vals):
        return weighted_norm(GridFunction(x, vals, eps), NormSpec(0, eps, delta))

    def Hs(vals, s):
        return weighted_norm(GridFunction(x, vals, eps), NormSpec(s, eps, delta)) if s >= 0 else 0.0

    Ud = fd_derivative(U.values, h, 1)
    srcs = [fv, fd_derivative(fv, h, 1), fd_derivative(fv, h, 2), gv, fd_derivative(gv, h, 1)]
    src = np.hstack(srcs)
    lhs = L2(Ud) + L2(mm.v_tilde.values)
    rhs = L2(src) + eps * L2(mm.u.values)
    out = {"lhs": lhs, "rhs": rhs, "C_emp": lhs / rhs if rhs > 0 else 0.0}
    if k >= 1:
        def dk(vals, j):
            for _ in range(j):
                vals = fd_derivative(vals, h, 1)
            return vals
        lhs_k = L2(dk(Ud, k)) + L2(dk(mm.v_tilde.values, k))
        rhs_k = (L2(dk(src, k)) + eps**k * (Hs(Ud, k - 1) + eps * Hs(mm.v_tilde.values, k - 1)
                                          + eps * L2(mm.u.values)))
        out.update({"k": k, "lhs_k": lhs_k, "rhs_k": rhs_k,
                    "C_emp_k": lhs_k / rhs_k if rhs_k > 0 else 0.0})
    return out

# }}}


# {{{ fluid-level inverse and slow/fast splitting

@dataclass
class SlowFastSplit:
    omega: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    mu: np.ndarray
    alpha: float
    mu_minus: float
    mu_plus: float
    omega_prime_sup: float = 0.0
    reconstruction_error: float = 0.0
    info: dict = field(default_factory=dict)


def slow_fast_split(m, epsilon, h=None):
    """Track ``m = omega blockdiag(p+, eps mu, p-) omega^{-1}`` along the grid.

    ``m`` has shape ``(N, d, d)``.  Fast eigenvalues must satisfy
    ``|Re| >= c`` with ``c = 0.25 * min |Re|`` of the fast spectrum at the
    ends; the slow one must be real, simple and of modulus ``<= c/2``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None, None]
    N, d, _ = m.shape
    if d == 1:
        mu = m[:, 0, 0] / epsilon
        return SlowFastSplit(np.ones((N, 1, 1)), np.zeros((N, 0, 0)), np.zeros((N, 0, 0)),
                             mu, float(min(mu[0], -mu[-1])), float(mu[0]), float(mu[-1]))
    ends = [eigen_small(m[0]), eigen_small(m[-1])]
    fast_re = []
    for w in ends:
        k = int(np.argmin(np.abs(w)))
        fast_re.extend(np.abs(np.delete(w, k).real))
    c = 0.25 * min(fast_re)
    omegas = np.empty((N, d, d))
    pp, pm = [], []
    mu = np.empty(N)
    prev = None
    err = 0.0
    for i in range(N):
        w, V = eigen_small(m[i], vectors=True)
        k = int(np.argmin(np.abs(w)))
        slow = w[k]
        rest = np.delete(w, k)
        if abs(slow.imag) > 1e-10 or abs(slow) > c / 2 or np.min(np.abs(rest - slow)) < 1e-10:
            raise SlowEigenvalueNotSimple(f"slow eigenvalue {slow} at node {i}",
                                          witness={"node": i, "eigenvalues": w})
        if np.min(np.abs(rest.real)) < c:
            raise SpectralGapViolation(f"fast eigenvalue within {c:.3e} of the axis at node {i}",
                                       witness={"node": i, "eigenvalues": w})
        plus = [j for j in range(d) if j != k and w[j].real > 0]
        minus = [j for j in range(d) if j != k and w[j].real < 0]
        cols = []
        for group in (plus, [k], minus):
            for j in group:
                if abs(w[j].imag) > 1e-12 and w[j].imag < 0:
                    continue
                if abs(w[j].imag) > 1e-12:
                    cols.extend([V[:, j].real, V[:, j].imag])
                else:
                    cols.append(V[:, j].real)
        Om = np.array(cols).T
        Om /= np.linalg.norm(Om, axis=0)
        if prev is not None:
            s = np.sign(np.sum(Om * prev, axis=0))
            s[s == 0] = 1.0
            Om = Om * s
        prev = Om
        omegas[i] = Om
        P = np.linalg.solve(Om, m[i] @ Om)
        a, b = len(cols) - len(minus) - 1, len(cols) - len(minus)
        blk = np.zeros_like(P)
        blk[:a, :a] = P[:a, :a]
        blk[a, a] = P[a, a]
        blk[b:, b:] = P[b:, b:]
        err = max(err, float(np.max(np.abs(P - blk))))
        mu[i] = P[a, a] / epsilon
        pp.append(P[:a, :a])
        pm.append(P[b:, b:])
    if err > 1e-8 * max(1.0, float(np.max(np.abs(m)))):
        raise SpectralGapViolation(f"block-diagonalisation defect {err:.3e}")
    osup = 0.0
    if h is not None and N >= 3:
        osup = float(np.max(np.abs(fd_derivative(omegas.reshape(N, -1), h, 1))))
    return SlowFastSplit(omegas, np.array(pp), np.array(pm), mu, float(min(mu[0], -mu[-1])),
                         float(mu[0]), float(mu[-1]), osup, err, {"gap": c})


@dataclass
class FluidReduction:
    """Data of the reduced nondegenerate ODE ``w' = m w + s`` for ``w = u2 + V u1``."""

    W1: np.ndarray
    W2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    b22: np.ndarray
    Vbar: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    m: np.ndarray


def fluid_reduction(reduced, profile):
    model = reduced.model
    n = model.n
    T1 = reduced.left_kernel(model.u0)
    k = T1.shape[0]
    T2 = scipy.linalg.null_space(T1).T if k else np.eye(n)
    W1 = reduced.right_kernel(model.u0)
    W2 = scipy.linalg.null_space(W1.T) if W1.shape[1] else np.eye(n)
    ub = profile.u_NS.values
    N = ub.shape[0]
    d = n - k
    b22 = np.empty((N, d, d))
    b21 = np.empty((N, d, k))
    F = np.empty((N, n, n))
    for i in range(N):
        B = reduced.b_star(ub[i])
        b22[i] = T2 @ B @ W2
        b21[i] = T2 @ B @ W1
        F[i] = reduced.df_star(ub[i])
    Vbar = np.linalg.solve(b22, b21)
    Vd = fd_derivative(Vbar.reshape(N, -1), profile.u_NS.h, 1).reshape(Vbar.shape)
    F11 = T1 @ F @ W1
    F12 = T1 @ F @ W2
    F21 = T2 @ F @ W1
    F22 = T2 @ F @ W2
    a11 = F11 - F12 @ Vbar
    a21 = F21 - F22 @ Vbar + b22 @ Vd
    if k:
        sv = np.linalg.svd(a11, compute_uv=False)
        bad = np.argmin(sv[:, -1] / np.maximum(sv[:, 0], 1e-300))
        if sv[bad, -1] <= 1e-10 * max(sv[bad, 0], 1e-300):
            raise A11StarSingular(f"reduced a11 block singular at node {bad}",
                                  witness={"x": float(profile.x[bad])})
        check = a21 @ np.linalg.solve(a11, F12)
    else:
        check = np.zeros((N, d, d))
    acheck = F22 - check
    m = np.linalg.solve(b22, acheck)
    return FluidReduction(W1, W2, T1, T2, b22, Vbar, a11, F12, a21, m)


def ce_right_inverse_fluid(reduced, profile, h_rhs, ell=None, return_split=False):
    """Right inverse of ``b*(u_NS) d/dx - df*(u_NS)`` with ``ell . u(0) = 0``.

    The equation is reduced to ``w' = m w + b22^{-1} h_check`` for
    ``w = u2 + V u1`` (``u1`` solved algebraically), which is discretized by
    the box rule with projection conditions on the fast modes.
    """
    model = reduced.model
    n = model.n
    hv = h_rhs.values if isinstance(h_rhs, GridFunction) else np.asarray(h_rhs, float)
    hv = hv.reshape(-1, n)
    x = profile.x
    N, hstep = x.size, float(x[1] - x[0])
    i0 = profile.u_NS.zero_index
    if ell is None:
        ell = phase_vector(reduced, model.u0)
    red = fluid_reduction(reduced, profile)
    k = red.T1.shape[0]
    d = n - k
    h1 = hv @ red.T1.T
    h2 = hv @ red.T2.T
    if k:
        a11inv_h1 = np.linalg.solve(red.a11, h1[:, :, None])[:, :, 0]
        a11inv_a12 = np.linalg.solve(red.a11, red.a12)
        hcheck = h2 - np.einsum("kij,kj->ki", red.a21, a11inv_h1)
    else:
        a11inv_h1 = np.zeros((N, 0))
        a11inv_a12 = np.zeros((N, 0, d))
        hcheck = h2
    s = np.linalg.solve(red.b22, hcheck[:, :, None])[:, :, 0]
    split = slow_fast_split(red.m, profile.epsilon, hstep)
    rows_m = _ode_projection(red.m[0], -1.0)
    rows_p = _ode_projection(red.m[-1], +1.0)
    if rows_m.shape[0] + rows_p.shape[0] != d - 1:
        raise CountMismatch("fast-mode boundary count mismatch")
    # u(0) = W1 u1 + W2 (w - V u1),  u1 = -a11^{-1}(h1 + a12 w)
    V0 = red.Vbar[i0]
    G = -a11inv_a12[i0] if k else np.zeros((0, d))
    g0 = -a11inv_h1[i0] if k else np.zeros(0)
    lin = red.W1 @ G + red.W2 @ (np.eye(d) - V0 @ G) if k else red.W2.copy()
    const = red.W1 @ g0 - red.W2 @ (V0 @ g0) if k else np.zeros(n)
    phase_coef = ell @ lin
    phase_rhs = -ell @ const
    rows, cols, vals = [], [], []
    rhs = np.zeros(N * d)
    R = 0

    def put(row, node, block):
        block = np.atleast_2d(block)
        for a in range(block.shape[0]):
            for c in range(block.shape[1]):
                if block[a, c] != 0.0:
                    rows.append(row + a)
                    cols.append(node * d + c)
                    vals.append(block[a, c])

    for row in rows_m:
        put(R, 0, row)
        R += 1
    I = np.eye(d)
    for i in range(N):
        if i == i0:
            put(R, i, phase_coef)
            rhs[R] = phase_rhs
            R += 1
        if i < N - 1:
            put(R, i, -I / hstep - 0.5 * red.m[i])
            put(R, i + 1, I / hstep - 0.5 * red.m[i + 1])
            rhs[R:R + d] = 0.5 * (s[i] + s[i + 1])
            R += d
    for row in rows_p:
        put(R, N - 1, row)
        R += 1
    A = sp.csr_matrix((vals, (rows, cols)), shape=(R, N * d))
    w = BandedLU(BandedSystem.from_sparse(A)).solve(rhs).reshape(N, d)
    if k:
        u1 = -(a11inv_h1 + np.einsum("kij,kj->ki", a11inv_a12, w))
        u2 = w - np.einsum("kij,kj->ki", red.Vbar, u1)
        u = u1 @ red.W1.T + u2 @ red.W2.T
    else:
        u = w @ red.W2.T
    out = GridFunction(x, u, profile.epsilon)
    if return_split:
        return out, split
    return out


def _ode_projection(m, sign):
    w, VL = scipy.linalg.eig(m, left=True, right=False)
    k = int(np.argmin(np.abs(w)))
    rows = []
    for j, (lam, y) in enumerate(zip(w, VL.T)):
        if j == k or sign * lam.real <= 0:
            continue
        if abs(lam.imag) > 1e-12:
            if lam.imag > 0:
                rows.extend([y.real, y.imag])
        else:
            rows.append(y.real)
    return np.array(rows, dtype=float).reshape(-1, m.shape[0])

# }}}


# {{{ viscosity sweep

def viscosity_sweep(model, profile, f, g, eta_list=(1e-2, 1e-3, 1e-4), delta=None,
                    ratio_max=0.6, uniform_tol=0.2, strict=True):
    """Solve with decreasing ``eta`` and report successive ``H^2`` differences."""
    eta_list = list(eta_list)
    if len(eta_list) < 3 or any(b >= a for a, b in zip(eta_list, eta_list[1:])):
        raise ValueError("eta_list must be decreasing with at least 3 entries")
    if delta is None:
        delta = default_delta(profile)
    spec = NormSpec(2, profile.epsilon if profile.epsilon > 0 else 1.0, delta)
    sols = [apply_right_inverse(assemble(model, profile, eta), f, g, beta_tol=None)
            for eta in eta_list]
    norms = [weighted_norm(U, spec) for U in sols]
    diffs = [weighted_norm(a - b, spec) for a, b in zip(sols, sols[1:])]
    ratios = [b / a if a > 0 else 0.0 for a, b in zip(diffs, diffs[1:])]
    nmax = max(norms)
    spread = (nmax - min(norms)) / nmax if nmax > 0 else 0.0
    report = {"eta": eta_list, "norms": norms, "differences": diffs, "ratios": ratios,
              "norm_spread": spread,
              "monotone": all(b <= a for a, b in zip(diffs, diffs[1:])),
              "solutions": sols}
    ok = report["monotone"] and all(q <= ratio_max for q in ratios) and spread <= uniform_tol
    report["passed"] = bool(ok or nmax == 0.0)
    if strict and not report["passed"]:
        raise NoViscosityConvergence("viscosity sweep did not converge",
                                     witness={k: report[k] for k in ("differences", "ratios",
                                                                      "norm_spread")})
    return report

# }}}
