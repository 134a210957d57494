"""Dense/banded linear algebra, finite differences and RK4.

The banded LU factorization is the inner loop of every linearized solve; it is
provided by the compiled ``_banded_ext`` module when available and by
``_banded_py`` otherwise.  Set ``RELAXSHOCK_PURE_PYTHON=1`` to force the
fallback.
"""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import GridTooSmall, NoConvergence, NonFiniteState, SingularMatrix

from . import _banded_py

if os.environ.get("RELAXSHOCK_PURE_PYTHON", "") not in ("", "0"):
    _kernel = _banded_py
    BACKEND = "python"
else:
    try:
        from . import _banded_ext as _kernel
        BACKEND = "compiled"
    except ImportError:
        _kernel = _banded_py
        BACKEND = "python"

PIVOT_RTOL = 1e-13
EIGEN_CAP = 4096


def kernels(backend=None):
    """Return the kernel module for ``backend`` ("compiled", "python" or None)."""
    if backend is None:
        return _kernel
    if backend == "python":
        return _banded_py
    if backend == "compiled":
        from . import _banded_ext
        return _banded_ext
    raise ValueError(f"unknown backend {backend!r}")


# {{{ dense

def solve_dense(M, b):
    """Solve ``M x = b`` by LU with partial (row) pivoting.

    Raises :class:`SingularMatrix` when a pivot is below ``1e-13`` times the
    largest row norm of ``M``.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if b.shape[0] != M.shape[0]:
        raise ValueError("right-hand side length does not match matrix")
    scale = np.max(np.linalg.norm(M, axis=1)) if M.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < PIVOT_RTOL * scale:
        k = int(np.argmin(pivots))
        raise SingularMatrix(f"pivot {pivots[k]:.3e} at column {k}",
                             witness={"column": k, "pivot": float(pivots[k])})
    return scipy.linalg.lu_solve((lu, piv), b)


def eigen_small(M, vectors=False, symmetric=False, cap=EIGEN_CAP):
    """Eigenvalues of a small dense matrix, sorted by descending real part.

    Every returned pair is checked against ``|Mv - lv| <= 1e-8 |M|``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.shape[0] > cap:
        raise ValueError(f"matrix size {M.shape[0]} exceeds eigen cap {cap}")
    try:
        if symmetric:
            w, V = np.linalg.eigh(M)
            w = w.astype(complex)
            V = V.astype(complex)
        else:
            w, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    order = np.lexsort((-w.imag, -w.real))
    w = w[order]
    V = V[:, order]
    normM = np.linalg.norm(M, 2) if M.size else 0.0
    if M.size:
        res = np.linalg.norm(M @ V - V * w, axis=0)
        if np.any(res > 1e-8 * max(normM, 1e-300)):
            raise NoConvergence("eigenpair residual above tolerance",
                                witness={"max_residual": float(res.max())})
    if vectors:
        return w, V
    return w

# }}}


# {{{ banded

@dataclass
class BandedSystem:
    """Banded matrix in ``(kl + ku + 1, size)`` diagonal-ordered storage.

    ``band[ku + i - j, j] == A[i, j]``, the layout used by
    :func:`scipy.linalg.solve_banded`.
    """

    size: int
    kl: int
    ku: int
    band: np.ndarray
    rhs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kl >= self.size and self.size > 1 or self.ku >= self.size and self.size > 1:
            raise ValueError("bandwidth must be smaller than the system size")
        if self.band.shape != (self.kl + self.ku + 1, self.size):
            raise ValueError("band storage inconsistent with size/bandwidths")

    @classmethod
    def from_dense(cls, A, rhs=None, kl=None, ku=None):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        rows, cols = np.nonzero(A)
        if kl is None:
            kl = int(max(0, np.max(rows - cols, initial=0)))
        if ku is None:
            ku = int(max(0, np.max(cols - rows, initial=0)))
        band = np.zeros((kl + ku + 1, n))
        for d in range(-kl, ku + 1):
            diag = np.diagonal(A, offset=d)
            if d >= 0:
                band[ku - d, d:] = diag
            else:
                band[ku - d, :n + d] = diag
        return cls(n, kl, ku, band, rhs)

    @classmethod
    def from_sparse(cls, A, rhs=None):
        """Build from any ``scipy.sparse`` matrix (bandwidths detected)."""
        A = A.tocoo()
        n = A.shape[0]
        d = A.col - A.row
        kl = int(max(0, -d.min(initial=0)))
        ku = int(max(0, d.max(initial=0)))
        band = np.zeros((kl + ku + 1, n))
        np.add.at(band, (ku + A.row - A.col, A.col), A.data)
        return cls(n, kl, ku, band, rhs)

    def to_dense(self):
        n = self.size
        A = np.zeros((n, n))
        for d in range(-self.kl, self.ku + 1):
            if d >= 0:
                idx = np.arange(n - d)
                A[idx, idx + d] = self.band[self.ku - d, d:]
            else:
                idx = np.arange(n + d)
                A[idx - d, idx] = self.band[self.ku - d, :n + d]
        return A

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        n = self.size
        y = np.zeros_like(x)
        for d in range(-self.kl, self.ku + 1):
            row = self.band[self.ku - d]
            if d >= 0:
                y[:n - d] += (row[d:] * x[d:].T).T
            else:
                y[-d:] += (row[:n + d] * x[:n + d].T).T
        return y


class BandedLU:
    """Partial-pivoting LU of a :class:`BandedSystem`, reusable across solves."""

    def __init__(self, system, backend=None):
        self.kernel = kernels(backend)
        n, kl, ku = system.size, system.kl, system.ku
        self.n, self.kl, self.ku = n, kl, ku
        ab = np.zeros((2 * kl + ku + 1, n))
        ab[kl:] = system.band
        # largest row norm, for the relative pivot threshold
        A2 = system.band ** 2
        rownorm2 = np.zeros(n)
        for d in range(-kl, ku + 1):
            if d >= 0:
                rownorm2[:n - d] += A2[ku - d, d:]
            else:
                rownorm2[-d:] += A2[ku - d, :n + d]
        scale = float(np.sqrt(rownorm2.max())) if n else 0.0
        ipiv, bad = self.kernel.band_lu_factor(ab, kl, ku, PIVOT_RTOL * scale)
        if bad >= 0 or scale == 0.0:
            raise SingularMatrix(f"banded pivot below threshold at column {bad}",
                                 witness={"column": int(bad)})
        self.ab = ab
        self.ipiv = np.asarray(ipiv, dtype=np.int64)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        flat = b.ndim == 1
        B = np.ascontiguousarray(b.reshape(self.n, -1))
        x = self.kernel.band_lu_solve(self.ab, self.kl, self.ku, self.ipiv, B)
        x = np.asarray(x)
        return x[:, 0] if flat else x


def solve_banded(S, backend=None):
    """Solve the banded system ``S`` with ``O(size * bandwidth**2)`` work."""
    if S.rhs is None:
        raise ValueError("BandedSystem has no right-hand side")
    return BandedLU(S, backend=backend).solve(S.rhs)

# }}}


# {{{ finite differences

def fd_derivative(values, h, k=1):
    """Second-order finite-difference ``k``-th derivative along axis 0.

    Centered stencils in the interior, one-sided second-order stencils at the
    ends.  Exact on polynomials of degree <= 2.
    """
    f = np.asarray(values, dtype=float)
    if k not in (1, 2, 3):
        raise ValueError("derivative order must be 1, 2 or 3")
    N = f.shape[0]
    if N < 2 * k + 1:
        raise GridTooSmall(f"need at least {2 * k + 1} points for k={k}, got {N}")
    d = np.empty_like(f)
    if k == 1:
        d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    elif k == 2:
        d[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
        d[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
        d[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    else:
        h3 = h**3
        d[2:-2] = (f[4:] - 2 * f[3:-1] + 2 * f[1:-3] - f[:-4]) / (2 * h3)
        fw = np.array([-5.0, 18.0, -24.0, 14.0, -3.0]) / (2 * h3)
        for i in (0, 1):
            d[i] = np.tensordot(fw, f[i:i + 5], axes=(0, 0))
        for i in (N - 1, N - 2):
            d[i] = -np.tensordot(fw, f[i - 4:i + 1][::-1], axes=(0, 0))
    return d

# }}}


# {{{ ODE integration

@dataclass
class Trajectory:
    x: np.ndarray
    y: np.ndarray

    @property
    def h(self):
        return float(self.x[1] - self.x[0])


def rk4_integrate(field, y0, span, h):
    """Classical RK4 for ``y' = field(x, y)`` over ``span = (x0, x1)``.

    ``x1 < x0`` integrates backward; the returned trajectory is always ordered
    by increasing ``x`` with uniform step.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    x0, x1 = float(span[0]), float(span[1])
    nsteps = int(round(abs(x1 - x0) / h))
    if nsteps == 0:
        y = np.atleast_1d(np.asarray(y0, dtype=float))
        return Trajectory(np.array([x0]), y[None, :])
    step = (x1 - x0) / nsteps
    y = np.atleast_1d(np.array(y0, dtype=float))
    xs = x0 + step * np.arange(nsteps + 1)
    ys = np.empty((nsteps + 1, y.size))
    ys[0] = y
    for i in range(nsteps):
        x = xs[i]
        k1 = field(x, y)
        k2 = field(x + 0.5 * step, y + 0.5 * step * k1)
        k3 = field(x + 0.5 * step, y + 0.5 * step * k2)
        k4 = field(x + step, y + step * k3)
        y = y + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at x={xs[i + 1]:.6g}",
                                 witness={"x": float(xs[i + 1])})
        ys[i + 1] = y
    if step < 0:
        xs, ys = xs[::-1].copy(), ys[::-1].copy()
    return Trajectory(xs, ys)

# }}}
