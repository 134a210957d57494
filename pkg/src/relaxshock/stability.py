"""Discrete spectrum of the linearization about the exact profile.

The generator ``L U = -A U' + dQ(U_bar) U`` of ``U_t + A U_x = Q(U)`` is
discretized with the box rule, which turns ``L U = lam U`` into the pencil
``C U = lam B U``.  Boundary rows set the incoming characteristic variables
to zero (left eigenvectors of ``A`` with positive speed at ``-X`` and
negative speed at ``+X``).  A stable profile has a simple eigenvalue near 0
(translation) and everything else in ``Re lam < 0``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, TranslationModeMissing, UnstableEigenvalue
from .numerics import EIGEN_CAP, fd_derivative

TRANSLATION_TOL = 1e-5
STABLE_MARGIN = 1e-6
CORRELATION_MIN = 0.99


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    translation: complex
    correlation: float
    max_re_other: float
    n_near_axis: int
    method: str
    certified_radius: float = np.inf
    info: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "translation": {"lambda": [float(self.translation.real), float(self.translation.imag)],
                            "correlation": self.correlation},
            "margins": {"max_re_other": self.max_re_other, "n_near_axis": self.n_near_axis,
                        "certified_radius": self.certified_radius},
            "method": self.method,
        }


@dataclass
class PencilL:
    C: sp.csr_matrix
    B: sp.csr_matrix
    x: np.ndarray
    m: int


def assemble_L(model, U_bar, x=None, dQ=None):
    """Pencil ``(C, B)`` with ``C U = lam B U`` the box discretization of ``L``.

    ``dQ`` overrides the Jacobian map (used to build counterexamples).
    """
    V = U_bar.values if hasattr(U_bar, "values") else np.asarray(U_bar, dtype=float)
    x = U_bar.x if x is None else np.asarray(x, dtype=float)
    N, m = V.shape
    h = float(x[1] - x[0])
    A = model.A
    jac = dQ if dQ is not None else model.dQ
    J = np.array([jac(row) for row in V])
    w, VL = scipy.linalg.eig(A, left=True, right=False)
    if np.any(np.abs(w.imag) > 1e-12):
        raise NoConvergence("A is not real diagonalizable")
    w = w.real
    Lm = [np.real(VL[:, k]) for k in range(m) if w[k] > 0]
    Lp = [np.real(VL[:, k]) for k in range(m) if w[k] < 0]
    if len(Lm) + len(Lp) != m:
        raise NoConvergence("A has a zero characteristic speed; inflow conditions undefined")
    rows, cols, cv, brow, bcol, bv = [], [], [], [], [], []

    def putC(r, node, blk):
        blk = np.atleast_2d(blk)
        for a in range(blk.shape[0]):
            for c in range(blk.shape[1]):
                if blk[a, c] != 0.0:
                    rows.append(r + a)
                    cols.append(node * m + c)
                    cv.append(blk[a, c])

    def putB(r, node, blk):
        for a in range(blk.shape[0]):
            for c in range(blk.shape[1]):
                if blk[a, c] != 0.0:
                    brow.append(r + a)
                    bcol.append(node * m + c)
                    bv.append(blk[a, c])

    R = 0
    for l in Lm:
        putC(R, 0, l)
        R += 1
    half = 0.5 * np.eye(m)
    for i in range(N - 1):
        putC(R, i, A / h + 0.5 * J[i])
        putC(R, i + 1, -A / h + 0.5 * J[i + 1])
        putB(R, i, half)
        putB(R, i + 1, half)
        R += m
    for l in Lp:
        putC(R, N - 1, l)
        R += 1
    C = sp.csr_matrix((cv, (rows, cols)), shape=(R, N * m))
    B = sp.csr_matrix((bv, (brow, bcol)), shape=(R, N * m))
    return PencilL(C, B, x, m)


def _dense_spectrum(P):
    w, V = scipy.linalg.eig(P.C.toarray(), P.B.toarray())
    keep = np.isfinite(w)
    return w[keep], V[:, keep], np.inf


def _arnoldi_spectrum(P, sigma=1e-3, k=40):
    K = (P.C - sigma * P.B).tocsc()
    lu = spla.splu(K)
    B = P.B.tocsr()
    n = K.shape[0]
    op = spla.LinearOperator((n, n), matvec=lambda v: lu.solve(B @ v), dtype=float)
    nu, V = spla.eigs(op, k=min(k, n - 2), which="LM", tol=1e-12, maxiter=20 * n)
    keep = np.abs(nu) > 1e-14
    lam = sigma + 1.0 / nu[keep]
    radius = float(np.max(np.abs(lam - sigma)))
    return lam, V[:, keep], radius


def spectrum_check(P, U_bar_prime, tol=TRANSLATION_TOL, margin=STABLE_MARGIN,
                   method=None, strict=True, k=40):
    """Spectrum of the pencil with the translation-mode and stability checks.

    ``method`` is ``"dense"`` (all finite eigenvalues) or ``"arnoldi"``
    (``k`` eigenvalues nearest a small positive shift; eigenvalues inside
    ``certified_radius`` of the shift are all found).
    """
    n = P.C.shape[0]
    if method is None:
        method = "dense" if n <= EIGEN_CAP else "arnoldi"
    if method == "dense":
        lam, V, radius = _dense_spectrum(P)
    else:
        lam, V, radius = _arnoldi_spectrum(P, k=k)
    order = np.lexsort((-lam.imag, -lam.real))
    lam, V = lam[order], V[:, order]
    if lam.size == 0:
        raise TranslationModeMissing("no finite eigenvalues")
    j = int(np.argmin(np.abs(lam)))
    lam0 = lam[j]
    d = np.asarray(U_bar_prime, dtype=float).reshape(-1)
    phi = V[:, j]
    corr = float(abs(np.vdot(phi, d)) / (np.linalg.norm(phi) * np.linalg.norm(d)))
    others = np.delete(lam, j)
    max_re = float(np.max(others.real)) if others.size else -np.inf
    near = int(np.sum(lam.real > -margin))
    rep = SpectrumReport(lam, complex(lam0), corr, max_re, near, method, radius)
    if strict:
        # instability is the stronger finding, so it is reported first
        if max_re > -margin:
            k2 = int(np.argmax(others.real))
            raise UnstableEigenvalue(f"eigenvalue {others[k2]:.3e} with Re >= {-margin:g}",
                                     witness={"lambda": others[k2]})
        if abs(lam0) > tol or corr < CORRELATION_MIN:
            raise TranslationModeMissing(
                f"smallest eigenvalue {lam0:.3e} (correlation {corr:.4f})",
                witness={"lambda": lam0, "correlation": corr})
    return rep


def profile_prime(U_bar):
    return fd_derivative(U_bar.values, U_bar.h, 1)


def profile_conditions(U_bar, ends, model, reduced, region=1e-3):
    """Constants in ``|U'| <= C1 eps^2``, ``|U''| <= C2 eps |U'|`` and the
    direction estimate ``|U'/|U'| -+ R0| <= C3 eps`` (both signs reported)."""
    from .structure import check_gnl

    eps = float(ends.epsilon)
    d1 = fd_derivative(U_bar.values, U_bar.h, 1)
    d2 = fd_derivative(U_bar.values, U_bar.h, 2)
    n1 = np.linalg.norm(d1, axis=1)
    n2 = np.linalg.norm(d2, axis=1)
    sup1 = float(n1.max())
    mask = n1 >= region * sup1
    _, r, _ = check_gnl(reduced, model.u0)
    R0 = np.concatenate([r, model.d_v_star(model.u0) @ r])
    R0 /= np.linalg.norm(R0)
    dirs = d1[mask] / n1[mask, None]
    c3 = {}
    for name, s in (("plus", 1.0), ("minus", -1.0)):
        c3[name] = float(np.max(np.linalg.norm(dirs - s * R0, axis=1)) / eps)
    return {
        "C1": sup1 / eps**2,
        "C2": float(np.max(n2[mask] / (eps * n1[mask]))),
        "C3": min(c3.values()),
        "C3_by_sign": c3,
    }
