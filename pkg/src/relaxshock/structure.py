"""Numerical checks of the structural hypotheses on a relaxation model.

Every check returns a :class:`CheckEntry` carrying a pass/fail status, a
quantitative margin and, on failure, a witness (offending point or vector).
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    CountMismatch,
    EigenvalueInStrip,
    EigenvalueNotSimple,
    NoPositiveMargin,
    NotGenuinelyNonlinear,
    RankDropInconsistent,
    RelaxShockError,
    SymmetrizerMissing,
    _jsonable,
)
from .model import EPS_MAX, sample_neighborhood
from .numerics import eigen_small

RANK_RTOL = 1e-8
SYM_TOL = 1e-10
GNL_STEP = 1e-5


@dataclass
class CheckEntry:
    check_name: str
    status: str
    margin: Optional[float] = None
    witness: Optional[dict] = None

    @property
    def passed(self):
        return self.status == "pass"

    def to_json(self):
        d = {k: _jsonable(v) for k, v in asdict(self).items() if v is not None}
        return d


@dataclass
class StructureReport:
    entries: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def add(self, entry):
        self.entries.append(entry)
        return entry

    def __getitem__(self, name):
        for e in self.entries:
            if e.check_name == name:
                return e
        raise KeyError(name)

    def to_json(self):
        return {"checks": [e.to_json() for e in self.entries],
                "samples": [_jsonable(s) for s in self.samples],
                "passed": self.passed}


@dataclass
class KawashimaPair:
    K: np.ndarray
    theta: float


def _rank(M, rtol=RANK_RTOL):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _sym(M):
    return 0.5 * (M + M.T)


# {{{ symmetrizer and coupling

def check_symmetrizer(model, u):
    if model.S is None:
        raise SymmetrizerMissing(f"model {model.name!r} has no symmetrizer")
    U = model.U_star(u)
    S = np.asarray(model.S(U), dtype=float)
    A, dQ = model.A, model.dQ(U)
    w, V = np.linalg.eigh(_sym(S))
    sym_defect = float(np.max(np.abs(S - S.T)))
    if w[0] <= 0 or sym_defect > SYM_TOL:
        return CheckEntry("symmetrizer", "fail", float(w[0]),
                          {"u": u, "eigenvector": V[:, 0], "eigenvalue": float(w[0])})
    SA = S @ A
    sa_defect = float(np.max(np.abs(SA - SA.T)))
    SdQ = S @ dQ
    sdq_defect = float(np.max(np.abs(SdQ - SdQ.T)))
    scale = max(np.linalg.norm(SdQ, 2), 1e-300)
    ws = np.linalg.eigvalsh(_sym(SdQ))
    kern = model.n + model.r - _rank(SdQ)
    ok = (sa_defect <= SYM_TOL * max(1.0, np.linalg.norm(SA))
          and sdq_defect <= SYM_TOL * max(1.0, scale)
          and ws[-1] <= RANK_RTOL * scale
          and kern == model.n)
    wit = None if ok else {"u": u, "SA_defect": sa_defect, "SdQ_defect": sdq_defect,
                           "SdQ_max_eig": float(ws[-1]), "kernel_dim": kern}
    return CheckEntry("symmetrizer", "pass" if ok else "fail", float(w[0]), wit)


def kawashima_margin(K, A, SdQ):
    return float(np.linalg.eigvalsh(_sym(K @ A - SdQ))[0])


def find_kawashima_K(model, u, iterations=200, bound=10.0, S=None):
    """Skew ``K`` maximizing ``lambda_min(Sym(K A - S dQ))`` by projected
    subgradient ascent (step ``1/(1+k)``, box ``|K_ij| <= bound``)."""
    U = model.U_star(u)
    if S is None:
        if model.S is None:
            raise SymmetrizerMissing(f"model {model.name!r} has no symmetrizer")
        S = model.S(U)
    A = model.A
    SdQ = np.asarray(S) @ model.dQ(U)
    m = A.shape[0]
    iu = np.triu_indices(m, 1)
    c = np.zeros(len(iu[0]))

    def K_of(c):
        K = np.zeros((m, m))
        K[iu] = c
        return K - K.T

    best_c, best = c.copy(), kawashima_margin(K_of(c), A, SdQ)
    for k in range(iterations):
        G = _sym(K_of(c) @ A - SdQ)
        w, V = np.linalg.eigh(G)
        x = V[:, 0]
        # d lambda_min / d c_ij = x^T (E_ij A) x with E_ij = e_i e_j^T - e_j e_i^T
        Ax = A @ x
        g = x[iu[0]] * Ax[iu[1]] - x[iu[1]] * Ax[iu[0]]
        c = np.clip(c + g / (1.0 + k), -bound, bound)
        val = kawashima_margin(K_of(c), A, SdQ)
        if val > best:
            best, best_c = val, c.copy()
    K = K_of(best_c)
    theta = kawashima_margin(K, A, SdQ)
    if theta <= 0:
        raise NoPositiveMargin(f"Kawashima margin {theta:.3e} <= 0",
                               witness={"u": u, "theta": theta})
    return KawashimaPair(K, theta)


def genuine_coupling_check(model, u):
    """No eigenvector of ``A`` in ``ker dQ(U*)``.  Returns ``(ok, witness)``."""
    dQ = model.dQ(model.U_star(u))
    nq = max(np.linalg.norm(dQ, 2), 1e-300)
    _, V = eigen_small(model.A, vectors=True)
    worst, wit = np.inf, None
    for w in V.T:
        val = np.linalg.norm(dQ @ w) / (nq * np.linalg.norm(w))
        if val < worst:
            worst, wit = val, w
    ok = worst >= 1e-8
    return ok, (None if ok else {"u": u, "eigenvector": wit}), float(worst)


def block_coupling_check(model, u):
    """Equivalent coupling test in equilibrium coordinates:
    ``A11* w = lam w`` and ``(A21 + A22 dv* - dv* A11*) w = 0`` force ``w = 0``."""
    dv = model.d_v_star(u)
    A11s = model.A11 + model.A12 @ dv
    A21t = model.A21 + model.A22 @ dv - dv @ A11s
    _, V = eigen_small(A11s, vectors=True)
    worst = np.inf
    for w in V.T:
        worst = min(worst, np.linalg.norm(A21t @ w) / max(np.linalg.norm(A21t, 2), 1e-300))
    return worst >= 1e-8, float(worst)


def reduced_symmetrizer_check(model, reduced, u):
    """``s = S~11`` symmetrizes ``df*`` and ``s b*`` is symmetric PSD."""
    if model.S is None:
        raise SymmetrizerMissing(f"model {model.name!r} has no symmetrizer")
    U = model.U_star(u)
    n, r = model.n, model.r
    P = np.eye(n + r)
    P[n:, :n] = model.d_v_star(u)
    St = P.T @ model.S(U) @ P
    s = St[:n, :n]
    sdf = s @ reduced.df_star(u)
    sb = s @ reduced.b_star(u)
    d1 = float(np.max(np.abs(sdf - sdf.T)))
    d2 = float(np.max(np.abs(sb - sb.T)))
    wmin = float(np.linalg.eigvalsh(_sym(sb))[0])
    scale = max(np.linalg.norm(sb, 2), 1.0)
    ok = d1 <= 1e-8 and d2 <= 1e-8 * scale and wmin >= -1e-8 * scale
    return CheckEntry("reduced_symmetrizer", "pass" if ok else "fail", wmin,
                      None if ok else {"u": u, "sdf_defect": d1, "sb_defect": d2})

# }}}


# {{{ reduced-system hypotheses

def _proj(B):
    return B.T @ B if B.size else None


def check_assumption_2_4(reduced, u_samples):
    """Constant left kernel of ``b*`` and ``ker(pi* df*) ∩ ker b* = {0}``."""
    if len(u_samples) < 2:
        raise ValueError("need at least two sample points")
    kernels = [reduced.left_kernel(u) for u in u_samples]
    dims = [k.shape[0] for k in kernels]
    if len(set(dims)) != 1:
        raise RankDropInconsistent(f"left kernel dimension varies: {dims}",
                                   witness={"dims": dims, "samples": u_samples})
    dist = 0.0
    if dims[0]:
        P0 = _proj(kernels[0])
        for k in kernels[1:]:
            dist = max(dist, float(np.linalg.norm(_proj(k) - P0, 2)))
    angle = np.inf
    for u in u_samples:
        N1 = scipy.linalg.null_space(reduced.pi_star(u) @ reduced.df_star(u), rcond=RANK_RTOL)
        N2 = reduced.right_kernel(u)
        if N1.shape[1] and N2.shape[1]:
            sv = np.linalg.svd(N1.T @ N2, compute_uv=False)
            # principal angles: cos = sv; min angle from the largest cosine
            angle = min(angle, float(np.arccos(np.clip(sv.max(), -1.0, 1.0))))
    ok = dist <= 1e-6 and angle > 1e-6
    margin = angle if np.isfinite(angle) else np.pi / 2
    return CheckEntry("left_kernel_rank", "pass" if ok else "fail", margin,
                      None if ok else {"kernel_distance": dist, "min_angle": angle})


def _small_eig(M):
    w, V = eigen_small(M, vectors=True)
    k = int(np.argmin(np.abs(w)))
    return w, V, k


def check_gnl(reduced, u0):
    """Near-zero eigenvalue ``alpha`` of ``df*(u0)``, oriented eigenvector ``r``
    with ``grad(alpha) . r < 0``, and that directional derivative."""
    u0 = np.asarray(u0, dtype=float)
    w, V, k = _small_eig(reduced.df_star(u0))
    alpha = w[k]
    others = np.delete(w, k)
    gap = float(np.min(np.abs(others - alpha))) if others.size else np.inf
    if abs(alpha.imag) > 1e-12 or gap < 1e-6:
        raise EigenvalueNotSimple(f"eigenvalue {alpha} is not simple/real",
                                  witness={"eigenvalues": w, "gap": gap})
    r = np.real(V[:, k])
    r /= np.linalg.norm(r)
    n = u0.size
    grad = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = GNL_STEP
        vals = []
        for sgn in (1, -1):
            ws = eigen_small(reduced.df_star(u0 + sgn * e))
            vals.append(ws[int(np.argmin(np.abs(ws - alpha)))].real)
        grad[j] = (vals[0] - vals[1]) / (2 * GNL_STEP)
    gnl = float(grad @ r)
    if abs(gnl) < 1e-8:
        raise NotGenuinelyNonlinear(f"grad(alpha).r = {gnl:.3e}", witness={"u0": u0})
    if gnl > 0:
        r, gnl = -r, -gnl
    return float(alpha.real), r, gnl

# }}}


# {{{ strip / counting

def strip_matrix(model, u, eta):
    n, r = model.n, model.r
    U = model.U_star(u)
    Q21 = model.dq_du(U[:n], U[n:])
    Q22 = model.dq_dv(U[:n], U[n:])
    A11, A12, A21, A22 = model.A11, model.A12, model.A21, model.A22
    M = np.zeros((n + 2 * r, n + 2 * r))
    M[:n, :n] = A11
    M[:n, n:n + r] = A12
    M[n:n + r, n + r:] = eta * np.eye(r)
    M[n + r:, :n] = A21 @ A11 / eta - Q21
    M[n + r:, n:n + r] = A21 @ A12 / eta - Q22
    M[n + r:, n + r:] = A22
    return M / eta


def hyperbolicity_strip_check(model, reduced, ends, eta, strip_halfwidth):
    """No eigenvalue of the end-state matrices in ``|Re z| <= strip_halfwidth``
    plus the stable/unstable dimension count."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    n, r = model.n, model.r
    out = {}
    margin = np.inf
    for tag, u in (("minus", ends.u_minus), ("plus", ends.u_plus)):
        w = np.linalg.eigvals(strip_matrix(model, u, eta))
        re = np.abs(w.real)
        j = int(np.argmin(re))
        margin = min(margin, float(re[j]))
        if re[j] <= strip_halfwidth:
            raise EigenvalueInStrip(f"eigenvalue {w[j]} at u_{tag} in strip",
                                    witness={"eigenvalue": w[j], "side": tag, "u": u})
        wf = np.linalg.eigvals(reduced.df_star(u)).real
        out[tag] = {
            "stable": int(np.sum(w.real < 0)), "unstable": int(np.sum(w.real > 0)),
            "stable_f": int(np.sum(wf < 0)), "unstable_f": int(np.sum(wf > 0)),
        }
    for tag in out:
        o = out[tag]
        if o["stable"] != r + o["stable_f"] or o["unstable"] != r + o["unstable_f"]:
            raise CountMismatch(f"stable/unstable count at u_{tag} inconsistent", witness=out)
    total = out["plus"]["stable"] + out["minus"]["unstable"]
    if total != n + 2 * r + 1:
        raise CountMismatch(f"count {total} != {n + 2 * r + 1}", witness=out)
    return CheckEntry("strip", "pass", margin, {"count": total, **out})

# }}}


def structure_report(model, reduced, epsilon=None, eta=1e-3, samples=20, radius=None):
    """Run every check over sampled points of the working neighbourhood."""
    from .model import equilibrium_residual, equilibrium_spectrum_margin, hugoniot_endstates

    if radius is None:
        radius = 2 * EPS_MAX * 0.5 if model.name == "broadwell" else 2 * EPS_MAX
    pts = sample_neighborhood(model, radius, samples)
    rep = StructureReport(samples=pts)

    def guard(name, fn):
        try:
            return rep.add(fn())
        except RelaxShockError as exc:
            return rep.add(CheckEntry(name, "fail", None, {"error": exc.code, "message": str(exc),
                                                           **(exc.witness or {})}))

    res = max(equilibrium_residual(model, u) for u in pts)
    rep.add(CheckEntry("equilibrium", "pass" if res <= 1e-10 else "fail", res))
    th = min(equilibrium_spectrum_margin(model, u) for u in pts)
    rep.add(CheckEntry("relaxation_margin", "pass" if th >= 0.1 else "fail", th))

    def sym():
        worst = None
        for u in pts:
            e = check_symmetrizer(model, u)
            if worst is None or not e.passed or e.margin < worst.margin:
                worst = e
            if not e.passed:
                break
        return worst
    guard("symmetrizer", sym)

    def gc():
        worst = np.inf
        for u in pts:
            ok, wit, val = genuine_coupling_check(model, u)
            worst = min(worst, val)
            if not ok:
                return CheckEntry("genuine_coupling", "fail", val, wit)
        return CheckEntry("genuine_coupling", "pass", worst)
    guard("genuine_coupling", gc)

    def kaw():
        kp = min((find_kawashima_K(model, u) for u in pts), key=lambda p: p.theta)
        base = find_kawashima_K(model, model.u0).theta
        return CheckEntry("kawashima", "pass", kp.theta, {"theta_base": base})
    guard("kawashima", kaw)
    guard("left_kernel_rank", lambda: check_assumption_2_4(reduced, pts))

    def rsym():
        es = [reduced_symmetrizer_check(model, reduced, u) for u in pts]
        bad = [e for e in es if not e.passed]
        return bad[0] if bad else min(es, key=lambda e: e.margin)
    guard("reduced_symmetrizer", rsym)

    def gnl():
        alpha, r, g = check_gnl(reduced, model.u0)
        return CheckEntry("genuine_nonlinearity", "pass", abs(g),
                          {"alpha": alpha, "r": r, "gnl": g})
    guard("genuine_nonlinearity", gnl)

    if epsilon is not None and epsilon > 0:
        def strip():
            ends = hugoniot_endstates(reduced, model, epsilon)
            return hyperbolicity_strip_check(model, reduced, ends, eta, 0.0)
        guard("strip", strip)
    return rep
