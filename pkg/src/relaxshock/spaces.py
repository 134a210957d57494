"""Grid functions and the epsilon-scaled exponentially weighted norms.

The norm of order ``s`` is

    ||f||_{s, eps, delta} = eps**0.5 * sum_{k <= s} eps**-k * ||exp(delta*eps*<x>) d^k f||_2

with ``<x> = sqrt(1 + x**2)``; it is the ordinary H^s norm in the stretched
variable ``eps * x``.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import GridTooSmall, TailBelowFloor, WeightOverflow
from .numerics import fd_derivative

WEIGHT_EXP_MAX = 700.0


def make_grid(half_length, h):
    """Uniform grid on ``[-X, X]`` containing 0 (``X`` rounded to a multiple of h)."""
    m = int(round(half_length / h))
    return h * np.arange(-m, m + 1, dtype=float)


@dataclass
class GridFunction:
    """Vector-valued samples on a uniform grid symmetric about 0.

    ``values`` has shape ``(N, m)``; a 1-D array is promoted to ``(N, 1)``.
    """

    x: np.ndarray
    values: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.x.size:
            raise ValueError("values and abscissae have different lengths")
        self.values = v
        if self.x.size >= 2:
            dx = np.diff(self.x)
            if np.any(np.abs(dx - dx[0]) > 1e-12 * max(abs(dx[0]), 1.0) * 10):
                raise ValueError("grid step is not uniform")
            if dx[0] <= 0:
                raise ValueError("abscissae must increase")

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @property
    def n_points(self):
        return self.x.size

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def zero_index(self):
        i = int(np.argmin(np.abs(self.x)))
        if abs(self.x[i]) > 1e-9 * self.h:
            raise ValueError("0 is not a grid point")
        return i

    def derivative(self, k=1):
        return GridFunction(self.x, fd_derivative(self.values, self.h, k), self.epsilon)

    def with_values(self, values):
        return GridFunction(self.x, values, self.epsilon)

    def __sub__(self, other):
        o = other.values if isinstance(other, GridFunction) else other
        return self.with_values(self.values - o)

    def __add__(self, other):
        o = other.values if isinstance(other, GridFunction) else other
        return self.with_values(self.values + o)

    def sup(self):
        return float(np.max(np.linalg.norm(self.values, axis=1))) if self.values.size else 0.0


@dataclass(frozen=True)
class NormSpec:
    s: int
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("Sobolev index must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


def japanese_bracket(x):
    return np.sqrt(1.0 + np.asarray(x) ** 2)


def _weight(x, epsilon, delta):
    expo = delta * epsilon * japanese_bracket(x)
    if expo.size and expo.max() > WEIGHT_EXP_MAX:
        raise WeightOverflow(f"weight exponent {expo.max():.1f} exceeds {WEIGHT_EXP_MAX}")
    return np.exp(expo)


def apply_weight(f, epsilon, delta):
    """Pointwise multiplication by ``exp(delta * eps * <x>)``."""
    if delta == 0:
        return f.with_values(f.values.copy())
    return f.with_values(f.values * _weight(f.x, epsilon, delta)[:, None])


def l2(x, values):
    """Trapezoid L2 norm of a (possibly vector-valued) sampled function."""
    v = np.asarray(values)
    sq = np.sum(v.reshape(v.shape[0], -1) ** 2, axis=1)
    return float(np.sqrt(trapezoid(sq, x)))


def weighted_norm(f, spec):
    """The ``H^s_{eps, delta}`` norm of ``f``; ``delta = 0`` gives ``H^s_eps``."""
    if spec.s > 0 and f.n_points < 2 * spec.s + 1:
        raise GridTooSmall(f"grid too small for s={spec.s}")
    w = _weight(f.x, spec.epsilon, spec.delta)[:, None]
    total = l2(f.x, w * f.values)
    for k in range(1, spec.s + 1):
        dk = fd_derivative(f.values, f.h, k)
        total += spec.epsilon ** (-k) * l2(f.x, w * dk)
    return float(np.sqrt(spec.epsilon) * total)


def weighted_l2(f, epsilon, delta=0.0):
    return weighted_norm(f, NormSpec(0, epsilon, delta))


@dataclass
class DecayFit:
    rate_minus: float
    rate_plus: float
    intercept_minus: float
    intercept_plus: float
    degenerate: bool = False


def decay_rate_fit(f, window=0.25, floor=1e-14):
    """Least-squares exponential decay rates of ``|f|`` on the two tails.

    Each tail is restricted to the points where ``|f| > floor``; the fit uses
    the outer ``window`` fraction of what remains.  Positive rates mean decay
    away from the origin.  A flat tail returns a rate near 0 with
    ``degenerate=True`` and a warning.
    """
    mag = np.linalg.norm(f.values, axis=1)
    x = f.x
    out = []
    for side in (-1, 1):
        mask = side * x > 0
        xs, ms = x[mask], mag[mask]
        keep = ms > floor
        if keep.sum() < 3:
            raise TailBelowFloor(f"tail {'minus' if side < 0 else 'plus'} below floor {floor}")
        xs, ms = xs[keep], ms[keep]
        dist = np.abs(xs)
        dmax, dmin = dist.max(), dist.min()
        cut = dmax - window * (dmax - dmin)
        sel = dist >= cut
        if sel.sum() < 3:
            sel = np.argsort(dist)[-3:]
        slope, intercept = np.polyfit(dist[sel], np.log(ms[sel]), 1)
        out.append((-slope, intercept))
    degenerate = all(abs(r) < 1e-8 for r, _ in out)
    if degenerate:
        warnings.warn("decay_rate_fit: tails are flat; rates are ~0", RuntimeWarning)
    return DecayFit(out[0][0], out[1][0], out[0][1], out[1][1], degenerate)


def sobolev_embedding_check(f, epsilon):
    """``sup|f| / ||f||_{H^1_eps}``; returns 0 for the zero function."""
    den = weighted_norm(f, NormSpec(1, epsilon, 0.0))
    num = f.sup()
    if den == 0.0:
        return 0.0
    return num / den
