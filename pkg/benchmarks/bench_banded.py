"""Banded LU: compiled kernel vs pure-Python fallback vs scipy.

    python3 benchmarks/bench_banded.py --sizes 2000 8000 --repeat 3

The matrices are the assembled linearized operators of the Jin-Xin profile
at a few amplitudes, plus a random diagonally dominant banded matrix of the
same shape.
"""

import argparse
import time

import numpy as np
import scipy.linalg

from relaxshock import build_reduced, hugoniot_endstates, jin_xin_model, ns_profile
from relaxshock.linearized import assemble
from relaxshock.numerics import BandedLU, BandedSystem, kernels


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def random_system(n, kl, ku, seed=0):
    rng = np.random.default_rng(seed)
    band = rng.standard_normal((kl + ku + 1, n))
    band[ku] += 2.0 * (kl + ku + 1)
    return BandedSystem(n, kl, ku, band, rng.standard_normal(n))


def profile_system(eps):
    model = jin_xin_model()
    red = build_reduced(model)
    prof = ns_profile(red, model, hugoniot_endstates(red, model, eps))
    op = assemble(model, prof, eta=1e-3)
    rhs = np.random.default_rng(1).standard_normal(op.banded.size)
    return BandedSystem(op.banded.size, op.banded.kl, op.banded.ku, op.banded.band, rhs)


def bench(label, S, repeat):
    backends = ["python"]
    try:
        kernels("compiled")
        backends.insert(0, "compiled")
    except ImportError:
        print("  (compiled kernel unavailable)")
    times = {}
    ref = None
    for b in backends:
        t, x = _best(lambda: BandedLU(S, backend=b).solve(S.rhs), repeat)
        times[b] = t
        ref = x if ref is None else ref
        assert np.allclose(x, ref, rtol=1e-9, atol=1e-12)
    t, x = _best(lambda: scipy.linalg.solve_banded((S.kl, S.ku), S.band, S.rhs), repeat)
    times["scipy"] = t
    assert np.allclose(x, ref, rtol=1e-8, atol=1e-10)
    parts = "  ".join(f"{k}={v * 1e3:8.2f} ms" for k, v in times.items())
    speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
    print(f"{label:<28} n={S.size:<6} kl={S.kl} ku={S.ku}  {parts}  python/compiled={speed:5.1f}x")
    return times


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="*", default=[2000, 8000, 32000])
    p.add_argument("--epsilons", type=float, nargs="*", default=[0.2, 0.1, 0.05])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    for eps in args.epsilons:
        bench(f"linearized, eps={eps}", profile_system(eps), args.repeat)
    for n in args.sizes:
        bench("random kl=5 ku=6", random_system(n, 5, 6), args.repeat)


if __name__ == "__main__":
    main()
