"""Compare the compiled geodesic kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--N 32] [--M 32] [--repeat 20]

Also times one full eps-continuation solve under each backend (the backend is
chosen at import, so that part runs in a subprocess).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from kahlerlab import _kernels_py

try:
    from kahlerlab import _kernels as _compiled
except ImportError:
    _compiled = None

SOLVE = """
import time, numpy as np
import kahlerlab
from kahlerlab.geodesic import SolveOptions, continuation_solve
from kahlerlab.grid import GridSpec
g = GridSpec({N})
x, _ = g.coords()
t0 = time.perf_counter()
continuation_solve(g.zeros(), 0.01 * np.cos(2 * np.pi * x), SolveOptions(M={M}))
print(kahlerlab.BACKEND, time.perf_counter() - t0)
"""


def sample_path(N, M, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, M + 1)[:, None, None]
    x = np.arange(N) / N
    base = 0.01 * np.cos(2 * np.pi * x)[None, :, None] * t
    return np.ascontiguousarray(base + 1e-3 * t * (t - 1) + 1e-5 * rng.standard_normal((M + 1, N, N)))


def bench(mod, phi, repeat):
    coef = mod.geodesic_coefficients(phi)
    psi = np.ascontiguousarray(np.random.default_rng(1).standard_normal(phi.shape))
    psi[0] = psi[-1] = 0.0
    out = {}
    for name, fn in (("coefficients", lambda: mod.geodesic_coefficients(phi)),
                     ("residual", lambda: mod.geodesic_residual(phi, 1e-3)),
                     ("matvec", lambda: mod.geodesic_matvec(psi, *coef))):
        out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--M", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    phi = sample_path(args.N, args.M)

    py = bench(_kernels_py, phi, args.repeat)
    print(f"kernels, N={args.N} M={args.M} (best of {args.repeat}, ms)")
    print(f"{'kernel':<14}{'python':>10}{'cython':>10}{'speedup':>10}")
    if _compiled is None:
        for k, v in py.items():
            print(f"{k:<14}{v * 1e3:>10.3f}{'-':>10}{'-':>10}")
        print("compiled extension not built")
    else:
        cy = bench(_compiled, phi, args.repeat)
        for k in py:
            print(f"{k:<14}{py[k] * 1e3:>10.3f}{cy[k] * 1e3:>10.3f}{py[k] / cy[k]:>10.2f}")

    print("\nfull continuation solve (zero -> 0.01 cos 2 pi x)")
    code = SOLVE.format(N=args.N, M=args.M)
    for pure in ("1", "0"):
        env = dict(os.environ, KAHLERLAB_PURE=pure)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        print(f"  {backend:<8}{float(secs):.3f} s")


if __name__ == "__main__":
    main()
