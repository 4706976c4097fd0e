"""Timings for the hot kernels under both backends, plus one full model fit.

Run:  python benchmarks/bench_backends.py
The env var DEAR_BACKEND only controls which backend the package itself
uses; this script imports both implementations directly and compares them
on identical inputs.
"""

import time

import numpy as np

from dear import _impl_numba, _impl_numpy
from dear.kernels import KernelConfig, VariableKind

REPEAT = 5


def _time(fn, *args):
    fn(*args)  # warmup (jit compile / cache touch)
    best = float("inf")
    for _ in range(REPEAT):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_weight_matrix(rng, q=2000, t=2000, d=2):
    per_var = tuple((VariableKind.LINEAR, 0.1) for _ in range(d))
    cfg = KernelConfig(per_var)
    xq = np.ascontiguousarray(rng.uniform(0, 1, (q, d)))
    xt = np.ascontiguousarray(rng.uniform(0, 1, (t, d)))
    args = cfg.backend_arrays()
    rows = []
    for name, impl in (("numba", _impl_numba), ("numpy", _impl_numpy)):
        rows.append((f"amk_weight_matrix {q}x{t} d={d}", name,
                     _time(impl.amk_weight_matrix, xq, xt, *args)))
    return rows


def bench_mixture(rng, n=2000, pts=4097):
    centers = rng.standard_normal(n)
    bw = rng.uniform(0.1, 0.3, n)
    w = np.full(n, 1.0 / n)
    z = np.ascontiguousarray(np.linspace(-8, 8, pts))
    rows = []
    for name, impl in (("numba", _impl_numba), ("numpy", _impl_numpy)):
        rows.append((f"gm_cdf {pts}x{n}", name, _time(impl.gm_cdf, z, centers, bw, w)))
        rows.append((f"gm_pdf {pts}x{n}", name, _time(impl.gm_pdf, z, centers, bw, w)))
    return rows


def bench_psi4(rng, n=2000):
    x = np.ascontiguousarray(rng.standard_normal(n))
    rows = []
    for name, impl in (("numba", _impl_numba), ("numpy", _impl_numpy)):
        rows.append((f"psi4_pair_sum n={n}", name, _time(impl.psi4_pair_sum, x, 0.25)))
    return rows


def bench_full_fit():
    import importlib
    import os
    import subprocess
    import sys
    rows = []
    code = (
        "import time, dear\n"
        "from dear.data import RunConfig\n"
        "from dear.synth import SynthSpec, generate\n"
        "ds, _ = generate(SynthSpec(mean='sine', sd='smooth', ar=(0.6,), n=2000, seed=0))\n"
        "dear.fit(ds.x[:400], ds.y[:400], ds.kinds, RunConfig(window=400, min_window=200))\n"
        "t0 = time.perf_counter()\n"
        "dear.fit(ds.x, ds.y, ds.kinds, RunConfig(window=2000))\n"
        "print(time.perf_counter() - t0)\n"
    )
    for name in ("numba", "numpy"):
        env = dict(os.environ, DEAR_BACKEND=name)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        rows.append(("full fit T=2000", name, float(out.stdout.strip().splitlines()[-1])))
    return rows


def main():
    rng = np.random.default_rng(0)
    rows = []
    rows += bench_weight_matrix(rng)
    rows += bench_mixture(rng)
    rows += bench_psi4(rng)
    rows += bench_full_fit()
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  backend  seconds")
    for label, backend, secs in rows:
        print(f"{label:<{width}}  {backend:<7}  {secs:.4f}")
    # quick agreement check on the weight matrix
    cfg = KernelConfig(((VariableKind.LINEAR, 0.1), (VariableKind.LINEAR, 0.1)))
    xq = np.ascontiguousarray(rng.uniform(0, 1, (50, 2)))
    xt = np.ascontiguousarray(rng.uniform(0, 1, (60, 2)))
    args = cfg.backend_arrays()
    a = _impl_numba.amk_weight_matrix(xq, xt, *args)
    b = _impl_numpy.amk_weight_matrix(xq, xt, *args)
    print(f"max |numba - numpy| on weight matrix: {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
