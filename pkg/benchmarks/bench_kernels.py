"""Compare the compiled (numba) and pure-numpy kernel backends.

Both backends live side by side in ``borderlab._kernels``; the ``backend``
keyword selects one per call, so a single process can time both.  (The
library default is chosen by the ``BORDERLAB_NUMBA`` environment flag.)

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

For every kernel the script checks that both backends agree, then reports
the best-of-``repeat`` wall time.  The first numba call (JIT compilation)
is excluded from the timings.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from borderlab import _kernels
from borderlab.solve import equations, random_start
from borderlab.tensor import from_spec


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases():
    rng = np.random.default_rng(0)
    p = 2147483647
    for n in (120, 250):
        M = rng.integers(0, p, size=(n, n), dtype=np.int64)
        yield f"rank_mod_p n={n}", lambda b, M=M: _kernels.rank_mod_p(M, p, backend=b)

    basis = from_spec("cw:2", 2).to_dense(dtype=np.int64)
    basis = np.transpose(basis, (2, 0, 1)).copy()  # the C-slices of cw(2)^2
    npts = (3 ** basis.shape[0] - 1) // 2
    yield (f"min_rank_projective 9x9x9 F3 ({npts} pts)",
           lambda b: _kernels.min_rank_projective(basis, 3, 0, npts, 0, backend=b))

    T = from_spec("skewcw:4", 2)
    P = equations(T, None, 42, symmetric=False)
    x = random_start(P, 0)
    A, B, C = P.split(x)
    eqs, target = P.eqs, P.target
    yield (f"trilinear_residual ({len(eqs)} eqs, r=42)",
           lambda b: _kernels.trilinear_residual(A, B, C, eqs, target, backend=b))
    small = eqs[:4000]
    yield (f"trilinear_jacobian ({len(small)} eqs, r=42)",
           lambda b: _kernels.trilinear_jacobian(A, B, C, small, False, backend=b))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write the timings to this file")
    args = ap.parse_args()

    if not _kernels.USE_NUMBA:
        print("numba backend disabled (BORDERLAB_NUMBA=0 or numba missing); timing numpy only")
    rows = []
    print(f"{'kernel':<48} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8}")
    for name, fn in _cases():
        ref = fn("numpy")
        t_np = _best(lambda: fn("numpy"), args.repeat)
        t_nb = None
        if _kernels.USE_NUMBA:
            got = fn("numba")  # also triggers compilation
            if isinstance(ref, np.ndarray):
                assert np.allclose(ref, got, rtol=1e-12, atol=1e-12), name
            else:
                assert ref == got, (name, ref, got)
            t_nb = _best(lambda: fn("numba"), args.repeat)
        speed = f"{t_np / t_nb:8.1f}" if t_nb else "     n/a"
        nb = f"{t_nb:11.5f}" if t_nb is not None else "        n/a"
        print(f"{name:<48} {t_np:11.5f} {nb} {speed}")
        rows.append({"kernel": name, "numpy": t_np, "numba": t_nb})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"threads_env": _kernels.os.environ.get("BORDERLAB_THREADS"), "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
