"""Time the compiled kernels against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py``. Both backends are imported
directly so the comparison does not depend on ``MULTISEL_BACKEND``.
"""

import argparse
import timeit

import numpy as np

from multisel import _pykernels
from multisel.basis import place_knots

try:
    from multisel import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(n, rng):
    s = rng.standard_normal(n)
    kv = place_knots(s, 4, 4)
    q = rng.uniform(size=(n, 5))
    yield "bspline_basis (cubic, J=4)", lambda m: m.bspline_basis(kv.knots, 4, s)
    yield "elementary_symmetric_rows (m=5, L=3)", lambda m: m.elementary_symmetric_rows(q, 3)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 5000, 50000])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38}{'n':>8}{'python ms':>12}{'cython ms':>12}{'speedup':>9}")
    for n in args.n:
        for name, call in cases(n, rng):
            tp = _time(lambda: call(_pykernels), args.repeat) * 1e3
            if _ckernels is None:
                print(f"{name:<38}{n:>8}{tp:>12.3f}{'n/a':>12}{'':>9}")
                continue
            a, b = call(_pykernels), call(_ckernels)
            if not np.array_equal(a, b):
                raise SystemExit(f"{name}: backends disagree (max diff {np.abs(a - b).max():.3g})")
            tc = _time(lambda: call(_ckernels), args.repeat) * 1e3
            print(f"{name:<38}{n:>8}{tp:>12.3f}{tc:>12.3f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
