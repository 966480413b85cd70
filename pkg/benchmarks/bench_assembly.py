"""Time the numba and numpy assembly kernels on the same problems.

Run with ``python benchmarks/bench_assembly.py``. The first numba call
compiles (or loads the on-disk cache) and is excluded from the timings.
"""

import argparse
import time

import numpy as np

from thinsteklov import _accel
from thinsteklov.core import ProblemParams, Profile
from thinsteklov.plate2d import assemble_plate_forms, build_mesh_2d
from thinsteklov.sturm1d import assemble_limit_pencil, build_mesh_1d


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    profile = Profile.cosine_bump(1.0, 0.3)
    p1 = ProblemParams(n=2, sigma=0.3)
    p2 = p1.with_epsilon(0.05)
    cases = [
        ("1D N=512", lambda u: assemble_limit_pencil(p1, profile, build_mesh_1d(1.0, 512),
                                                     use_numba=u).bending),
        ("2D 32x4", lambda u: assemble_plate_forms(p2, profile, build_mesh_2d(1.0, 32, 4),
                                                   use_numba=u).A),
        ("2D 64x8", lambda u: assemble_plate_forms(p2, profile, build_mesh_2d(1.0, 64, 8),
                                                   use_numba=u).A),
    ]
    print(f"numba available: {_accel.HAVE_NUMBA}")
    print(f"{'case':<10} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'max rel diff':>13}")
    for name, run in cases:
        t_np, ref = best_of(lambda: run(False), args.repeat)
        if not _accel.HAVE_NUMBA:
            print(f"{name:<10} {t_np:10.4f} {'-':>10} {'-':>8} {'-':>13}")
            continue
        run(True)  # compile
        t_nb, out = best_of(lambda: run(True), args.repeat)
        diff = np.max(np.abs(out - ref)) / np.max(np.abs(ref))
        print(f"{name:<10} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.2f} {diff:13.2e}")


if __name__ == "__main__":
    main()
