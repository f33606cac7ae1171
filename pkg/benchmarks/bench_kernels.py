"""Compare the numba and pure-numpy kernels on representative inputs.

Usage: python benchmarks/bench_kernels.py [--levels 64 128 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from otto_ldf import _kernels
from otto_ldf.engines import BathPair, HarmonicEngine, thermal_weights
from otto_ldf.series import inv_sqrt, pad, radicand_poly


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def run(levels, repeat):
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    # warm up the jit so compilation is not timed
    small = pad(radicand_poly(1.2), 8)
    _kernels.series_mul_numba(small, small, True)
    _kernels.lattice_joint_numba(small, small)
    _kernels.inverse_cdf_numba(np.cumsum(small, axis=1), np.zeros(4, dtype=np.int64), np.full(4, 0.5))

    baths = BathPair(3.0, 0.1)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'N':>6}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>13}")
    for n in levels:
        a = inv_sqrt(radicand_poly(1.2), n, even=True)
        cases = {
            "series_mul": (_kernels.series_mul_numba, _kernels.series_mul_numpy, (a, a, True)),
        }
        engine = HarmonicEngine(1.0, 2.0, 1.2)
        cold, hot = thermal_weights(engine, baths, n, tail=1.0)
        ca = cold[:, None] * a
        ca[16:] = 0.0
        cases["lattice_joint"] = (_kernels.lattice_joint_numba, _kernels.lattice_joint_numpy,
                                  (ca, hot[:, None] * a))
        cum = np.cumsum(a, axis=1)
        rows = rng.integers(0, n, 200_000)
        cases["inverse_cdf"] = (_kernels.inverse_cdf_numba, _kernels.inverse_cdf_numpy,
                                (cum, rows, rng.random(rows.size)))
        for name, (fast, slow, args) in cases.items():
            t_fast, r_fast = best_of(lambda: fast(*args), repeat)
            t_slow, r_slow = best_of(lambda: slow(*args), repeat)
            diff = float(np.max(np.abs(np.asarray(r_fast, float) - np.asarray(r_slow, float))))
            print(f"{name:<14}{n:>6}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>10.1f}{diff:>13.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--levels", type=int, nargs="+", default=[64, 128, 256])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    run(args.levels, args.repeat)


if __name__ == "__main__":
    main()
