"""Compare the compiled Fock kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 8:8:4 10:10:3]

Reports best-of-N wall time for basis enumeration, state ranking and hopping
assembly, and checks that both implementations return identical arrays.
"""
import argparse
import sys
import timeit

import numpy as np

from twoprobe import _fock_py, fock
from twoprobe.fock import bonds, composition_counts

try:
    from twoprobe import _fock as _fock_c
except ImportError:
    _fock_c = None


def parse_size(text):
    M, N, n_max = (int(x) for x in text.split(":"))
    return M, N, n_max


def bench(kernels, M, N, n_max, repeat):
    counts = composition_counts(M, N, n_max)
    offsets = fock._rank_offsets(counts, M, N, n_max)
    b = bonds(M)
    states = kernels.enumerate_states(M, N, n_max, counts)
    jobs = {
        "enumerate": lambda: kernels.enumerate_states(M, N, n_max, counts),
        "rank": lambda: kernels.rank_states(states, offsets),
        "hopping": lambda: kernels.hopping_elements(states, b, n_max, offsets),
    }
    times = {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in jobs.items()}
    outputs = (states, kernels.rank_states(states, offsets), *kernels.hopping_elements(states, b, n_max, offsets))
    return times, outputs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", nargs="+", type=parse_size,
                        default=[(8, 8, 4), (9, 9, 4), (10, 10, 3), (10, 10, 4)])
    args = parser.parse_args(argv)
    if _fock_c is None:
        print("compiled extension not built; only the fallback can be timed", file=sys.stderr)
    header = f"{'M':>3} {'N':>3} {'nmax':>4} {'dim':>8} {'kernel':>10} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for M, N, n_max in args.sizes:
        py_t, py_out = bench(_fock_py, M, N, n_max, args.repeat)
        c_t, c_out = bench(_fock_c, M, N, n_max, args.repeat) if _fock_c else ({}, None)
        if c_out is not None:
            for a, b in zip(py_out, c_out):
                if not np.array_equal(a, b):
                    raise SystemExit(f"kernel mismatch at M={M} N={N} n_max={n_max}")
        dim = len(py_out[0])
        for name in py_t:
            c = c_t.get(name)
            speed = f"{py_t[name] / c:8.1f}" if c else f"{'n/a':>8}"
            c_str = f"{c:11.4f}" if c else f"{'n/a':>11}"
            print(f"{M:3d} {N:3d} {n_max:4d} {dim:8d} {name:>10} {py_t[name]:11.4f} {c_str} {speed}")


if __name__ == "__main__":
    main()
