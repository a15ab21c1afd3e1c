"""Timing comparison: compiled MI kernel vs the numpy fallback.

Run from the repo root:

    python3 benchmarks/bench_mi_kernel.py

The compiled backend must be importable for the comparison; if it is
missing only the fallback is timed.  Shapes cover the scenarios the
simulator actually hits: a SISO 16-QAM round and a 2x1 MIMO round with
the 256-point joint alphabet.
"""

import time

import numpy as np

from mimoarq import _mi_kernel_py
from mimoarq.constellation import from_name, joint_alphabet

try:
    from mimoarq import _mi_kernel as _compiled
except ImportError:
    _compiled = None


def make_case(name, n_t, n_r, blocks, snr, draws, seed):
    c = from_name(name)
    x = joint_alphabet(c, n_t)
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((blocks, n_r, n_t))
         + 1j * rng.standard_normal((blocks, n_r, n_t))) * np.sqrt(0.5)
    u = np.einsum("qt,brt->bqr", x, h) * np.sqrt(snr / n_t)
    w = (rng.standard_normal((blocks, draws, n_r))
         + 1j * rng.standard_normal((blocks, draws, n_r))) * np.sqrt(0.5)
    return np.ascontiguousarray(u), np.ascontiguousarray(w)


def timeit(fn, u, w, repeats):
    out = np.zeros((u.shape[0], w.shape[1]))
    fn(u, w, out)  # warm-up, also first-call dispatch
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(u, w, out)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    cases = [
        ("siso qam16 B=2 D=32", make_case("qam16", 1, 1, 2, 10.0, 32, 1)),
        ("siso qam16 B=2 D=256", make_case("qam16", 1, 1, 2, 10.0, 256, 2)),
        ("mimo 2x1 qam16 B=1 D=16", make_case("qam16", 2, 1, 1, 30.0, 16, 3)),
        ("mimo 2x2 qpsk B=2 D=32", make_case("qpsk", 2, 2, 2, 5.0, 32, 4)),
    ]
    print(f"{'case':30s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for label, (u, w) in cases:
        t_py, out_py = timeit(_mi_kernel_py.round_gap_terms, u, w, 5)
        if _compiled is None:
            print(f"{label:30s} {t_py * 1e3:10.3f} ms {'n/a':>12s}")
            continue
        t_c, out_c = timeit(_compiled.round_gap_terms, u, w, 5)
        if not np.allclose(out_py, out_c, rtol=1e-10, atol=1e-12):
            raise AssertionError(f"backend mismatch on {label}")
        print(f"{label:30s} {t_py * 1e3:10.3f} ms {t_c * 1e3:10.3f} ms "
              f"{t_py / t_c:8.1f}x")
    if _compiled is None:
        print("compiled backend not available; build it with "
              "`pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
