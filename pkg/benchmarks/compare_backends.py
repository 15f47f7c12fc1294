"""Timing comparison of the numba and numpy kernel backends.

Builds one synthetic workload per kernel family (NLL + gradient for each
model, the pairwise sampler, and the Jacobi eigensolver), runs both
backends on identical inputs, and prints a wall-time table with speedups.
JIT compilation happens during warm-up, so the numbers reflect steady
state.

    python3 benchmarks/compare_backends.py --ell 2000 --samples 20000
"""

import argparse
import time

import numpy as np

from repsel.backends import available_backends, get_kernels, warm_up
from repsel.core import PLParams, Universe
from repsel.decompose import repeated_selection
from repsel.models import SampleConfig, sample_rankings


def build_choice_arrays(n, ell, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    theta = rng.normal(scale=0.8, size=n)
    ds = sample_rankings(PLParams(theta - theta.mean()), Universe(n), SampleConfig(seed, ell))
    cds = repeated_selection(ds)
    return cds.set_items, cds.set_offsets, cds.winner_pos, cds.weights


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10, help="universe size (default: 10)")
    ap.add_argument("--ell", type=int, default=2000, help="rankings per dataset (default: 2000)")
    ap.add_argument("--samples", type=int, default=20000, help="sampler draws (default: 20000)")
    ap.add_argument("--dim", type=int, default=90, help="Jacobi matrix dimension (default: 90)")
    ap.add_argument("--rank", type=int, default=4, help="factorized CRS rank (default: 4)")
    ap.add_argument("--repeats", type=int, default=5, help="timing repeats, best-of (default: 5)")
    args = ap.parse_args()

    names = available_backends()
    if "numba" not in names:
        print("numba backend unavailable; nothing to compare (numpy only)")
    for name in names:
        warm_up(name)

    n, r = args.n, args.rank
    rng = np.random.Generator(np.random.PCG64(7))
    set_items, set_offsets, winner_pos, weights = build_choice_arrays(n, args.ell, seed=1)
    theta = rng.normal(size=n)
    u = rng.normal(scale=0.5, size=n * (n - 1))
    T = rng.normal(size=(n, r))
    C = rng.normal(size=(n, r))
    U = rng.normal(scale=0.3, size=(n, n))
    np.fill_diagonal(U, 0.0)
    uniforms = rng.random((args.samples, n - 1))
    Q, _ = np.linalg.qr(rng.normal(size=(args.dim, args.dim)))
    lam = np.sort(rng.uniform(-2.0, 4.0, size=args.dim))
    A = (Q * lam) @ Q.T
    A = 0.5 * (A + A.T)

    cases = [
        ("pl_nll_grad", lambda k: k.pl_nll_grad(theta, set_items, set_offsets, winner_pos, weights)),
        ("crs_full_nll_grad", lambda k: k.crs_full_nll_grad(u, n, set_items, set_offsets, winner_pos, weights)),
        ("crs_factor_nll_grad", lambda k: k.crs_factor_nll_grad(T, C, set_items, set_offsets, winner_pos, weights)),
        ("sample_pairwise", lambda k: k.sample_pairwise(theta, U, uniforms)),
        ("jacobi_eigvalsh", lambda k: k.jacobi_eigvalsh(A, 1e-11, 100)),
    ]

    print(f"workload: n={n}, ell={args.ell}, samples={args.samples}, dim={args.dim}, rank={r}")
    header = f"{'kernel':<22}" + "".join(f"{name:>12}" for name in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, call in cases:
        times = [timeit(lambda k=get_kernels(nm): call(k), args.repeats) for nm in names]
        row = f"{label:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
