"""Timing comparison of the hot kernels across available backends.

Workloads are sized like a full-scale inversion run: a batch of
tridiagonal solves (the forward stage), one k-nearest-neighbour search
over the joint sample, and the per-neighbourhood weighted moments (the
mixture build). Results from every backend are cross-checked before the
table is printed.

Both backends share the vectorized knn_search (BLAS dot blocks plus
introselect beat scalar C on this kernel), so the table reports it once;
the compiled module's scalar knn_search_ref is timed alongside for the
record.

Run from the repository root:

    python benchmarks/bench_kernels.py [--n 5000] [--k 500] [--dim 23]
"""

import argparse
import time

import numpy as np

from anchorinv.backends import available_backends, get_backend


def time_call(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def make_workloads(args):
    rng = np.random.default_rng(args.seed)
    m = args.grid - 2
    dl = rng.uniform(0.2, 1.0, (args.systems, m - 1))
    du = rng.uniform(0.2, 1.0, (args.systems, m - 1))
    d = -(2.2 + rng.uniform(0.0, 1.0, (args.systems, m)))  # dominant diagonal
    b = rng.uniform(-5.0, 5.0, (args.systems, m))
    points = rng.standard_normal((args.n, args.dim))
    weights = rng.uniform(0.5, 1.5, args.n)
    weights /= weights.sum()
    return (dl, d, du, b), points, weights


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=5000, help="sample rows")
    parser.add_argument("--dim", type=int, default=23, help="joint dimension")
    parser.add_argument("--k", type=int, default=500, help="neighbours")
    parser.add_argument("--grid", type=int, default=80, help="grid nodes")
    parser.add_argument("--systems", type=int, default=5000,
                        help="tridiagonal systems in the batch")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    names = available_backends()
    backends = [(name, get_backend(name)) for name in names]
    tri_args, points, weights = make_workloads(args)

    # knn_search is one shared function; time it once
    knn = backends[0][1].knn_search
    t_knn, idx = time_call(lambda: knn(points, args.k), args.repeats)

    rows = []
    results = {}
    for name, mod in backends:
        t_tri, x = time_call(lambda: mod.tridiag_solve_batch(*tri_args), args.repeats)
        t_mom, mom = time_call(
            lambda: mod.neighborhood_moments(points, idx, weights), args.repeats
        )
        results[name] = (x, mom)
        rows.append((name, t_tri, t_mom))

    ref_name, ref = names[0], results[names[0]]
    for name in names[1:]:
        x, mom = results[name]
        np.testing.assert_allclose(x, ref[0], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(mom[0], ref[1][0], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(mom[1], ref[1][1], rtol=1e-9, atol=1e-12)
        print(f"agreement {name} vs {ref_name}: ok")

    t_ref = None
    compiled = dict(backends).get("compiled")
    if compiled is not None:
        t_ref, idx_ref = time_call(
            lambda: compiled.knn_search_ref(points, args.k), args.repeats
        )
        np.testing.assert_array_equal(idx_ref, idx)
        print("agreement knn_search_ref vs knn_search: ok")

    print(
        f"\nworkload: {args.systems} tridiagonal systems of size "
        f"{args.grid - 2}, knn n={args.n} dim={args.dim} k={args.k}"
    )
    header = f"{'backend':<10} {'tridiag_batch':>14} {'moments':>10}"
    print(header)
    print("-" * len(header))
    for name, t_tri, t_mom in rows:
        print(f"{name:<10} {t_tri * 1e3:>12.1f}ms {t_mom * 1e3:>8.1f}ms")
    print(f"\nknn_search (shared vectorized): {t_knn * 1e3:.1f}ms")
    if t_ref is not None:
        print(
            f"knn_search_ref (scalar, ordering oracle): {t_ref * 1e3:.1f}ms"
        )
    if len(rows) == 2:
        base = {n: (a, b) for n, a, b in rows}
        py, cy = base.get("python"), base.get("compiled")
        if py and cy:
            print(
                f"\nspeedup (python/compiled): "
                f"tridiag {py[0] / cy[0]:.1f}x, moments {py[1] / cy[1]:.1f}x"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
