"""Compare the numba and numpy kernel backends.

Times the Damerau-Levenshtein kernels on fuzzy-lookup sized inputs and the
group-sum kernel on fact-table sized inputs, after checking both backends
return identical results. Run with ``python benchmarks/bench_kernels.py``.
"""

import argparse
import statistics
import time

import numpy as np

from cancerdw import _kernels
from cancerdw.etl import fold
from cancerdw.evalharness.generate import CANCER_TYPES, PROCEDURES


def timeit(fn, reps: int) -> tuple[float, float]:
    fn()  # warm-up (JIT compilation on the numba path)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), min(times)


def vocabulary_case():
    words = [fold(n) for _, n, _ in CANCER_TYPES] + [fold(n) for _, n, _ in PROCEDURES]
    alphabet = {c: i for i, c in enumerate(sorted(set("".join(words)) | set("xyz")))}
    enc = lambda s: np.array([alphabet[c] for c in s], dtype=np.int64)
    flat = np.concatenate([enc(w) for w in words])
    offsets = np.cumsum([0] + [len(w) for w in words]).astype(np.int64)
    queries = [enc(w[::-1]) for w in words] + [enc(w[:-2] + "xy") for w in words]
    return queries, flat, offsets, len(alphabet)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--facts", type=int, default=1_000_000)
    ap.add_argument("--groups", type=int, default=256)
    ap.add_argument("--reps", type=int, default=10)
    args = ap.parse_args()
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])

    queries, flat, offsets, k = vocabulary_case()
    rng = np.random.default_rng(0)
    gid = rng.integers(0, args.groups, args.facts).astype(np.int64)
    vals = rng.normal(size=(args.facts, 3))

    results = {}
    rows = []
    for name in backends:
        _kernels.set_backend(name)
        dl = _kernels.dl_distances
        gs = _kernels.group_sums
        results[name] = ([dl(q, flat, offsets, k) for q in queries], gs(gid, vals, args.groups))
        rows.append((name, "fuzzy lookup", *timeit(lambda: [dl(q, flat, offsets, k) for q in queries], args.reps)))
        rows.append((name, "group sums", *timeit(lambda: gs(gid, vals, args.groups), args.reps)))

    ref = results["numpy"]
    for name, (dists, (sums, counts)) in results.items():
        assert all(np.array_equal(a, b) for a, b in zip(dists, ref[0])), f"{name}: distances differ"
        assert np.allclose(sums, ref[1][0], rtol=1e-12) and np.array_equal(counts, ref[1][1]), f"{name}: sums differ"

    print(f"{len(queries)} lookups against {len(offsets) - 1} names; {args.facts} facts in {args.groups} groups")
    print(f"{'backend':8}  {'kernel':13}  {'median ms':>10}  {'best ms':>10}")
    for name, kernel, med, best in rows:
        print(f"{name:8}  {kernel:13}  {med * 1e3:10.3f}  {best * 1e3:10.3f}")
    if "numba" in results:
        base = {kernel: med for name, kernel, med, _ in rows if name == "numpy"}
        for name, kernel, med, _ in rows:
            if name == "numba":
                print(f"numba speedup on {kernel}: {base[kernel] / med:.1f}x")


if __name__ == "__main__":
    main()
