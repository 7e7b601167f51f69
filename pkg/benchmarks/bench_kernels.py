"""Time the compiled kernels against their numpy twins on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from idc.kernels import get_backend


def _spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


def cases(rng):
    A = _spd(rng, 64)
    L = np.linalg.cholesky(A)
    x = rng.uniform(-1, 1, 3200)
    y = (rng.uniform(size=3200) > 0.5).astype(np.float64)
    X = rng.normal(size=(3200, 13))
    Z = rng.uniform(size=(3200, 13))
    return {
        "cholesky 64x64": lambda k: k.cholesky(A),
        "lower_inverse 64x64": lambda k: k.lower_inverse(L),
        "nudft N=3200 nk=1000": lambda k: k.nudft(x, y, 0.02, 1001),
        "knn N=3200 D=13 r=2": lambda k: k.knn(X, 2),
        "neighbor_ratios N=3200": lambda k, nb=np.tile(np.arange(1, 3), (3200, 1)):
            k.neighbor_ratios(X, Z, nb),
    }


def best_of(fn, kernel, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(kernel)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="also write results here")
    args = p.parse_args(argv)

    backends = {"python": get_backend("python")}
    try:
        backends["compiled"] = get_backend("compiled")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")

    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        row = {"kernel": name}
        for label, k in backends.items():
            row[label] = best_of(fn, k, args.repeat)
        if "compiled" in row:
            row["speedup"] = row["python"] / row["compiled"]
        rows.append(row)

    print(f"{'kernel':28s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for row in rows:
        comp = row.get("compiled")
        comp_ms = "" if comp is None else f"{1e3 * comp:12.3f}"
        speed = "" if comp is None else f"{row['speedup']:7.1f}x"
        print(f"{row['kernel']:28s} {1e3 * row['python']:10.3f} {comp_ms:>12s} {speed:>8s}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
