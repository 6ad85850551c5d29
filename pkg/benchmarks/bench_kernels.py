"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on inputs sized like the full-size decoder and training
loop (36 x 36 grids, 10 samples per limb, a few candidates per keypoint).
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from multiformer import _kernels


def workloads(rng: np.random.Generator) -> dict:
    cost = rng.random((12, 12))
    grid = rng.random((36, 36))
    paf_x, paf_y = rng.normal(size=(2, 36, 36))
    pa, pb = rng.uniform(0, 35, (2, 6, 2))
    cols = rng.normal(size=(4, 32, 12, 12, 3, 3))
    return {
        "hungarian_min 12x12": lambda k: k.hungarian_min(cost),
        "local_maxima 36x36": lambda k: k.local_maxima(grid, 0.1),
        "paf_pair_scores 6x6, 10 pts": lambda k: k.paf_pair_scores(paf_x, paf_y, pa, pb, 10, 0.05),
        "col2im 4x32x12x12, k=3": lambda k: k.col2im(cols, 14, 14, 1),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default="")
    args = ap.parse_args(argv)

    names = _kernels.available_backends()
    impls = {n: _kernels.backend(n) for n in names}
    rows = []
    for label, fn in workloads(np.random.default_rng(0)).items():
        row = {"kernel": label}
        for n, impl in impls.items():
            timer = timeit.Timer(lambda: fn(impl))
            number, _ = timer.autorange()
            row[n] = min(timer.repeat(args.repeat, number)) / number
        rows.append(row)

    print(f"{'kernel':<30}" + "".join(f"{n:>14}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for row in rows:
        line = f"{row['kernel']:<30}" + "".join(f"{row[n] * 1e6:12.1f}us" for n in names)
        if "cython" in row:
            line += f"{row['python'] / row['cython']:11.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
