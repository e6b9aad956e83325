"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--seed S]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from mvtrack.kernels import backends
from mvtrack.model import NUM_KEYPOINTS


def _cases(rng):
    yield "hungarian 8x8", "hungarian_square", (rng.uniform(0, 10, (8, 8)),)
    yield "hungarian 32x32", "hungarian_square", (rng.uniform(0, 10, (32, 32)),)
    yield "hungarian 128x128", "hungarian_square", (rng.uniform(0, 10, (128, 128)),)
    for n in (4, 16):
        pred = rng.uniform(0, 1000, (n, NUM_KEYPOINTS, 2))
        det = rng.uniform(0, 1000, (n, NUM_KEYPOINTS, 2))
        pv = rng.random((n, NUM_KEYPOINTS)) > 0.2
        dv = rng.random((n, NUM_KEYPOINTS)) > 0.2
        yield f"pose cost {n}x{n}", "pose_cost_matrix", (pred, pv, det, dv, 3)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = backends()
    if "compiled" not in impls:
        print("compiled extension not built; only the python backend is timed")
    rng = np.random.default_rng(args.seed)
    names = sorted(impls)
    print(f"{'case':<20}" + "".join(f"{n:>14}" for n in names) + f"{'speedup':>10}")
    for label, fn, inputs in _cases(rng):
        times = {}
        for name in names:
            f = getattr(impls[name], fn)
            number = max(1, int(0.2 / max(timeit.timeit(lambda: f(*inputs), number=1), 1e-7)))
            best = min(timeit.repeat(lambda: f(*inputs), number=number, repeat=args.repeat)) / number
            times[name] = best
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:<20}" + "".join(f"{times[n] * 1e6:>11.1f} us" for n in names) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
