"""Compare the compiled and numpy kernel implementations.

    python benchmarks/bench_kernels.py [--repeat N]

Times the Schur-complement block kernel on the block shapes of a Table-2
order-6 solve, the selector kernel on a level-set sized point cloud, and
one end-to-end feasibility solve per backend.
"""

import argparse
import time

import numpy as np

from pcsynth import _backend
from pcsynth.graph import debruijn
from pcsynth.model import example_family
from pcsynth.sdp import solve_feasibility
from pcsynth.sdp.solver import _Reduced
from pcsynth.synthesis import assemble_robust


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--order", type=int, default=6)
    args = ap.parse_args()

    problem = assemble_robust(example_family("ex3"), debruijn(2, args.order), 0.96)
    R = _Reduced(problem.compile())
    rng = np.random.default_rng(0)
    inputs = []
    for idx, coef, _ in R.groups:
        B, s = coef.shape[0], coef.shape[2]
        G = rng.normal(size=(B, s, s))
        X = np.ascontiguousarray(G @ G.transpose(0, 2, 1) + np.eye(s))
        inputs.append((np.ascontiguousarray(coef), X, X.copy(), np.empty((B, coef.shape[1], coef.shape[1]))))

    P = np.ascontiguousarray(np.stack([np.diag(rng.uniform(0.5, 2, 2)) for _ in range(64)]))
    pts = np.ascontiguousarray(rng.normal(size=(20_000, 2)))

    impls = _backend.available()
    print(f"active backend: {_backend.NAME}")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in impls))
    rows = {
        f"schur_blocks (l={args.order})": lambda k: [k.schur_blocks(*a) for a in inputs],
        "min_quadratic (64 x 20000)": lambda k: k.min_quadratic(P, pts),
        f"solve (l={args.order})": lambda k: solve_feasibility(problem, kernels=k),
    }
    for label, fn in rows.items():
        cells = []
        for kern in impls.values():
            cells.append(best_of(lambda: fn(kern), args.repeat))
        print(f"{label:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in cells))


if __name__ == "__main__":
    main()
