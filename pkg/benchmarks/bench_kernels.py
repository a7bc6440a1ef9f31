"""Compare the numba and numpy kernel backends on page-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once untimed (numba compiles on first call), then the best
of ``--repeat`` runs is reported.  Outputs are checked for equality.
"""
import argparse
import time

import numpy as np

from omrkit import kernels
from omrkit.ingest import SynthParams, synth_score
from omrkit.staffdet import binarize_page


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    page = synth_score(SynthParams(staves=6, spacing=14, noise=0.01, decoys=30, width=1600, height=2200))
    bits = np.ascontiguousarray(binarize_page(page.image))
    xy = rng.uniform(0, 1000, (3000, 2))
    boxes = np.hstack([xy, xy + rng.uniform(10, 80, (3000, 2))])
    order = np.argsort(-rng.random(3000), kind="stable")
    return {
        "erode_rows (1600x2200, w=53)": lambda k: k.erode_rows(bits, 53, 26),
        "dilate_rows (1600x2200, w=53)": lambda k: k.dilate_rows(bits, 53, 26),
        "label8 (1600x2200 page)": lambda k: k.label8(bits),
        "nms_sorted (3000 boxes)": lambda k: k.nms_sorted(boxes, order, 0.5, 3000),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.backends()
    if "numba" not in backends:
        print("numba is not importable; only the numpy backend can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}" + "".join(f"{name:>12}" for name in backends) + "   speedup")
    for label, run in cases(rng).items():
        results = {name: run(mod) for name, mod in backends.items()}
        ref = results["numpy"]
        assert all(same(ref, r) for r in results.values()), f"backends disagree on {label}"
        t = {name: best_of(lambda m=mod: run(m), args.repeat) for name, mod in backends.items()}
        speed = f"{t['numpy'] / t['numba']:8.1f}x" if "numba" in t else ""
        print(f"{label:<32}" + "".join(f"{t[n] * 1e3:10.2f}ms" for n in backends) + "   " + speed)


if __name__ == "__main__":
    main()
