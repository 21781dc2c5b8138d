"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--rows 20000] [--repeat 3]

Prints one line per kernel with the best-of-``repeat`` time of each backend
and the speedup. Both backends are checked to return identical results first.
"""

import argparse
import timeit

import numpy as np

from clickexit import _kernels
from clickexit._kernels import python_backend


def workloads(rows: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    n_nom, n_num, n_classes = 8, 4, 5
    cards = rng.integers(2, 12, n_nom)
    Xn = np.stack([rng.integers(0, c, rows) for c in cards], axis=1).astype(np.int32)
    Xc = rng.normal(size=(rows, n_num)).round(2)
    Xc[rng.random(Xc.shape) < 0.05] = np.nan
    y = ((Xn[:, 0] + (Xc[:, 0] > 0) + rng.integers(0, 2, rows)) % n_classes).astype(np.int32)
    kinds = np.array([0] * n_nom + [1] * n_num, dtype=np.int32)
    pos = np.array(list(range(n_nom)) + list(range(n_num)), dtype=np.int32)
    card = np.array(list(cards) + [0] * n_num, dtype=np.int32)
    grow_args = (Xn, Xc, kinds, pos, card, y, n_classes, np.arange(rows, dtype=np.int64),
                 list(range(n_nom + n_num)), 2, 0, True, 1, _kernels.xlogx_table(rows))

    keys = np.sort(rng.integers(0, rows // 10 + 1, rows * 5)).astype(np.int64)
    times = rng.integers(0, 86_400, rows * 5).astype(np.int64)
    order = np.lexsort((times, keys))
    keys, times = keys[order], times[order]
    return {
        "joint_counts": lambda b: b.joint_counts(Xn[:, 0].astype(np.int64), int(cards[0]), y.astype(np.int64), n_classes),
        "session_breaks": lambda b: b.session_breaks(keys, times, 1800),
        "grow_tree": lambda b: b.grow_tree(*grow_args),
        "apply_tree": _apply_workload(grow_args, Xn, Xc, kinds, pos),
    }


def _apply_workload(grow_args, Xn, Xc, kinds, pos):
    tree = python_backend.grow_tree(*grow_args)
    keys = ("feature", "threshold", "missing_branch", "child_start", "n_children", "edge_value", "edge_child")
    flat = [list(tree[k]) for k in keys]
    return lambda b: b.apply_tree(*flat, kinds, pos, Xn, Xc)


def same(a, b) -> bool:
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(same(list(a[k]), list(b[k])) for k in a)
    return np.array_equal(np.asarray(a, dtype=float), np.asarray(b, dtype=float), equal_nan=True)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    if _kernels.compiled_backend is None:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")
    backends = {"compiled": _kernels.compiled_backend, "python": python_backend}
    print(f"rows={args.rows} repeat={args.repeat}")
    print(f"{'kernel':<16}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, fn in workloads(args.rows).items():
        if not same(fn(backends["compiled"]), fn(backends["python"])):
            raise SystemExit(f"{name}: backends disagree")
        t = {k: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for k, b in backends.items()}
        print(f"{name:<16}{t['compiled']:>12.4f}{t['python']:>12.4f}{t['python'] / t['compiled']:>9.1f}x")


if __name__ == "__main__":
    main()
