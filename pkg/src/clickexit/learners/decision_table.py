"""Decision table with best-first forward feature-subset search.

A subset is scored by the leave-one-out accuracy of the lookup table built
on it: a row is classified by its key's class counts with its own label
removed, or by the global majority (again without itself) if the key is
then empty.
"""

from __future__ import annotations

import heapq

import numpy as np

from ._encode import Encoded
from .base import Learner, register

DEFAULTS = {"stale_limit": 5}


def key_codes(Z: np.ndarray, subset) -> np.ndarray:
    """Dense key id per row for the projection onto ``subset``."""
    key = np.zeros(Z.shape[0], dtype=np.int64)
    for f in subset:
        col = Z[:, f].astype(np.int64) + 1  # shift so an unseen code (-1) stays distinct
        _, key = np.unique(key * (int(col.max()) + 1) + col, return_inverse=True)
        key = key.astype(np.int64).ravel()
    return key


def loo_accuracy(Z: np.ndarray, y: np.ndarray, n_classes: int, subset) -> float:
    n = len(y)
    key = key_codes(Z, subset)
    K = int(key.max()) + 1
    counts = np.bincount(key * n_classes + y, minlength=K * n_classes).reshape(K, n_classes)
    own = counts[key].copy()
    own[np.arange(n), y] -= 1
    pred = np.argmax(own, axis=1)
    empty = own.sum(axis=1) == 0
    if empty.any():
        glob = np.bincount(y, minlength=n_classes)
        g = np.tile(glob, (int(empty.sum()), 1))
        g[np.arange(len(g)), y[empty]] -= 1
        pred[empty] = np.argmax(g, axis=1)
    return float(np.mean(pred == y))


def best_first(Z: np.ndarray, y: np.ndarray, n_classes: int, stale_limit: int = 5) -> tuple:
    """Forward best-first search; stops after ``stale_limit`` expansions without improvement."""
    M = Z.shape[1]
    start = ()
    best_subset, best_merit = start, loo_accuracy(Z, y, n_classes, start)
    counter = 0
    open_heap = [(-best_merit, 0, counter, start)]
    seen = {start}
    stale = 0
    while open_heap and stale < stale_limit:
        _, _, _, subset = heapq.heappop(open_heap)
        improved = False
        for f in range(M):
            if f in subset:
                continue
            child = tuple(sorted(subset + (f,)))
            if child in seen:
                continue
            seen.add(child)
            merit = loo_accuracy(Z, y, n_classes, child)
            counter += 1
            heapq.heappush(open_heap, (-merit, len(child), counter, child))
            if merit > best_merit + 1e-12:
                best_merit, best_subset = merit, child
                improved = True
        stale = 0 if improved else stale + 1
    return best_subset, best_merit


def fit(data: Encoded, hp: dict, seed: int) -> dict:
    Z = data.Xn
    subset, merit = best_first(Z, data.y, data.n_classes, hp["stale_limit"])
    C = data.n_classes
    entries: dict[tuple, list] = {}
    sub = Z[:, list(subset)] if subset else np.zeros((data.n_rows, 0), dtype=Z.dtype)
    for row, label in zip(sub.tolist(), data.y.tolist()):
        entries.setdefault(tuple(row), [0] * C)[label] += 1
    return {
        "features": list(subset),
        "loo_accuracy": merit,
        "table": [[list(k), v] for k, v in sorted(entries.items())],
        "class_counts": np.bincount(data.y, minlength=C).tolist(),
    }


def proba(params: dict, data: Encoded) -> np.ndarray:
    lookup = {tuple(k): v for k, v in params["table"]}
    glob = params["class_counts"]
    feats = params["features"]
    sub = data.Xn[:, feats] if feats else np.zeros((data.n_rows, 0), dtype=np.int32)
    return np.array([lookup.get(tuple(r), glob) for r in sub.tolist()], dtype=np.float64).reshape(
        data.n_rows, len(glob)
    )


LEARNER = register(Learner("decision_table", fit, proba, DEFAULTS, discretize=True))
