"""C4.5-style decision trees: gain-ratio growth, pessimistic-error pruning."""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

from .. import _kernels
from ._encode import Encoded
from .base import Learner, register

DEFAULTS = {"min_leaf": 2, "prune_confidence": 0.25, "prune": True}
SUBTREE_SLACK = 0.1


def add_errs(n: float, e: float, cf: float) -> float:
    """Extra errors for the upper ``cf`` confidence limit of a leaf's error rate."""
    if e < 1:
        base = n * (1 - cf ** (1 / n))
        if e == 0:
            return base
        return base + e * (add_errs(n, 1, cf) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - cf)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


def grow(data: Encoded, rows=None, allowed=None, min_leaf: int = 2,
         max_features: int = 0, seed: int = 0, gain_ratio: bool = True) -> dict:
    rows = np.arange(data.n_rows, dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    allowed = list(range(data.n_features)) if allowed is None else [int(a) for a in allowed]
    tree = _kernels.grow_tree(
        data.Xn, data.Xc, data.feat_kind, data.feat_pos, data.feat_card, data.y,
        data.n_classes, rows, allowed, int(min_leaf), int(max_features), bool(gain_ratio),
        int(seed), _kernels.xlogx_table(len(rows)),
    )
    return {k: list(v) for k, v in tree.items()}


def _compact(tree: dict, is_leaf: list) -> dict:
    """Renumber the nodes still reachable from the root, preorder."""
    out = {k: [] for k in tree}
    order, new_id = [0], {}
    while order:
        node = order.pop()
        new_id[node] = len(out["feature"])
        out["feature"].append(-1 if is_leaf[node] else tree["feature"][node])
        out["threshold"].append(float("nan") if is_leaf[node] else tree["threshold"][node])
        out["missing_branch"].append(-1 if is_leaf[node] else tree["missing_branch"][node])
        out["counts"].append(tree["counts"][node])
        out["child_start"].append(0)
        out["n_children"].append(0)
        if not is_leaf[node]:
            start, k = tree["child_start"][node], tree["n_children"][node]
            order.extend(reversed(tree["edge_child"][start:start + k]))
    for old, new in sorted(new_id.items(), key=lambda kv: kv[1]):
        if is_leaf[old] or tree["feature"][old] < 0:
            continue
        start, k = tree["child_start"][old], tree["n_children"][old]
        out["child_start"][new] = len(out["edge_value"])
        out["n_children"][new] = k
        for e in range(start, start + k):
            out["edge_value"].append(tree["edge_value"][e])
            out["edge_child"].append(new_id[tree["edge_child"][e]])
    return out


def prune(tree: dict, confidence: float = 0.25) -> dict:
    """Replace a subtree by a leaf when the leaf's pessimistic error is no worse.

    Children always carry larger ids than their parent, so one descending
    sweep visits every subtree before its root.
    """
    n_nodes = len(tree["feature"])
    is_leaf = [f < 0 for f in tree["feature"]]
    estimate = [0.0] * n_nodes
    for node in range(n_nodes - 1, -1, -1):
        counts = tree["counts"][node]
        n = sum(counts)
        e = n - max(counts)
        leaf_est = e + add_errs(n, e, confidence) if n > 0 else 0.0
        if is_leaf[node]:
            estimate[node] = leaf_est
            continue
        start, k = tree["child_start"][node], tree["n_children"][node]
        sub_est = sum(estimate[c] for c in tree["edge_child"][start:start + k])
        if leaf_est <= sub_est + SUBTREE_SLACK:
            is_leaf[node] = True
            estimate[node] = leaf_est
        else:
            estimate[node] = sub_est
    return _compact(tree, is_leaf)


def stop_nodes(tree: dict, data: Encoded) -> np.ndarray:
    return _kernels.apply_tree(
        tree["feature"], tree["threshold"], tree["missing_branch"], tree["child_start"],
        tree["n_children"], tree["edge_value"], tree["edge_child"],
        data.feat_kind, data.feat_pos, data.Xn, data.Xc,
    )


def tree_proba(tree: dict, data: Encoded) -> np.ndarray:
    counts = np.asarray(tree["counts"], dtype=np.float64)
    return counts[stop_nodes(tree, data)]


def to_json_tree(tree: dict) -> dict:
    out = dict(tree)
    out["threshold"] = [None if t != t else t for t in tree["threshold"]]
    return out


def from_json_tree(tree: dict) -> dict:
    out = dict(tree)
    out["threshold"] = [float("nan") if t is None else t for t in tree["threshold"]]
    return out


def depth(tree: dict) -> int:
    best, stack = 0, [(0, 0)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        start, k = tree["child_start"][node], tree["n_children"][node]
        if tree["feature"][node] >= 0:
            stack.extend((c, d + 1) for c in tree["edge_child"][start:start + k])
    return best


def fit_c45(data: Encoded, hp: dict, seed: int, rows=None, allowed=None) -> dict:
    if hp["min_leaf"] < 1:
        raise ValueError("min_leaf must be >= 1")
    if not 0 < hp["prune_confidence"] < 1:
        raise ValueError("prune_confidence must be in (0, 1)")
    tree = grow(data, rows, allowed, hp["min_leaf"], 0, seed)
    if hp["prune"]:
        tree = prune(tree, hp["prune_confidence"])
    return tree


def fit(data: Encoded, hp: dict, seed: int) -> dict:
    return {"tree": to_json_tree(fit_c45(data, hp, seed))}


def proba(params: dict, data: Encoded) -> np.ndarray:
    return tree_proba(from_json_tree(params["tree"]), data)


LEARNER = register(Learner("c45", fit, proba, DEFAULTS))
