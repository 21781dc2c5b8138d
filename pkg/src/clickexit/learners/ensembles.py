"""Random forest, random subspace and stacking ensembles of C4.5 trees."""

from __future__ import annotations

import math

import numpy as np

from ..table import Column, FeatureTable, stratified_fold_indices
from ._encode import Encoded
from .base import Learner, ModelArtifact, normalize_rows, register, resolve_hyperparameters, train
from .trees import fit_c45, from_json_tree, grow, to_json_tree, tree_proba

RF_DEFAULTS = {"n_trees": 100, "max_features": -1, "min_leaf": 1}
RS_DEFAULTS = {
    "n_members": 10,
    "subspace_fraction": 0.5,
    "min_leaf": 2,
    "prune_confidence": 0.25,
    "prune": True,
}
ST_DEFAULTS = {
    "base_spec": [{"n_members": 10, "subspace_fraction": 0.5}],
    "meta_learner": "naive_bayes",
    "inner_folds": 10,
}


def member_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _average(trees: list, data: Encoded) -> np.ndarray:
    total = np.zeros((data.n_rows, data.n_classes))
    for t in trees:
        total += normalize_rows(tree_proba(from_json_tree(t), data))
    return total / len(trees)


# random forest -------------------------------------------------------------

def fit_forest(data: Encoded, hp: dict, seed: int) -> dict:
    if hp["n_trees"] < 1:
        raise ValueError("n_trees must be >= 1")
    M = data.n_features
    mf = hp["max_features"]
    if mf < 0:
        mf = max(1, int(math.sqrt(M)))
    trees = []
    for t in range(hp["n_trees"]):
        rng = member_rng(seed, t)
        rows = rng.integers(0, data.n_rows, data.n_rows)
        tree_seed = int(rng.integers(0, 2**63 - 1))
        trees.append(to_json_tree(grow(data, rows, None, hp["min_leaf"], mf, tree_seed)))
    return {"trees": trees, "max_features": mf}


def proba_forest(params: dict, data: Encoded) -> np.ndarray:
    return _average(params["trees"], data)


# random subspace ------------------------------------------------------------

def subspace_features(n_features: int, fraction: float, seed: int, index: int) -> list[int]:
    k = math.ceil(fraction * n_features - 1e-9)
    k = min(max(k, 1), n_features)
    return sorted(int(f) for f in member_rng(seed, index).choice(n_features, k, replace=False))


def fit_subspace(data: Encoded, hp: dict, seed: int, rows=None) -> dict:
    if hp["n_members"] < 1:
        raise ValueError("n_members must be >= 1")
    if not 0 < hp["subspace_fraction"] <= 1:
        raise ValueError("subspace_fraction must be in (0, 1]")
    members, features = [], []
    for m in range(hp["n_members"]):
        feats = subspace_features(data.n_features, hp["subspace_fraction"], seed, m)
        features.append(feats)
        members.append(to_json_tree(fit_c45(data, hp, seed, rows=rows, allowed=feats)))
    return {"trees": members, "features": features}


def proba_subspace(params: dict, data: Encoded) -> np.ndarray:
    return _average(params["trees"], data)


# stacking ---------------------------------------------------------------

def _base_hp(spec: dict) -> dict:
    return resolve_hyperparameters("random_subspace", spec)


def meta_table(blocks: list[np.ndarray], y, class_labels) -> FeatureTable:
    cols = []
    for b, block in enumerate(blocks):
        for c, label in enumerate(class_labels):
            cols.append(Column.numeric(f"b{b}_{label}", block[:, c]))
    return FeatureTable.build(cols, [class_labels[i] for i in y], class_labels)


def level_one(data: Encoded, specs: list, seed: int, folds: int) -> list[np.ndarray]:
    """Out-of-fold class probabilities of every base, one (n, C) block per base."""
    k = min(folds, data.n_rows)
    assign = stratified_fold_indices(data.y, k, seed) if k >= 2 else np.zeros(data.n_rows, dtype=np.int64)
    blocks = [np.zeros((data.n_rows, data.n_classes)) for _ in specs]
    for fold in range(k):
        test = np.flatnonzero(assign == fold)
        trn = np.flatnonzero(assign != fold)
        if len(trn) == 0:
            trn = test
        for b, spec in enumerate(specs):
            sub = data.take(trn)
            params = fit_subspace(sub, _base_hp(spec), seed + b)
            blocks[b][test] = normalize_rows(proba_subspace(params, data.take(test)))
    return blocks


def fit_stacking(data: Encoded, hp: dict, seed: int) -> dict:
    specs = list(hp["base_spec"])
    if not specs:
        raise ValueError("base_spec must name at least one base ensemble")
    labels = list(range(data.n_classes))
    names = [f"c{i}" for i in labels]
    blocks = level_one(data, specs, seed, hp["inner_folds"])
    meta = train(hp["meta_learner"], meta_table(blocks, data.y, names), seed)
    bases = [fit_subspace(data, _base_hp(spec), seed + b) for b, spec in enumerate(specs)]
    return {"bases": bases, "meta": meta.to_dict()}


def proba_stacking(params: dict, data: Encoded) -> np.ndarray:
    blocks = [normalize_rows(proba_subspace(b, data)) for b in params["bases"]]
    meta = ModelArtifact.from_dict(params["meta"])
    names = meta.class_labels
    dummy = np.zeros(data.n_rows, dtype=np.int64)
    return meta.predict_proba(meta_table(blocks, dummy, list(names)))


register(Learner("random_forest", fit_forest, proba_forest, RF_DEFAULTS))
register(Learner("random_subspace", fit_subspace, proba_subspace, RS_DEFAULTS))
register(Learner("stacking", fit_stacking, proba_stacking, ST_DEFAULTS))
