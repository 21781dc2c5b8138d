"""Naive Bayes over nominal (and discretized numeric) features with Laplace smoothing."""

from __future__ import annotations

import numpy as np

from ._encode import Encoded
from .base import Learner, register


def fit(data: Encoded, hp: dict, seed: int) -> dict:
    C = data.n_classes
    class_counts = np.bincount(data.y, minlength=C)
    tables = []
    for f in range(data.n_features):
        codes = data.nominal_column(f)
        V = int(data.feat_card[f])
        cnt = np.zeros((V, C), dtype=np.int64)
        np.add.at(cnt, (codes, data.y), 1)
        tables.append(cnt.tolist())
    return {"class_counts": class_counts.tolist(), "tables": tables}


def log_likelihoods(params: dict, data: Encoded) -> np.ndarray:
    class_counts = np.asarray(params["class_counts"], dtype=np.float64)
    C = len(class_counts)
    prior = (class_counts + 1.0) / (class_counts.sum() + C)
    logp = np.tile(np.log(prior), (data.n_rows, 1))
    for f, table in enumerate(params["tables"]):
        cnt = np.asarray(table, dtype=np.float64).reshape(-1, C)
        V = cnt.shape[0]
        denom = class_counts + V
        # an extra floor row serves values unseen in training
        cond = np.log(np.vstack([(cnt + 1.0) / denom, 1.0 / denom]))
        codes = data.nominal_column(f)
        logp += cond[np.where(codes < 0, V, codes)]
    return logp


def proba(params: dict, data: Encoded) -> np.ndarray:
    logp = log_likelihoods(params, data)
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    return p / p.sum(axis=1, keepdims=True)


LEARNER = register(Learner("naive_bayes", fit, proba, {}, discretize=True))
