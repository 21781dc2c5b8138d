"""Majority-class baseline: predicts training class frequencies for every row."""

from __future__ import annotations

import numpy as np

from ._encode import Encoded
from .base import Learner, register


def fit(data: Encoded, hp: dict, seed: int) -> dict:
    return {"class_counts": np.bincount(data.y, minlength=data.n_classes).tolist()}


def proba(params: dict, data: Encoded) -> np.ndarray:
    counts = np.asarray(params["class_counts"], dtype=np.float64)
    return np.tile(counts / counts.sum(), (data.n_rows, 1))


LEARNER = register(Learner("zero_r", fit, proba, {}))
