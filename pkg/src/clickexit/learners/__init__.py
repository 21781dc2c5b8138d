"""Classifiers producing class-probability distributions over mixed features."""

from __future__ import annotations

from pathlib import Path

from ..table import FeatureTable
from . import decision_table, ensembles, naive_bayes, ripper, trees, zero_r  # noqa: F401  (registration)
from .base import (
    FORMAT_VERSION,
    REGISTRY,
    ClassDistribution,
    ModelArtifact,
    resolve_hyperparameters,
    train,
)

DEFAULT_LEARNERS = (
    "naive_bayes",
    "c45",
    "ripper",
    "decision_table",
    "random_forest",
    "random_subspace",
    "stacking",
)
LEARNER_KINDS = DEFAULT_LEARNERS + ("zero_r",)


def train_naive_bayes(table: FeatureTable, seed: int = 1) -> ModelArtifact:
    return train("naive_bayes", table, seed)


def train_c45(table: FeatureTable, min_leaf: int = 2, prune_confidence: float = 0.25,
              prune: bool = True, seed: int = 1) -> ModelArtifact:
    return train("c45", table, seed, min_leaf=min_leaf, prune_confidence=prune_confidence, prune=prune)


def train_ripper(table: FeatureTable, optimization_runs: int = 2, seed: int = 1) -> ModelArtifact:
    return train("ripper", table, seed, optimization_runs=optimization_runs)


def train_decision_table(table: FeatureTable, seed: int = 1) -> ModelArtifact:
    return train("decision_table", table, seed)


def train_random_forest(table: FeatureTable, n_trees: int = 100, seed: int = 1, **hp) -> ModelArtifact:
    return train("random_forest", table, seed, n_trees=n_trees, **hp)


def train_random_subspace(table: FeatureTable, n_members: int = 10, subspace_fraction: float = 0.5,
                          seed: int = 1, **hp) -> ModelArtifact:
    return train("random_subspace", table, seed, n_members=n_members,
                 subspace_fraction=subspace_fraction, **hp)


def train_stacking(table: FeatureTable, base_spec=None, seed: int = 1, **hp) -> ModelArtifact:
    if base_spec is not None:
        hp["base_spec"] = base_spec
    return train("stacking", table, seed, **hp)


def predict(model: ModelArtifact, row) -> ClassDistribution:
    return model.predict(row)


def save_model(model: ModelArtifact, path) -> None:
    Path(path).write_text(model.to_json() + "\n", encoding="utf-8")


def load_model(path) -> ModelArtifact:
    return ModelArtifact.from_json(Path(path).read_text(encoding="utf-8"))


__all__ = [
    "FORMAT_VERSION",
    "LEARNER_KINDS",
    "DEFAULT_LEARNERS",
    "REGISTRY",
    "ClassDistribution",
    "ModelArtifact",
    "load_model",
    "predict",
    "resolve_hyperparameters",
    "save_model",
    "train",
    "train_c45",
    "train_decision_table",
    "train_naive_bayes",
    "train_random_forest",
    "train_random_subspace",
    "train_ripper",
    "train_stacking",
]
