"""Model artifacts, the learner registry and the shared prediction contract."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..table import EmptyTable, FeatureTable, SchemaMismatch
from ._encode import Encoded, Encoder

FORMAT_VERSION = "clickexit-model/1"


@dataclass(frozen=True)
class ClassDistribution:
    probabilities: tuple
    labels: tuple

    @property
    def label(self) -> str:
        # np.argmax returns the first maximum, i.e. class_labels order
        return self.labels[int(np.argmax(self.probabilities))]

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.probabilities))


@dataclass(frozen=True)
class Learner:
    kind: str
    fit: Callable  # (Encoded, hyperparameters, seed) -> parameters
    proba: Callable  # (parameters, Encoded) -> (n, C) array
    defaults: Mapping
    discretize: bool = False


REGISTRY: dict[str, Learner] = {}


def register(learner: Learner) -> Learner:
    REGISTRY[learner.kind] = learner
    return learner


def normalize_rows(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    s = p.sum(axis=1, keepdims=True)
    out = np.empty_like(p)
    ok = s[:, 0] > 0
    out[ok] = p[ok] / s[ok]
    out[~ok] = 1.0 / p.shape[1]
    return out


@dataclass
class ModelArtifact:
    learner_kind: str
    class_labels: tuple
    encoder: Encoder
    parameters: dict
    train_seed: int
    hyperparameters: dict = field(default_factory=dict)

    @property
    def schema(self) -> list:
        return self.encoder.schema

    def _proba(self, data: Encoded) -> np.ndarray:
        p = REGISTRY[self.learner_kind].proba(self.parameters, data)
        return normalize_rows(p)

    def predict_proba(self, table: FeatureTable) -> np.ndarray:
        """Class distributions for every row of ``table`` (columns in class_labels order)."""
        return self._proba(self.encoder.encode(table, with_labels=False))

    def predict_labels(self, table: FeatureTable) -> list:
        p = self.predict_proba(table)
        return [self.class_labels[i] for i in np.argmax(p, axis=1)]

    def predict(self, row: Mapping) -> ClassDistribution:
        p = self._proba(self.encoder.encode_row(row))[0]
        return ClassDistribution(tuple(float(v) for v in p), self.class_labels)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "learner_kind": self.learner_kind,
            "class_labels": list(self.class_labels),
            "encoder": self.encoder.to_dict(),
            "parameters": self.parameters,
            "train_seed": self.train_seed,
            "hyperparameters": self.hyperparameters,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelArtifact":
        if d.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        if d["learner_kind"] not in REGISTRY:
            raise ValueError(f"unknown learner kind {d['learner_kind']!r}")
        return cls(
            d["learner_kind"],
            tuple(d["class_labels"]),
            Encoder.from_dict(d["encoder"]),
            d["parameters"],
            int(d["train_seed"]),
            dict(d["hyperparameters"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelArtifact":
        return cls.from_dict(json.loads(text))


def resolve_hyperparameters(kind: str, overrides: Mapping | None) -> dict:
    if kind not in REGISTRY:
        raise ValueError(f"unknown learner {kind!r}; expected one of {sorted(REGISTRY)}")
    hp = dict(REGISTRY[kind].defaults)
    for k, v in (overrides or {}).items():
        if k not in hp:
            raise ValueError(f"{kind} has no hyperparameter {k!r}")
        hp[k] = v
    return hp


def train(kind: str, table: FeatureTable, seed: int = 1, **hyperparameters) -> ModelArtifact:
    """Fit learner ``kind`` on ``table``; unknown hyperparameter names are rejected."""
    hp = resolve_hyperparameters(kind, hyperparameters)
    if table.row_count == 0:
        raise EmptyTable("cannot train on an empty table")
    learner = REGISTRY[kind]
    encoder = Encoder.fit(table, discretize=learner.discretize)
    data = encoder.encode(table)
    params = learner.fit(data, hp, int(seed))
    return ModelArtifact(kind, tuple(table.class_labels), encoder, params, int(seed), hp)


__all__ = [
    "ClassDistribution",
    "FORMAT_VERSION",
    "Learner",
    "ModelArtifact",
    "REGISTRY",
    "SchemaMismatch",
    "normalize_rows",
    "register",
    "resolve_hyperparameters",
    "train",
]
