"""Feature ranking by chi-squared, information gain, gain ratio, OneR and
symmetric uncertainty, plus the cross-method consensus set.

Every scorer works on a feature-by-class contingency table in which a
missing value is an ordinary category.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .table import MISSING_LABEL, NOMINAL, Column, FeatureTable

METHODS = ("chi2", "info_gain", "gain_ratio", "one_r", "symmetric_uncertainty")
DEFAULT_BINS = 10


class AllMissing(ValueError):
    pass


class DegenerateClass(UserWarning):
    """Only one class value observed; scores are reported as zero."""


@dataclass(frozen=True)
class Discretizer:
    edges: tuple

    def transform(self, values) -> np.ndarray:
        vals = np.asarray(values, dtype=np.float64)
        bins = np.searchsorted(np.asarray(self.edges, dtype=np.float64), vals, side="right")
        out = np.array([f"b{b}" for b in bins], dtype=object)
        out[np.isnan(vals)] = MISSING_LABEL
        return out


def fit_discretizer(values, bins: int = DEFAULT_BINS) -> Discretizer:
    """Equal-frequency cut points from the sorted known values.

    Cut ``i`` sits at the value of rank ``i*n//bins``; repeated cuts and cuts
    at the minimum are merged away, so skewed data yields fewer bins.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    vals = np.asarray(values, dtype=np.float64)
    known = np.sort(vals[~np.isnan(vals)])
    if len(known) == 0:
        raise AllMissing("cannot discretize an all-missing column")
    n = len(known)
    cuts = np.unique(known[[i * n // bins for i in range(1, bins)]])
    cuts = cuts[cuts > known[0]]
    return Discretizer(tuple(float(c) for c in cuts))


def discretize(values, bins: int = DEFAULT_BINS) -> np.ndarray:
    return fit_discretizer(values, bins).transform(values)


def _codes(values) -> tuple[np.ndarray, int]:
    labels = [MISSING_LABEL if v is None else v for v in values]
    uniq, inv = np.unique(np.array(labels, dtype=object), return_inverse=True)
    return inv.astype(np.int64), len(uniq)


def contingency(feature, klass) -> np.ndarray:
    """Observed counts, rows = feature values, columns = class values (sorted)."""
    if len(feature) != len(klass):
        raise ValueError("feature and class lengths differ")
    fx, nx = _codes(feature)
    cy, ny = _codes(klass)
    return _kernels.joint_counts(fx, nx, cy, ny)


def _degenerate(table: np.ndarray) -> bool:
    if table.shape[1] < 2:
        warnings.warn("single class value; score is 0", DegenerateClass, stacklevel=3)
        return True
    return False


def _independent(table: np.ndarray) -> bool:
    # exact integer test that the empirical joint factorizes
    n = int(table.sum())
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    return bool((table * n == np.outer(rows, cols)).all())


def _entropy_bits(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum())


def chi2_from_table(table: np.ndarray) -> float:
    if _degenerate(table) or _independent(table):
        return 0.0
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    mask = expected > 0
    return float((((table - expected) ** 2)[mask] / expected[mask]).sum())


def info_gain_from_table(table: np.ndarray) -> float:
    if _degenerate(table) or _independent(table):
        return 0.0
    n = table.sum()
    h_class = _entropy_bits(table.sum(axis=0))
    h_cond = sum(r.sum() / n * _entropy_bits(r) for r in table if r.sum() > 0)
    return max(0.0, h_class - h_cond)


def gain_ratio_from_table(table: np.ndarray) -> float:
    ig = info_gain_from_table(table)
    split = _entropy_bits(table.sum(axis=1))
    if split <= 0 or ig == 0.0:
        return 0.0
    return min(1.0, ig / split)


def one_r_from_table(table: np.ndarray) -> float:
    if _degenerate(table):
        return 0.0
    # argmax ties resolve to the first (lexicographically smallest) class
    return float(table.max(axis=1).sum() / table.sum())


def symmetric_uncertainty_from_table(table: np.ndarray) -> float:
    ig = info_gain_from_table(table)
    denom = _entropy_bits(table.sum(axis=1)) + _entropy_bits(table.sum(axis=0))
    if denom <= 0 or ig == 0.0:
        return 0.0
    return min(1.0, 2.0 * ig / denom)


def chi_squared(feature, klass) -> float:
    return chi2_from_table(contingency(feature, klass))


def info_gain(feature, klass) -> float:
    return info_gain_from_table(contingency(feature, klass))


def gain_ratio(feature, klass) -> float:
    return gain_ratio_from_table(contingency(feature, klass))


def one_r(feature, klass) -> float:
    return one_r_from_table(contingency(feature, klass))


def symmetric_uncertainty(feature, klass) -> float:
    return symmetric_uncertainty_from_table(contingency(feature, klass))


SCORERS: dict[str, Callable[[np.ndarray], float]] = {
    "chi2": chi2_from_table,
    "info_gain": info_gain_from_table,
    "gain_ratio": gain_ratio_from_table,
    "one_r": one_r_from_table,
    "symmetric_uncertainty": symmetric_uncertainty_from_table,
}


@dataclass(frozen=True)
class RankedFeatures:
    method: str
    entries: tuple

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.names[:k]

    def rank_of(self, name: str) -> int:
        return self.names.index(name) + 1


def nominal_view(col: Column, bins: int = DEFAULT_BINS) -> np.ndarray:
    if col.kind == NOMINAL:
        return col.values
    if np.isnan(col.values).all():
        return np.array([MISSING_LABEL] * len(col.values), dtype=object)
    return discretize(col.values, bins)


def column_tables(table: FeatureTable, bins: int = DEFAULT_BINS) -> dict[str, np.ndarray]:
    return {c.name: contingency(nominal_view(c, bins), table.class_values) for c in table.columns}


def rank(table: FeatureTable, method: str, bins: int = DEFAULT_BINS, tables: dict | None = None) -> RankedFeatures:
    """Score every predictor with ``method``; descending, ties by name."""
    if method not in SCORERS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if table.row_count < 2:
        raise ValueError("ranking needs at least two rows")
    tables = tables if tables is not None else column_tables(table, bins)
    scorer = SCORERS[method]
    scored = [(name, float(scorer(tables[name]))) for name in table.names]
    scored.sort(key=lambda e: (-e[1], e[0]))
    return RankedFeatures(method, tuple(scored))


def rank_all(table: FeatureTable, methods: Sequence[str] = METHODS, bins: int = DEFAULT_BINS) -> list[RankedFeatures]:
    tables = column_tables(table, bins)
    return [rank(table, m, bins, tables) for m in methods]


def consensus(rankings: Sequence[RankedFeatures], top_fraction: float = 0.10, min_votes: int = 3) -> set[str]:
    """Features inside the top ``ceil(top_fraction * M)`` of at least ``min_votes`` rankings."""
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must be in (0, 1]")
    if not rankings:
        return set()
    columns = set(rankings[0].names)
    if any(set(r.names) != columns for r in rankings):
        raise ValueError("rankings cover different column sets")
    cutoff = math.ceil(top_fraction * len(columns) - 1e-9)
    votes: dict[str, int] = {}
    for r in rankings:
        for name in r.top(cutoff):
            votes[name] = votes.get(name, 0) + 1
    return {name for name, v in votes.items() if v >= min_votes}


def rankings_csv(rankings: Iterable[RankedFeatures]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "rank", "feature", "score"])
    for r in rankings:
        for i, (name, score) in enumerate(r.entries, start=1):
            w.writerow([r.method, i, name, f"{score:.10g}"])
    return buf.getvalue()
