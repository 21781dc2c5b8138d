"""Columnar feature tables shared by selection, learning and evaluation."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

NOMINAL = "nominal"
NUMERIC = "numeric"
MISSING_LABEL = "?"


class EmptyTable(ValueError):
    """Raised when an operation needs at least one row."""


class SchemaMismatch(ValueError):
    """Raised when rows or tables do not match an expected column schema."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def nominal_array(values: Iterable) -> np.ndarray:
    out = np.array([None if v is None else str(v) for v in values], dtype=object)
    return _freeze(out)


def numeric_array(values: Iterable) -> np.ndarray:
    out = np.array(
        [np.nan if v is None else float(v) for v in values], dtype=np.float64
    )
    return _freeze(out)


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in (NOMINAL, NUMERIC):
            raise ValueError(f"unknown column kind {self.kind!r}")

    @classmethod
    def nominal(cls, name: str, values: Iterable) -> "Column":
        return cls(name, NOMINAL, nominal_array(values))

    @classmethod
    def numeric(cls, name: str, values: Iterable) -> "Column":
        return cls(name, NUMERIC, numeric_array(values))

    def __len__(self) -> int:
        return len(self.values)

    def is_missing(self) -> np.ndarray:
        if self.kind == NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def take(self, idx) -> "Column":
        return Column(self.name, self.kind, _freeze(self.values[idx]))


@dataclass(frozen=True)
class FeatureTable:
    """Predictor columns plus a nominal class column.

    ``class_labels`` fixes the class ordering used by every learner and
    metric; each entry of ``class_values`` must be one of them.
    """

    columns: tuple
    class_values: np.ndarray
    class_labels: tuple

    def __post_init__(self):
        n = len(self.class_values)
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaMismatch("duplicate column names")
        for col in self.columns:
            if len(col) != n:
                raise SchemaMismatch(
                    f"column {col.name!r} has {len(col)} rows, expected {n}"
                )
        known = set(self.class_labels)
        bad = {v for v in self.class_values if v not in known}
        if bad:
            raise SchemaMismatch(f"class values outside class_labels: {sorted(bad)}")

    @classmethod
    def build(
        cls,
        columns: Sequence[Column],
        class_values: Iterable,
        class_labels: Sequence[str] | None = None,
    ) -> "FeatureTable":
        cv = nominal_array(class_values)
        if class_labels is None:
            class_labels = sorted(set(cv))
        return cls(tuple(columns), cv, tuple(class_labels))

    @property
    def row_count(self) -> int:
        return len(self.class_values)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def schema(self) -> list[tuple[str, str]]:
        return [(c.name, c.kind) for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def class_codes(self) -> np.ndarray:
        lookup = {label: i for i, label in enumerate(self.class_labels)}
        return np.fromiter(
            (lookup[v] for v in self.class_values), dtype=np.int32, count=self.row_count
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.class_codes(), minlength=len(self.class_labels))

    def take(self, idx) -> "FeatureTable":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.intp)
        return FeatureTable(
            tuple(c.take(idx) for c in self.columns),
            _freeze(self.class_values[idx]),
            self.class_labels,
        )

    def select(self, names: Iterable[str]) -> "FeatureTable":
        return FeatureTable(
            tuple(self.column(n) for n in names), self.class_values, self.class_labels
        )

    def drop(self, names: Iterable[str]) -> "FeatureTable":
        gone = set(names)
        return FeatureTable(
            tuple(c for c in self.columns if c.name not in gone),
            self.class_values,
            self.class_labels,
        )

    def with_class(self, values: Iterable, labels: Sequence[str]) -> "FeatureTable":
        return FeatureTable(self.columns, nominal_array(values), tuple(labels))

    def row(self, i: int) -> dict:
        out = {}
        for c in self.columns:
            v = c.values[i]
            if c.kind == NUMERIC:
                v = None if math.isnan(v) else float(v)
            out[c.name] = v
        return out

    def rows(self) -> Iterable[dict]:
        for i in range(self.row_count):
            yield self.row(i)

    def to_tsv(self) -> str:
        """Serialize with ``name:kind`` headers and the class column last."""
        buf = io.StringIO()
        header = [f"{c.name}:{c.kind}" for c in self.columns] + ["class:class"]
        buf.write("\t".join(header) + "\n")
        buf.write("#labels\t" + "\t".join(self.class_labels) + "\n")
        for i in range(self.row_count):
            cells = []
            for c in self.columns:
                v = c.values[i]
                if c.kind == NUMERIC:
                    cells.append("\\N" if math.isnan(v) else repr(float(v)))
                else:
                    cells.append("\\N" if v is None else v)
            cells.append(self.class_values[i])
            buf.write("\t".join(cells) + "\n")
        return buf.getvalue()

    @classmethod
    def from_tsv(cls, text: str) -> "FeatureTable":
        lines = text.splitlines()
        if not lines:
            raise EmptyTable("no header")
        header = lines[0].split("\t")
        if not header or header[-1] != "class:class":
            raise SchemaMismatch("last header cell must be class:class")
        specs = []
        for cell in header[:-1]:
            name, _, kind = cell.rpartition(":")
            specs.append((name, kind))
        body = lines[1:]
        labels = None
        if body and body[0].startswith("#labels\t"):
            labels = body[0].split("\t")[1:]
            body = body[1:]
        rows = [ln.split("\t") for ln in body if ln]
        for r in rows:
            if len(r) != len(header):
                raise SchemaMismatch("field count mismatch")
        cols = []
        for j, (name, kind) in enumerate(specs):
            raw = [None if r[j] == "\\N" else r[j] for r in rows]
            cols.append(
                Column.numeric(name, raw) if kind == NUMERIC else Column.nominal(name, raw)
            )
        return cls.build(cols, [r[-1] for r in rows], labels)


def table_from_records(
    records: Sequence[Mapping],
    schema: Sequence[tuple[str, str]],
    class_values: Iterable,
    class_labels: Sequence[str] | None = None,
) -> FeatureTable:
    cols = []
    for name, kind in schema:
        raw = [r.get(name) for r in records]
        cols.append(Column.numeric(name, raw) if kind == NUMERIC else Column.nominal(name, raw))
    return FeatureTable.build(cols, class_values, class_labels)


def stratified_fold_indices(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Shuffle each class by ``seed`` and deal rows round-robin into ``k`` folds.

    The dealing position carries over between classes so total fold sizes
    differ by at most one as well as per-class counts.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    position = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        folds[members] = (position + np.arange(len(members))) % k
        position = (position + len(members)) % k
    return folds
