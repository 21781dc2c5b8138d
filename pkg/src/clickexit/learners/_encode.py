"""Integer/float encodings of feature tables for the learners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..feature_select import DEFAULT_BINS, Discretizer, fit_discretizer
from ..table import MISSING_LABEL, NOMINAL, NUMERIC, FeatureTable, SchemaMismatch

UNSEEN = -1


@dataclass
class Encoded:
    """Design matrices for one table under a fitted encoder.

    ``feat_kind[f]`` is 0 for a coded nominal feature (column ``feat_pos[f]``
    of ``Xn``) and 1 for a raw numeric one (column of ``Xc``).
    """

    Xn: np.ndarray
    Xc: np.ndarray
    y: np.ndarray | None
    n_classes: int
    feat_kind: np.ndarray
    feat_pos: np.ndarray
    feat_card: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.Xn.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.feat_kind)

    def take(self, idx) -> "Encoded":
        return Encoded(
            self.Xn[idx], self.Xc[idx], None if self.y is None else self.y[idx],
            self.n_classes, self.feat_kind, self.feat_pos, self.feat_card,
        )

    def nominal_column(self, f: int) -> np.ndarray:
        return self.Xn[:, self.feat_pos[f]]

    def numeric_column(self, f: int) -> np.ndarray:
        return self.Xc[:, self.feat_pos[f]]


class Encoder:
    """Vocabulary per nominal column; numeric columns kept raw or binned.

    Missing nominal values are the category ``"?"``; a value never seen in
    training encodes as ``UNSEEN``.
    """

    def __init__(self, schema, vocabs, discretizers, class_labels):
        self.schema = [tuple(s) for s in schema]
        self.vocabs = {k: list(v) for k, v in vocabs.items()}
        self.discretizers = dict(discretizers)
        self.class_labels = tuple(class_labels)
        self._lookup = {k: {v: i for i, v in enumerate(vs)} for k, vs in self.vocabs.items()}
        kinds, pos, card = [], [], []
        n_nom = n_num = 0
        for name, kind in self.schema:
            if kind == NOMINAL or name in self.discretizers:
                kinds.append(0)
                pos.append(n_nom)
                card.append(len(self.vocabs[name]))
                n_nom += 1
            else:
                kinds.append(1)
                pos.append(n_num)
                card.append(0)
                n_num += 1
        self.feat_kind = np.array(kinds, dtype=np.int32)
        self.feat_pos = np.array(pos, dtype=np.int32)
        self.feat_card = np.array(card, dtype=np.int32)
        self.n_nom = n_nom
        self.n_num = n_num

    @classmethod
    def fit(cls, table: FeatureTable, discretize: bool = False, bins: int = DEFAULT_BINS) -> "Encoder":
        vocabs, discs = {}, {}
        for col in table.columns:
            if col.kind == NUMERIC and not discretize:
                continue
            if col.kind == NUMERIC:
                known = col.values[~np.isnan(col.values)]
                disc = fit_discretizer(known, bins) if len(known) else Discretizer(())
                discs[col.name] = disc
                values = disc.transform(col.values)
            else:
                values = [MISSING_LABEL if v is None else v for v in col.values]
            vocabs[col.name] = sorted(set(values))
        return cls(table.schema, vocabs, discs, table.class_labels)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.schema]

    def _nominal_codes(self, name: str, values) -> np.ndarray:
        lookup = self._lookup[name]
        return np.fromiter(
            (lookup.get(MISSING_LABEL if v is None else v, UNSEEN) for v in values),
            dtype=np.int32,
            count=len(values),
        )

    def encode(self, table: FeatureTable, with_labels: bool = True) -> Encoded:
        if table.schema != self.schema:
            raise SchemaMismatch("table columns do not match the trained schema")
        n = table.row_count
        Xn = np.zeros((n, self.n_nom), dtype=np.int32)
        Xc = np.zeros((n, self.n_num), dtype=np.float64)
        for f, col in enumerate(table.columns):
            p = self.feat_pos[f]
            if self.feat_kind[f] == 0:
                values = col.values
                if col.name in self.discretizers:
                    values = self.discretizers[col.name].transform(col.values)
                Xn[:, p] = self._nominal_codes(col.name, values)
            else:
                Xc[:, p] = col.values
        y = None
        if with_labels:
            if tuple(table.class_labels) != self.class_labels:
                raise SchemaMismatch("class labels differ from training")
            y = table.class_codes()
        return Encoded(Xn, Xc, y, len(self.class_labels), self.feat_kind, self.feat_pos, self.feat_card)

    def encode_row(self, row: Mapping) -> Encoded:
        missing = [name for name in self.names if name not in row]
        extra = [k for k in row if k not in set(self.names)]
        if missing or extra:
            raise SchemaMismatch(f"row keys differ from schema: missing={missing} extra={extra}")
        Xn = np.zeros((1, self.n_nom), dtype=np.int32)
        Xc = np.zeros((1, self.n_num), dtype=np.float64)
        for f, name in enumerate(self.names):
            v = row[name]
            p = self.feat_pos[f]
            if self.feat_kind[f] == 0:
                if name in self.discretizers:
                    v = self.discretizers[name].transform([np.nan if v is None else float(v)])[0]
                Xn[0, p] = self._nominal_codes(name, [v])[0]
            else:
                Xc[0, p] = np.nan if v is None else float(v)
        return Encoded(Xn, Xc, None, len(self.class_labels), self.feat_kind, self.feat_pos, self.feat_card)

    def to_dict(self) -> dict:
        return {
            "schema": [list(s) for s in self.schema],
            "vocabs": self.vocabs,
            "discretizers": {k: list(d.edges) for k, d in self.discretizers.items()},
            "class_labels": list(self.class_labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Encoder":
        return cls(
            d["schema"],
            d["vocabs"],
            {k: Discretizer(tuple(v)) for k, v in d["discretizers"].items()},
            d["class_labels"],
        )
