import numpy as np
import pytest

from clickexit.table import Column, FeatureTable, SchemaMismatch, stratified_fold_indices


def sample():
    return FeatureTable.build(
        [Column.nominal("a", ["x", None, "y"]), Column.numeric("b", [1.5, None, -2.0])],
        ["E0", "E25", "E0"],
        ["E0", "E25"],
    )


def test_tsv_roundtrip():
    t = sample()
    back = FeatureTable.from_tsv(t.to_tsv())
    assert back.schema == t.schema and back.class_labels == t.class_labels
    assert list(back.column("a").values) == ["x", None, "y"]
    np.testing.assert_array_equal(back.column("b").values, t.column("b").values)
    assert back.row(1) == {"a": None, "b": None}


def test_validation():
    with pytest.raises(SchemaMismatch):
        FeatureTable.build([Column.nominal("a", ["x"])], ["E0", "E1"])
    with pytest.raises(SchemaMismatch):
        FeatureTable.build([Column.nominal("a", ["x"])], ["bad"], ["E0"])
    with pytest.raises(SchemaMismatch):
        FeatureTable.build([Column.nominal("a", ["x"]), Column.nominal("a", ["y"])], ["E0"])


def test_select_drop_take():
    t = sample()
    assert t.select(["b"]).names == ["b"]
    assert t.drop(["b"]).names == ["a"]
    assert list(t.take([2, 0]).class_values) == ["E0", "E0"]


def test_fold_indices_balanced():
    y = np.repeat(np.arange(5), 4)
    folds = stratified_fold_indices(y, 10, 3)
    sizes = np.bincount(folds, minlength=10)
    assert sizes.max() - sizes.min() <= 1
    for c in range(5):
        per = np.bincount(folds[y == c], minlength=10)
        assert per.max() - per.min() <= 1
