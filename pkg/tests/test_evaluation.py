import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from clickexit.evaluation import (
    EmptyMatrix,
    SingleClass,
    TooFewRows,
    accuracy,
    confusion_matrix,
    cross_validate,
    merge_task,
    multiclass_auroc,
    roc_curve,
    stratified_folds,
    summary_csv,
)
from clickexit.table import Column, FeatureTable
from clickexit.video_labeler import EXIT_CLASSES, UnknownLabel

from conftest import nominal_table


def rank_auc(scores, positive):
    """Mann-Whitney statistic with mid-ranks for ties."""
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(positive, dtype=bool)
    r = rankdata(s)
    P, N = pos.sum(), (~pos).sum()
    return (r[pos].sum() - P * (P + 1) / 2) / (P * N)


def test_accuracy_examples():
    assert accuracy([[50, 0], [0, 50]]) == 1.0
    assert accuracy([[25, 25], [25, 25]]) == 0.5
    assert accuracy([[0, 10], [10, 0]]) == 0.0
    with pytest.raises(EmptyMatrix):
        accuracy([[0, 0], [0, 0]])


def test_confusion_rows_are_truth():
    m = confusion_matrix([0, 0, 1], [0, 1, 1], 2)
    np.testing.assert_array_equal(m, [[1, 1], [0, 1]])


def test_roc_examples():
    assert roc_curve([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])[1] == 1.0
    assert roc_curve([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0])[1] == pytest.approx(0.75)
    assert roc_curve([0.5] * 6, [1, 0, 1, 0, 1, 1])[1] == pytest.approx(0.5)
    with pytest.raises(SingleClass):
        roc_curve([0.1, 0.2], [1, 1])


def test_roc_points_monotone():
    pts, _ = roc_curve([0.9, 0.8, 0.8, 0.2], [1, 0, 1, 0])
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
    assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(pts, pts[1:]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=60).filter(
    lambda xs: any(p for _, p in xs) and not all(p for _, p in xs)
))
def test_roc_matches_rank_statistic(pairs):
    s = [v / 6 for v, _ in pairs]
    lab = [p for _, p in pairs]
    assert roc_curve(s, lab)[1] == pytest.approx(rank_auc(s, lab), abs=1e-12)


def test_multiclass_auroc():
    y = np.repeat(np.arange(5), 20)
    perfect = np.eye(5)[y]
    assert multiclass_auroc(perfect, y) == 1.0
    rng = np.random.default_rng(0)
    y = rng.integers(0, 5, 2000)
    assert multiclass_auroc(rng.random((2000, 5)), y) == pytest.approx(0.5, abs=0.03)
    y2 = rng.integers(0, 2, 200)
    P2 = rng.random((200, 2))
    assert multiclass_auroc(P2, y2) == roc_curve(P2[:, 0], y2 == 0)[1]


def test_multiclass_auroc_weighting_oracle():
    rng = np.random.default_rng(1)
    y = rng.choice(5, 500, p=[0.5, 0.2, 0.1, 0.1, 0.1])
    P = rng.random((500, 5)) + 0.3 * np.eye(5)[y]
    per = np.array([rank_auc(P[:, c], y == c) for c in range(5)])
    prev = np.bincount(y, minlength=5) / len(y)
    assert multiclass_auroc(P, y) == pytest.approx(float(per @ prev))
    assert multiclass_auroc(P, y, "macro") == pytest.approx(float(per.mean()))


def test_folds_examples():
    t = nominal_table({"f": ["a"] * 100}, ["p", "n"] * 50)
    fa = stratified_folds(t, 10, 1)
    assert fa.sizes() == [10] * 10
    y = t.class_values
    for i in range(10):
        assert (y[fa.test_rows(i)] == "p").sum() == 5
    t5 = nominal_table({"f": ["a"] * 20}, list(EXIT_CLASSES) * 4, EXIT_CLASSES)
    fa5 = stratified_folds(t5, 10, 2)
    for c in EXIT_CLASSES:
        counts = [(t5.class_values[fa5.test_rows(i)] == c).sum() for i in range(10)]
        assert max(counts) - min(counts) <= 1
    again = stratified_folds(t5, 10, 2)
    np.testing.assert_array_equal(fa5.fold_index, again.fold_index)
    with pytest.raises(TooFewRows):
        stratified_folds(t5.take(range(5)), 10, 1)


def test_zero_r_on_60_40():
    t = nominal_table({"f": list("abcde") * 20}, ["a"] * 60 + ["b"] * 40, ["a", "b"])
    rep = cross_validate("zero_r", t, k=10, seed=1)
    assert rep.accuracy == pytest.approx(0.6)
    assert rep.auroc == pytest.approx(0.5)


def test_planted_tree_beats_chance(planted_binary):
    rep = cross_validate("c45", planted_binary, k=10, seed=1)
    assert rep.accuracy > 0.5 and rep.auroc > 0.5
    assert sum(np.asarray(m).sum() for m in rep.per_fold_confusions) == planted_binary.row_count


def test_random_five_class_near_twenty_percent():
    rng = np.random.default_rng(5)
    n = 2000
    t = FeatureTable.build(
        [Column.nominal("a", rng.choice(list("abcd"), n)), Column.nominal("b", rng.choice(list("xyz"), n))],
        list(rng.choice(EXIT_CLASSES, n)),
        EXIT_CLASSES,
    )
    rep = cross_validate("naive_bayes", t, k=10, seed=1)
    assert rep.accuracy == pytest.approx(0.2, abs=0.05)


def test_parallel_matches_serial(planted_binary):
    a = cross_validate("random_forest", planted_binary, k=4, seed=3, hyperparameters={"n_trees": 5})
    b = cross_validate("random_forest", planted_binary, k=4, seed=3, hyperparameters={"n_trees": 5}, jobs=2)
    assert a.to_json() == b.to_json()
    assert "wall_time" not in json.loads(a.to_json())
    c = cross_validate("zero_r", planted_binary, k=4, record_timing=True)
    assert c.to_dict()["wall_time"] >= 0


def test_merge_task_examples():
    t = nominal_table({"f": list("abcde")}, list(EXIT_CLASSES), EXIT_CLASSES)
    assert list(merge_task(t).class_values) == ["early", "early", "late", "late", "late"]
    t100 = nominal_table({"f": ["a"] * 3}, ["E100"] * 3, EXIT_CLASSES)
    assert set(merge_task(t100).class_values) == {"late"}
    with pytest.raises(UnknownLabel):
        merge_task(nominal_table({"f": ["a"]}, ["x"]))


def test_summary_and_roc_csv(planted_binary):
    rep = cross_validate("naive_bayes", planted_binary, k=5)
    assert summary_csv([rep]).splitlines()[0] == "learner,task,accuracy,auroc,seed"
    assert rep.roc_csv().startswith("class,fpr,tpr\n")
