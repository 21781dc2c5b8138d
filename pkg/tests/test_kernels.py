"""The compiled and pure-Python kernels must agree exactly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickexit import _kernels
from clickexit._kernels import python_backend as py

pytestmark = pytest.mark.skipif(_kernels.compiled_backend is None, reason="compiled kernels not built")
cy = _kernels.compiled_backend


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 2)), max_size=60))
def test_joint_counts(pairs):
    x = np.array([p[0] for p in pairs], dtype=np.int64)
    y = np.array([p[1] for p in pairs], dtype=np.int64)
    np.testing.assert_array_equal(cy.joint_counts(x, 5, y, 3), py.joint_counts(x, 5, y, 3))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 5000)), max_size=60), st.integers(1, 2000))
def test_session_breaks(pairs, timeout):
    pairs.sort()
    k = np.array([p[0] for p in pairs], dtype=np.int64)
    t = np.array([p[1] for p in pairs], dtype=np.int64)
    np.testing.assert_array_equal(
        np.asarray(cy.session_breaks(k, t, timeout), dtype=bool),
        np.asarray(py.session_breaks(k, t, timeout), dtype=bool),
    )


def _dataset(rng, n, n_nom, n_num, n_classes):
    cards = rng.integers(2, 5, n_nom)
    Xn = np.stack([rng.integers(0, c, n) for c in cards], axis=1).astype(np.int32) if n_nom else np.zeros((n, 0), np.int32)
    Xc = rng.normal(size=(n, n_num)).round(1)
    Xc[rng.random(Xc.shape) < 0.1] = np.nan
    y = ((Xn[:, 0] if n_nom else 0) + (Xc[:, 0] > 0 if n_num else 0) + (rng.random(n) < 0.2)) % n_classes
    kinds = np.array([0] * n_nom + [1] * n_num, dtype=np.int32)
    pos = np.array(list(range(n_nom)) + list(range(n_num)), dtype=np.int32)
    card = np.array(list(cards) + [0] * n_num, dtype=np.int32)
    return Xn, Xc, kinds, pos, card, y.astype(np.int32)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(2, 80),
    n_nom=st.integers(1, 3),
    n_num=st.integers(0, 3),
    n_classes=st.integers(2, 4),
    min_leaf=st.integers(1, 4),
    max_features=st.integers(0, 3),
    gain_ratio=st.booleans(),
)
def test_grow_and_apply_tree(seed, n, n_nom, n_num, n_classes, min_leaf, max_features, gain_ratio):
    rng = np.random.default_rng(seed)
    Xn, Xc, kinds, pos, card, y = _dataset(rng, n, n_nom, n_num, n_classes)
    rows = np.sort(rng.choice(n, n, replace=True)).astype(np.int64)
    allowed = list(range(n_nom + n_num))
    xlx = _kernels.xlogx_table(n)
    args = (Xn, Xc, kinds, pos, card, y, n_classes, rows, allowed, min_leaf, max_features, gain_ratio, seed, xlx)
    a = {k: list(v) for k, v in cy.grow_tree(*args).items()}
    b = {k: list(v) for k, v in py.grow_tree(*args).items()}
    assert a.keys() == b.keys()
    for key in a:
        if key == "counts":
            assert [list(map(int, c)) for c in a[key]] == [list(map(int, c)) for c in b[key]]
        elif key == "threshold":
            np.testing.assert_array_equal(np.asarray(a[key], float), np.asarray(b[key], float))
        else:
            assert a[key] == b[key], key
    keys = ("feature", "threshold", "missing_branch", "child_start", "n_children", "edge_value", "edge_child")
    Xn2, Xc2 = Xn.copy(), Xc.copy()
    if n_nom:
        Xn2[::3, 0] = -1  # unseen values stop descent
    ta = [a[k] for k in keys]
    np.testing.assert_array_equal(
        cy.apply_tree(*ta, kinds, pos, Xn2, Xc2), py.apply_tree(*ta, kinds, pos, Xn2, Xc2)
    )
