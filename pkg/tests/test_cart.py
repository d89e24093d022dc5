import numpy as np
import pytest

from treeimpute.cart import (
    CLASSIFICATION, REGRESSION, TrainSet, TreeParams, fit_tree,
)
from treeimpute.rngdist import stream

EPS = 1e-12


def make_ts(X, y, kinds=None, nlev=None, task=REGRESSION, n_classes=0, w=None):
    X = np.asarray(X, dtype=float)
    q = X.shape[1]
    kinds = np.zeros(q, dtype=np.int64) if kinds is None else np.asarray(kinds, dtype=np.int64)
    nlev = np.zeros(q, dtype=np.int64) if nlev is None else np.asarray(nlev, dtype=np.int64)
    return TrainSet(X, kinds, nlev, np.asarray(y, dtype=float), task,
                    n_classes=n_classes,
                    w=None if w is None else np.asarray(w, dtype=float))


# ---------------------------------------------------------------------------
# brute-force split oracle, replicating the fitter's tie-break rules
# ---------------------------------------------------------------------------

def _impurity(y, task, n_classes):
    if len(y) == 0:
        return 0.0
    if task == REGRESSION:
        s, ss = np.sum(y), np.sum(np.asarray(y) ** 2)
        return max(ss - s * s / len(y), 0.0)
    counts = np.bincount(np.asarray(y, dtype=int), minlength=n_classes).astype(float)
    return max(len(y) - np.sum(counts ** 2) / len(y), 0.0)


def brute_force_root_split(X, y, task, n_classes, kinds, nlev, min_node=1):
    """Exhaustive best root split; features ascending, thresholds ascending,
    canonical masks (bit 0 set) ascending, strict improvement only."""
    n, q = X.shape
    parent = _impurity(y, task, n_classes)
    best = (parent - EPS, None)
    for f in range(q):
        if kinds[f] == 0:
            vals = np.unique(X[:, f])
            for t in 0.5 * (vals[:-1] + vals[1:]):
                go = X[:, f] <= t
                if go.sum() < min_node or (~go).sum() < min_node:
                    continue
                child = _impurity(y[go], task, n_classes) + \
                    _impurity(y[~go], task, n_classes)
                if child < best[0]:
                    best = (child, (f, "thr", t))
        else:
            L = int(nlev[f])
            for mask in range(1, (1 << L) - 1, 2):
                go = ((mask >> X[:, f].astype(int)) & 1) == 1
                if go.sum() < min_node or (~go).sum() < min_node:
                    continue
                child = _impurity(y[go], task, n_classes) + \
                    _impurity(y[~go], task, n_classes)
                if child < best[0]:
                    best = (child, (f, "mask", mask))
    return best[1]


def root_split_of(tree):
    if tree.feature[0] < 0:
        return None
    f = int(tree.feature[0])
    if np.isnan(tree.thr[0]):
        return (f, "mask", int(tree.smask[0]))
    return (f, "thr", float(tree.thr[0]))


@pytest.mark.parametrize("task,n_classes", [(REGRESSION, 0), (CLASSIFICATION, 3)])
@pytest.mark.parametrize("seed", range(30))
def test_root_split_matches_brute_force(task, n_classes, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    q = int(rng.integers(1, 4))
    kinds = rng.integers(0, 2, size=q)
    nlev = np.where(kinds == 1, rng.integers(2, 5, size=q), 0)
    cols = []
    for f in range(q):
        if kinds[f] == 1:
            cols.append(rng.integers(0, nlev[f], size=n).astype(float))
        else:
            cols.append(rng.integers(-5, 6, size=n).astype(float))  # exact sums
    X = np.column_stack(cols)
    if task == REGRESSION:
        y = rng.integers(-4, 5, size=n).astype(float)
    else:
        y = rng.integers(0, n_classes, size=n).astype(float)
    ts = make_ts(X, y, kinds, nlev, task, n_classes)
    tree = fit_tree(ts, TreeParams(mtry=q, min_node=1, max_depth=1),
                    stream(seed, "oracle"))
    expected = brute_force_root_split(X, y, task, n_classes, kinds, nlev)
    assert root_split_of(tree) == expected


def test_single_row_is_leaf():
    ts = make_ts([[1.0]], [3.0])
    tree = fit_tree(ts, TreeParams(mtry=1, min_node=1), stream(0, "t"))
    assert tree.n_nodes == 1
    assert tree.predict([[99.0]])[0] == 3.0


def test_constant_covariates_leaf():
    ts = make_ts([[1.0]] * 5, [1.0, 2.0, 3.0, 4.0, 5.0])
    tree = fit_tree(ts, TreeParams(mtry=1, min_node=1), stream(0, "t"))
    assert tree.n_nodes == 1
    assert tree.predict([[1.0]])[0] == pytest.approx(3.0)


def test_constant_covariates_classification():
    ts = make_ts([[1.0]] * 4, [0, 1, 1, 1], task=CLASSIFICATION, n_classes=2)
    tree = fit_tree(ts, TreeParams(mtry=1, min_node=1), stream(0, "t"))
    assert tree.n_nodes == 1
    assert np.allclose(tree.predict([[1.0]])[0], [0.25, 0.75])


def test_stump_routing():
    ts = make_ts([[0.0], [1.0], [2.0], [3.0]], [0.0, 0.0, 10.0, 10.0])
    tree = fit_tree(ts, TreeParams(mtry=1, min_node=1, max_depth=1), stream(0, "t"))
    assert tree.n_nodes == 3
    assert tree.predict([[0.5]])[0] == 0.0
    assert tree.predict([[2.5]])[0] == 10.0


def test_memorization():
    # duplicate-free covariates, unlimited depth, min_node 1 -> exact recall
    rng = np.random.default_rng(3)
    X = rng.permutation(40).reshape(20, 2).astype(float)
    y = rng.normal(size=20)
    ts = make_ts(X, y)
    tree = fit_tree(ts, TreeParams(mtry=2, min_node=1, max_depth=100), stream(1, "t"))
    assert np.allclose(tree.predict(X), y)


def test_leaf_probabilities_sum_to_one():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    y = rng.integers(0, 3, size=30).astype(float)
    ts = make_ts(X, y, task=CLASSIFICATION, n_classes=3)
    tree = fit_tree(ts, TreeParams(mtry=2, min_node=1), stream(2, "t"))
    probs = tree.predict(X)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_impurity_strictly_decreases():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60)
    ts = make_ts(X, y)
    tree = fit_tree(ts, TreeParams(mtry=3, min_node=2), stream(3, "t"))

    def node_rows(node, rows):
        out = {node: rows}
        if tree.feature[node] < 0:
            return out
        f = int(tree.feature[node])
        go = rows[X[rows, f] <= tree.thr[node]]
        out.update(node_rows(int(tree.left[node]), go))
        out.update(node_rows(int(tree.right[node]),
                             rows[X[rows, f] > tree.thr[node]]))
        return out

    rows_of = node_rows(0, np.arange(60))
    for node, rows in rows_of.items():
        if tree.feature[node] < 0:
            continue
        l, r = int(tree.left[node]), int(tree.right[node])
        assert _impurity(y[rows_of[l]], REGRESSION, 0) + \
            _impurity(y[rows_of[r]], REGRESSION, 0) < \
            _impurity(y[rows], REGRESSION, 0)


def test_determinism_under_fixed_stream():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 5))
    y = rng.normal(size=50)
    ts = make_ts(X, y)
    t1 = fit_tree(ts, TreeParams(mtry=2), stream(9, "fit"))
    t2 = fit_tree(ts, TreeParams(mtry=2), stream(9, "fit"))
    assert np.array_equal(t1.feature, t2.feature)
    assert np.array_equal(t1.thr, t2.thr, equal_nan=True)


def test_unseen_level_routes_to_heavier_child():
    # nominal root split with uneven children
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    y = np.array([5.0, 5.0, 5.0, -5.0])
    ts = make_ts(X, y, kinds=[1], nlev=[2])
    tree = fit_tree(ts, TreeParams(mtry=1, min_node=1), stream(0, "t"))
    assert tree.n_nodes == 3
    heavier = tree.predict([[0.0]])[0] if tree.wl[0] >= tree.wr[0] \
        else tree.predict([[1.0]])[0]
    assert tree.predict([[7.0]])[0] == heavier  # level 7 never seen


def test_ordinal_threshold_split():
    # ordinal feature: only order-respecting cuts, so {0,2} vs {1} is impossible
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    ts = make_ts(X, y, kinds=[0], nlev=[4], task=CLASSIFICATION, n_classes=2)
    tree = fit_tree(ts, TreeParams(mtry=1, min_node=1, max_depth=1), stream(0, "t"))
    assert tree.thr[0] == pytest.approx(1.5)


def test_min_node_respected():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    tree = fit_tree(make_ts(X, y), TreeParams(mtry=2, min_node=7), stream(4, "t"))
    leaves = tree.route(X)
    counts = np.bincount(leaves, minlength=tree.n_nodes)
    for node in range(tree.n_nodes):
        if tree.feature[node] < 0:
            assert counts[node] >= 7


def test_rejects_incomplete_trainset():
    with pytest.raises(ValueError):
        make_ts([[np.nan]], [1.0])
