import numpy as np
import pytest
from scipy.special import expit, softmax

from treeimpute.boosting import (
    BERNOULLI, GbmParams, MULTINOMIAL, SQUARED, fit_gbm, loss_for, loss_value,
    pseudo_residuals,
)
from treeimpute.cart import CLASSIFICATION, REGRESSION, TrainSet


def reg_ts(X, y):
    q = X.shape[1]
    return TrainSet(np.asarray(X, float), np.zeros(q, dtype=np.int64),
                    np.zeros(q, dtype=np.int64), np.asarray(y, float), REGRESSION)


def cls_ts(X, y, n_classes):
    q = X.shape[1]
    return TrainSet(np.asarray(X, float), np.zeros(q, dtype=np.int64),
                    np.zeros(q, dtype=np.int64), np.asarray(y, float),
                    CLASSIFICATION, n_classes=n_classes)


def test_loss_selection():
    X = np.arange(6.0)[:, None]
    assert loss_for(reg_ts(X, np.arange(6.0))) == SQUARED
    assert loss_for(cls_ts(X, np.zeros(6), 2)) == BERNOULLI
    assert loss_for(cls_ts(X, np.zeros(6), 3)) == MULTINOMIAL


# ---------------------------------------------------------------------------
# gradient oracle: central finite differences of the loss
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("loss", [SQUARED, BERNOULLI, MULTINOMIAL])
def test_pseudo_residuals_match_finite_differences(loss):
    rng = np.random.default_rng(0)
    n = 12
    if loss == MULTINOMIAL:
        y = rng.integers(0, 3, size=n).astype(float)
        F = rng.normal(size=(n, 3))
    else:
        y = (rng.integers(0, 2, size=n).astype(float) if loss == BERNOULLI
             else rng.normal(size=n))
        F = rng.normal(size=n)
    resid = pseudo_residuals(loss, y, F)
    h = 1e-6
    fd = np.zeros_like(F)
    it = np.nditer(F, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        up, dn = F.copy(), F.copy()
        up[idx] += h
        dn[idx] -= h
        fd[idx] = (loss_value(loss, y, up) - loss_value(loss, y, dn)) / (2 * h)
    # residual = negative gradient
    assert np.max(np.abs(resid + fd)) < 1e-6


def test_loss_values_hand():
    y = np.array([1.0, 0.0])
    F = np.array([0.0, 0.0])
    # log(2) per observation for Bernoulli at F = 0
    assert loss_value(BERNOULLI, y, F) == pytest.approx(2 * np.log(2.0))
    assert loss_value(SQUARED, np.array([3.0]), np.array([1.0])) == 2.0
    F3 = np.zeros((2, 3))
    assert loss_value(MULTINOMIAL, np.array([0.0, 2.0]), F3) == \
        pytest.approx(2 * np.log(3.0))


def test_initial_score_squared():
    X = np.arange(4.0)[:, None]
    y = np.array([1.0, 2.0, 3.0, 6.0])
    model = fit_gbm(reg_ts(X, y), GbmParams(n_iter=0), seed=0)
    assert model.f0[0] == pytest.approx(3.0)
    assert np.allclose(model.predict(X), 3.0)


def test_initial_score_bernoulli_logodds():
    X = np.arange(4.0)[:, None]
    y = np.array([0.0, 1.0, 1.0, 1.0])
    model = fit_gbm(cls_ts(X, y, 2), GbmParams(n_iter=0), seed=0)
    assert model.f0[0] == pytest.approx(np.log(3.0))
    assert np.allclose(model.predict_proba(X)[:, 1], 0.75)


def test_initial_score_multinomial_logfreq():
    X = np.arange(4.0)[:, None]
    y = np.array([0.0, 0.0, 1.0, 2.0])
    model = fit_gbm(cls_ts(X, y, 3), GbmParams(n_iter=0), seed=0)
    assert np.allclose(model.f0, np.log([0.5, 0.25, 0.25]))
    assert np.allclose(model.predict_proba(X), [0.5, 0.25, 0.25])


def test_two_iteration_hand_trace():
    # stumps on a perfectly separable step; verify the additive recursion
    # F_2 = F_0 + nu g_1 + nu g_2 with Newton leaf values sum r / sum h
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    nu = 0.1
    params = GbmParams(n_iter=2, step_size=nu, subsample=1.0, min_node=1,
                       max_depth=1)
    model = fit_gbm(reg_ts(X, y), params, seed=0)
    f = np.full(4, 5.0)  # y mean
    for _ in range(2):
        r = y - f
        # the best stump splits at 1.5; squared loss: Newton value = leaf mean
        left, right = r[:2].mean(), r[2:].mean()
        f = f + nu * np.where(X[:, 0] <= 1.5, left, right)
    assert np.allclose(model.predict(X), f, atol=1e-12)


def test_training_loss_monotone_squared():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 3))
    y = X[:, 0] - 2.0 * X[:, 1] + 0.2 * rng.normal(size=60)
    ts = reg_ts(X, y)
    losses = []
    for n_iter in (0, 10, 40, 120):
        m = fit_gbm(ts, GbmParams(n_iter=n_iter, step_size=0.1, subsample=1.0,
                                  min_node=5), seed=2)
        losses.append(loss_value(SQUARED, y, m.raw_scores(X)))
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_training_loss_monotone_bernoulli():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    ts = cls_ts(X, y, 2)
    losses = []
    for n_iter in (0, 20, 80):
        m = fit_gbm(ts, GbmParams(n_iter=n_iter, step_size=0.2, subsample=1.0,
                                  min_node=5), seed=3)
        losses.append(loss_value(BERNOULLI, y, m.raw_scores(X)))
    assert losses[2] < losses[1] < losses[0]


def test_multinomial_learns_labels():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(90, 2))
    y = np.argmax(np.column_stack([X[:, 0], X[:, 1], -X[:, 0] - X[:, 1]]),
                  axis=1).astype(float)
    ts = cls_ts(X, y, 3)
    m = fit_gbm(ts, GbmParams(n_iter=150, step_size=0.2, subsample=1.0,
                              min_node=5), seed=4)
    assert np.mean(m.predict(X) == y) > 0.9
    probs = m.predict_proba(X)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_bernoulli_tie_goes_to_class_zero():
    X = np.array([[0.0], [1.0]])
    y = np.array([0.0, 1.0])
    model = fit_gbm(cls_ts(X, y, 2), GbmParams(n_iter=0), seed=0)
    # f0 = log-odds of a balanced sample = 0, an exact tie
    assert model.f0[0] == 0.0
    assert np.all(model.predict(X) == 0.0)


def test_subsample_size_and_determinism():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 2))
    y = rng.normal(size=50)
    ts = reg_ts(X, y)
    params = GbmParams(n_iter=30, step_size=0.1)
    a = fit_gbm(ts, params, seed=5)
    b = fit_gbm(ts, params, seed=5)
    assert np.array_equal(a.raw_scores(X), b.raw_scores(X))
    c = fit_gbm(ts, params, seed=6)
    assert not np.array_equal(a.raw_scores(X), c.raw_scores(X))


def test_param_validation():
    with pytest.raises(ValueError):
        GbmParams(step_size=0.0)
    with pytest.raises(ValueError):
        GbmParams(subsample=0.0)
    with pytest.raises(ValueError):
        GbmParams(subsample=1.5)
    with pytest.raises(ValueError):
        GbmParams(n_iter=-1)


def test_proba_matches_sigmoid_softmax():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 2))
    y2 = rng.integers(0, 2, size=30).astype(float)
    m2 = fit_gbm(cls_ts(X, y2, 2), GbmParams(n_iter=10, step_size=0.1), seed=0)
    assert np.allclose(m2.predict_proba(X)[:, 1], expit(m2.raw_scores(X)))
    y3 = rng.integers(0, 3, size=30).astype(float)
    m3 = fit_gbm(cls_ts(X, y3, 3), GbmParams(n_iter=5, step_size=0.1), seed=0)
    assert np.allclose(m3.predict_proba(X), softmax(m3.raw_scores(X), axis=1))
