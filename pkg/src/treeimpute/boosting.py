"""Stochastic gradient tree boosting with squared, Bernoulli and
multinomial losses.

Each iteration fits a small regression tree to the pseudo-residuals
(negative loss gradients) on a without-replacement subsample, replaces the
leaf means by one Newton step per leaf, scales by the learning rate and
adds the tree to the additive model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cart import REGRESSION, Tree, TreeParams, TrainSet, fit_tree
from .rngdist import stream

SQUARED = "squared"
BERNOULLI = "bernoulli"
MULTINOMIAL = "multinomial"

_PROB_EPS = 1e-10
_HESS_EPS = 1e-12

DEFAULT_ITERATIONS = 2000
DEFAULT_STEP_SIZE = 0.001


@dataclass(frozen=True)
class GbmParams:
    n_iter: int = DEFAULT_ITERATIONS
    step_size: float = DEFAULT_STEP_SIZE
    subsample: float = 0.5
    min_node: int = 10
    max_depth: int = 4

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample fraction must be in (0, 1]")
        if self.n_iter < 0:
            raise ValueError("n_iter must be >= 0")


def loss_for(ts: TrainSet) -> str:
    if ts.task == REGRESSION:
        return SQUARED
    return BERNOULLI if ts.n_classes == 2 else MULTINOMIAL


def _sigmoid(f):
    return 1.0 / (1.0 + np.exp(-f))


def _softmax(F):
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def pseudo_residuals(loss: str, y: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Negative gradient of the loss at the current scores.

    Squared: y - F. Bernoulli: y - sigmoid(F). Multinomial: one-hot -
    softmax, one column per class (F then has shape (n, K)).
    """
    if loss == SQUARED:
        return y - F
    if loss == BERNOULLI:
        return y - _sigmoid(F)
    if loss == MULTINOMIAL:
        K = F.shape[1]
        onehot = np.eye(K)[y.astype(np.int64)]
        return onehot - _softmax(F)
    raise ValueError(f"unknown loss {loss!r}")


def loss_value(loss: str, y: np.ndarray, F: np.ndarray) -> float:
    """Total training loss Sum psi(y_i, F_i)."""
    if loss == SQUARED:
        return float(0.5 * np.sum((y - F) ** 2))
    if loss == BERNOULLI:
        # log(1 + e^F) - y F, computed stably
        return float(np.sum(np.logaddexp(0.0, F) - y * F))
    if loss == MULTINOMIAL:
        z = F - F.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1)) + F.max(axis=1)
        picked = F[np.arange(F.shape[0]), y.astype(np.int64)]
        return float(np.sum(lse - picked))
    raise ValueError(f"unknown loss {loss!r}")


@dataclass(frozen=True)
class GbmModel:
    loss: str
    f0: np.ndarray = field(repr=False)  # scalar (as shape-(1,)) or per-class
    trees: tuple = field(repr=False)  # per iteration: Tree or K-tuple of Trees
    n_classes: int = 0

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        """F0 plus the accumulated (already step-scaled) leaf values."""
        X = np.atleast_2d(X)
        m = X.shape[0]
        if self.loss == MULTINOMIAL:
            F = np.tile(self.f0, (m, 1))
            for group in self.trees:
                for k, t in enumerate(group):
                    F[:, k] += t.predict(X)
            return F
        F = np.full(m, self.f0[0])
        for t in self.trees:
            F += t.predict(X)
        return F

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Regression value, or argmax class code for categorical losses."""
        F = self.raw_scores(X)
        if self.loss == SQUARED:
            return F
        if self.loss == BERNOULLI:
            # class 1 iff its score wins; exact ties go to level 0
            return (F > 0.0).astype(np.float64)
        return np.argmax(F, axis=1).astype(np.float64)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        F = self.raw_scores(X)
        if self.loss == BERNOULLI:
            p1 = _sigmoid(F)
            return np.column_stack([1.0 - p1, p1])
        if self.loss == MULTINOMIAL:
            return _softmax(F)
        raise ValueError("predict_proba needs a categorical loss")


def _initial_score(loss: str, y: np.ndarray, K: int) -> np.ndarray:
    n = y.shape[0]
    if loss == SQUARED:
        return np.array([y.mean()])
    if loss == BERNOULLI:
        p1 = np.clip(np.mean(y == 1), _PROB_EPS, 1.0 - _PROB_EPS)
        return np.array([np.log(p1 / (1.0 - p1))])
    freq = np.bincount(y.astype(np.int64), minlength=K) / n
    return np.log(np.clip(freq, _PROB_EPS, None))


def _newton_leaf_values(tree: Tree, X_sub, r_sub, hess_sub, nu) -> None:
    """Overwrite leaf means with step-scaled Newton values Sum r / Sum h."""
    leaves = tree.route(X_sub)
    num = np.bincount(leaves, weights=r_sub, minlength=tree.n_nodes)
    den = np.bincount(leaves, weights=hess_sub, minlength=tree.n_nodes)
    vals = np.where(den > _HESS_EPS, num / np.maximum(den, _HESS_EPS), 0.0)
    tree.value[:] = 0.0
    is_leaf = tree.feature < 0
    tree.value[is_leaf] = nu * vals[is_leaf]


def fit_gbm(ts: TrainSet, params: GbmParams, seed: int) -> GbmModel:
    loss = loss_for(ts)
    n = ts.n
    K = ts.n_classes
    nu = params.step_size
    n_sub = max(1, int(np.ceil(params.subsample * n)))
    tp = TreeParams(mtry=ts.q, min_node=min(params.min_node, n),
                    max_depth=params.max_depth)
    reg_kinds = ts.feat_kinds
    reg_levels = ts.feat_levels

    f0 = _initial_score(loss, ts.y, K)
    groups = []
    if loss == MULTINOMIAL:
        F = np.tile(f0, (n, 1))
    else:
        F = np.full(n, f0[0])

    for b in range(params.n_iter):
        rng = stream(seed, "gbm-iter", b)
        sub = np.sort(rng.choice(n, size=n_sub, replace=False))
        resid = pseudo_residuals(loss, ts.y, F)
        if loss == MULTINOMIAL:
            prob = _softmax(F)
            group = []
            for k in range(K):
                r = resid[:, k]
                sub_ts = TrainSet(ts.X[sub], reg_kinds, reg_levels, r[sub],
                                  REGRESSION)
                tree = fit_tree(sub_ts, tp, rng)
                # Friedman's multinomial Newton step:
                # gamma = (K-1)/K * sum r / sum p(1-p)
                h = prob[:, k] * (1.0 - prob[:, k])
                _newton_leaf_values(tree, ts.X[sub], (K - 1.0) / K * r[sub],
                                    h[sub], nu)
                F[:, k] += tree.predict(ts.X)
                group.append(tree)
            groups.append(tuple(group))
        else:
            r = resid
            sub_ts = TrainSet(ts.X[sub], reg_kinds, reg_levels, r[sub], REGRESSION)
            tree = fit_tree(sub_ts, tp, rng)
            if loss == SQUARED:
                h = np.ones(n)
            else:
                p = _sigmoid(F)
                h = p * (1.0 - p)
            _newton_leaf_values(tree, ts.X[sub], r[sub], h[sub], nu)
            F += tree.predict(ts.X)
            groups.append(tree)

    return GbmModel(loss, f0, tuple(groups), n_classes=K)
