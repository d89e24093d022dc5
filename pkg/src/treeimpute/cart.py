"""Single binary CART tree for mixed-type covariates.

Splits are variance-minimizing for regression and Gini-minimizing for
classification. Continuous and ordinal features split on midpoint
thresholds; nominal features on level subsets (exhaustive search up to 10
levels, mean-response ordering above). All tie-breaks are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .datamodel import CONTINUOUS, Column
from .rngdist import sub_seed

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class TrainSet:
    """Complete covariate block plus a response column.

    X holds continuous values and categorical level codes as float64;
    feat_kinds is 0 for threshold-split features (continuous/ordinal) and
    1 for nominal features; feat_levels gives level counts (0 when
    continuous).
    """

    X: np.ndarray
    feat_kinds: np.ndarray
    feat_levels: np.ndarray
    y: np.ndarray
    task: str
    n_classes: int = 0
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("TrainSet needs at least one row")
        if np.isnan(self.X).any() or np.isnan(self.y).any():
            raise ValueError("TrainSet must be complete (no missing cells)")
        if self.task not in (REGRESSION, CLASSIFICATION):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == CLASSIFICATION and self.n_classes < 2:
            raise ValueError("classification needs n_classes >= 2")
        if self.w is None:
            object.__setattr__(self, "w", np.ones(self.X.shape[0]))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    def with_rows(self, X: np.ndarray, y: np.ndarray) -> "TrainSet":
        return replace(self, X=np.ascontiguousarray(X, dtype=np.float64),
                       y=np.ascontiguousarray(y, dtype=np.float64), w=None)


def trainset_from_columns(cov_schema: list[Column], X: np.ndarray,
                          response: Column, y: np.ndarray) -> TrainSet:
    kinds = np.array([0 if c.kind != "nominal" else 1 for c in cov_schema],
                     dtype=np.int64)
    nlev = np.array([len(c.levels) for c in cov_schema], dtype=np.int64)
    if response.kind == CONTINUOUS:
        return TrainSet(np.ascontiguousarray(X, dtype=np.float64), kinds, nlev,
                        np.ascontiguousarray(y, dtype=np.float64), REGRESSION)
    return TrainSet(np.ascontiguousarray(X, dtype=np.float64), kinds, nlev,
                    np.ascontiguousarray(y, dtype=np.float64), CLASSIFICATION,
                    n_classes=len(response.levels))


@dataclass(frozen=True)
class TreeParams:
    mtry: int
    min_node: int = 5
    max_depth: int = 30

    def __post_init__(self):
        if self.mtry < 1 or self.min_node < 1 or self.max_depth < 1:
            raise ValueError("mtry, min_node and max_depth must be >= 1")


@dataclass(frozen=True)
class Tree:
    """Fitted tree as flat node arrays (see _kernels for layout)."""

    feature: np.ndarray = field(repr=False)
    thr: np.ndarray = field(repr=False)
    smask: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    wl: np.ndarray = field(repr=False)
    wr: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)
    feat_kinds: np.ndarray = field(repr=False)
    feat_levels: np.ndarray = field(repr=False)
    task: str = REGRESSION

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Regression values or class-probability rows for each row of X."""
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        if self.task == REGRESSION:
            return _kernels.predict_values(self.feature, self.thr, self.smask,
                                           self.left, self.right, self.wl, self.wr,
                                           self.value, self.feat_kinds,
                                           self.feat_levels, X)
        return _kernels.predict_probs(self.feature, self.thr, self.smask,
                                      self.left, self.right, self.wl, self.wr,
                                      self.probs, self.feat_kinds,
                                      self.feat_levels, X)

    def predict_class(self, X: np.ndarray) -> np.ndarray:
        """Leaf argmax class codes; probability ties break to the lowest index."""
        return np.argmax(self.predict(X), axis=1)

    def route(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return _kernels.route_batch(self.feature, self.thr, self.smask,
                                    self.left, self.right, self.wl, self.wr,
                                    self.feat_kinds, self.feat_levels, X)


def fit_tree(ts: TrainSet, params: TreeParams, rng: np.random.Generator) -> Tree:
    if np.any(ts.feat_levels > _kernels.MAX_NOMINAL_LEVELS):
        raise ValueError(f"nominal features support at most "
                         f"{_kernels.MAX_NOMINAL_LEVELS} levels")
    K = ts.n_classes if ts.task == CLASSIFICATION else 0
    arrays = _kernels.build_tree(
        np.ascontiguousarray(ts.X, dtype=np.float64),
        ts.feat_kinds, ts.feat_levels,
        np.ascontiguousarray(ts.y, dtype=np.float64),
        np.ascontiguousarray(ts.w, dtype=np.float64),
        K, min(params.mtry, ts.q), params.min_node, params.max_depth,
        sub_seed(rng))
    return Tree(*arrays, feat_kinds=ts.feat_kinds, feat_levels=ts.feat_levels,
                task=ts.task)
