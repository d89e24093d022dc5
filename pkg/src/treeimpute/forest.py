"""Random forest over CART trees with a pluggable resampler.

The model is bitwise-deterministic for a fixed master stream: per-tree
substreams are derived up front, so the fitted forest does not depend on
how many worker threads ran the fits.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cart import CLASSIFICATION, REGRESSION, Tree, TreeParams, TrainSet, fit_tree
from .resampling import ResamplerKind, SimpleWithReplacement, resample
from .rngdist import stream

DEFAULT_TREES = 100


def default_mtry(n_features: int) -> int:
    """ceil(sqrt(p)), used for both regression and classification."""
    return max(1, int(np.ceil(np.sqrt(n_features))))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = DEFAULT_TREES
    mtry: int | None = None  # None -> ceil(sqrt(q))
    min_node: int | None = None  # None -> 5 regression, 1 classification
    max_depth: int = 30
    resampler: ResamplerKind = field(default_factory=SimpleWithReplacement)

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    def tree_params(self, ts: TrainSet) -> TreeParams:
        mtry = self.mtry if self.mtry is not None else default_mtry(ts.q)
        if self.min_node is not None:
            min_node = self.min_node
        else:
            min_node = 5 if ts.task == REGRESSION else 1
        return TreeParams(mtry=mtry, min_node=min_node, max_depth=self.max_depth)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    task: str
    n_classes: int = 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Mean of tree outputs (regression) or majority-vote class codes.

        Vote ties and within-tree probability ties break to the lowest
        level index.
        """
        X = np.atleast_2d(X)
        if self.task == REGRESSION:
            acc = np.zeros(X.shape[0])
            for t in self.trees:
                acc += t.predict(X)
            return acc / len(self.trees)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        for t in self.trees:
            cls = t.predict_class(X)
            votes[np.arange(X.shape[0]), cls] += 1
        return np.argmax(votes, axis=1).astype(np.float64)


def fit_forest(ts: TrainSet, params: ForestParams, seed: int,
               threads: int = 1) -> ForestModel:
    """Fit n_trees trees, each on its own resample with its own substream."""
    tp = params.tree_params(ts)

    def one(b: int) -> Tree:
        rng = stream(seed, "forest-tree", b)
        return fit_tree(resample(ts, params.resampler, rng), tp, rng)

    if threads <= 1:
        trees = tuple(one(b) for b in range(params.n_trees))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = tuple(pool.map(one, range(params.n_trees)))
    return ForestModel(trees, ts.task,
                       ts.n_classes if ts.task == CLASSIFICATION else 0)
