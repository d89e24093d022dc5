"""Column-cycling impute-until-divergence driver.

Columns are visited in ascending missing-rate order; each one is predicted
from the other columns of the current working matrix by a forest or a
boosting model, depending on the column kind. Passes repeat until the
convergence criterion increases for the first time (the previous pass's
matrix is then returned) or a pass cap is hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .boosting import GbmParams, fit_gbm
from .cart import trainset_from_columns
from .datamodel import CONTINUOUS, DataMatrix, FullyMissingColumnError, \
    initial_impute, missing_order
from .forest import ForestParams, fit_forest
from .resampling import KernelSmoothed, NormalParametric, Stratified
from .rngdist import stream, sub_seed

DEFAULT_MAX_ITER = 10


@dataclass(frozen=True)
class RfLearner:
    params: ForestParams = field(default_factory=ForestParams)


@dataclass(frozen=True)
class GbmLearner:
    params: GbmParams = field(default_factory=GbmParams)


Learner = RfLearner | GbmLearner


@dataclass(frozen=True)
class LearnerSpec:
    """Which learner handles continuous and which categorical columns."""

    continuous: Learner = field(default_factory=RfLearner)
    categorical: Learner = field(default_factory=RfLearner)


@dataclass(frozen=True)
class ImputeResult:
    data: DataMatrix
    iterations: int
    delta_cont: tuple[float, ...]
    delta_cat: tuple[float, ...]


METHOD_NAMES = ("missforest", "missboopf", "rf-strat", "rf-norm", "rf-kernel", "gbm")


def method_spec(name: str, n_trees: int | None = None,
                gbm_iter: int | None = None,
                gbm_step: float | None = None) -> LearnerSpec:
    """Named method presets for the CLI and benchmark harness."""
    fp = ForestParams() if n_trees is None else ForestParams(n_trees=n_trees)
    gp = GbmParams()
    if gbm_iter is not None:
        gp = replace(gp, n_iter=gbm_iter)
    if gbm_step is not None:
        gp = replace(gp, step_size=gbm_step)
    if name == "missforest":
        return LearnerSpec(RfLearner(fp), RfLearner(fp))
    if name == "missboopf":
        return LearnerSpec(RfLearner(replace(fp, resampler=KernelSmoothed())),
                           GbmLearner(gp))
    if name == "rf-strat":
        return LearnerSpec(RfLearner(fp),
                           RfLearner(replace(fp, resampler=Stratified())))
    if name == "rf-norm":
        return LearnerSpec(RfLearner(replace(fp, resampler=NormalParametric())),
                           RfLearner(fp))
    if name == "rf-kernel":
        return LearnerSpec(RfLearner(replace(fp, resampler=KernelSmoothed())),
                           RfLearner(replace(fp, resampler=KernelSmoothed())))
    if name == "gbm":
        return LearnerSpec(GbmLearner(gp), GbmLearner(gp))
    raise ValueError(f"unknown method {name!r}")


def delta(prev: np.ndarray, next_: np.ndarray, missing_mask: np.ndarray,
          d: DataMatrix) -> tuple[float, float]:
    """Convergence deltas over the originally-missing cells.

    Continuous: sum of squared changes over sum of squared new values
    (0/0 -> 0). Categorical: fraction of changed cells.
    """
    if prev.shape != next_.shape or prev.shape != missing_mask.shape:
        raise ValueError("shape mismatch between matrices and mask")
    cont = d.continuous_cols()
    cat = d.categorical_cols()
    d_cont = 0.0
    if cont.size:
        m = missing_mask[:, cont]
        diff2 = float(np.sum(((next_[:, cont] - prev[:, cont]) ** 2)[m]))
        denom = float(np.sum((next_[:, cont] ** 2)[m]))
        d_cont = diff2 / denom if denom > 0.0 else 0.0
    d_cat = 0.0
    if cat.size:
        m = missing_mask[:, cat]
        total = int(m.sum())
        if total:
            changed = int(np.sum((next_[:, cat] != prev[:, cat]) & m))
            d_cat = changed / total
    return d_cont, d_cat


def _fit_predict(d: DataMatrix, working: np.ndarray, j: int,
                 obs: np.ndarray, mis: np.ndarray, learner: Learner,
                 fit_seed: int, threads: int) -> np.ndarray:
    cov_schema = [c for k, c in enumerate(d.schema) if k != j]
    rest = np.delete(working, j, axis=1)
    ts = trainset_from_columns(cov_schema, rest[obs], d.schema[j], working[obs, j])
    X_mis = rest[mis]
    if isinstance(learner, RfLearner):
        model = fit_forest(ts, learner.params, fit_seed, threads=threads)
    else:
        model = fit_gbm(ts, learner.params, fit_seed)
    return np.asarray(model.predict(X_mis), dtype=np.float64)


def impute(d: DataMatrix, spec: LearnerSpec,
           max_iter: int = DEFAULT_MAX_ITER, seed: int = 0,
           threads: int = 1) -> ImputeResult:
    """Iterative tree-ensemble imputation of every missing cell."""
    mask_missing = ~d.observed_mask()
    if not mask_missing.any():
        return ImputeResult(d, 0, (), ())
    for j in range(d.p):
        if mask_missing[:, j].all():
            raise FullyMissingColumnError(
                f"column {d.schema[j].name!r} has no observed cell")

    order = missing_order(d)  # frozen across passes
    active = [j for j in order if mask_missing[:, j].any()]
    working = np.array(initial_impute(d).values)

    hist_cont: list[float] = []
    hist_cat: list[float] = []
    best = working.copy()
    for pass_idx in range(1, max_iter + 1):
        prev = working.copy()
        for j in active:
            obs = ~mask_missing[:, j]
            mis = mask_missing[:, j]
            learner = (spec.continuous if d.schema[j].kind == CONTINUOUS
                       else spec.categorical)
            fit_seed = sub_seed(stream(seed, "impute-fit", pass_idx, j))
            working[mis, j] = _fit_predict(d, working, j, obs, mis, learner,
                                           fit_seed, threads)
        d_cont, d_cat = delta(prev, working, mask_missing, d)
        hist_cont.append(d_cont)
        hist_cat.append(d_cat)
        if pass_idx >= 2 and (hist_cont[-1] + hist_cat[-1]
                              > hist_cont[-2] + hist_cat[-2]):
            # criterion increased: the previous pass's matrix is kept
            return ImputeResult(d.with_values(prev), pass_idx,
                                tuple(hist_cont), tuple(hist_cat))
        best = working.copy()
    return ImputeResult(d.with_values(best), len(hist_cont),
                        tuple(hist_cont), tuple(hist_cat))
