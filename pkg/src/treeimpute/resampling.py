"""Per-tree training-set generators for the forest.

Besides the classical bootstrap (with/without replacement) these implement
stratified resampling for categorical responses, parametric resampling
from a fitted multivariate normal, and the smoothed bootstrap that draws
from a Gaussian kernel density estimate with the normal scale bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cart import CLASSIFICATION, REGRESSION, TrainSet
from .rngdist import chol_or_sqrt, empirical_moments, ensure_spd, mvnormal_sample

WITHOUT_REPLACEMENT_FRACTION = 0.632


class ResamplerError(ValueError):
    """Resampler incompatible with the training set's schema."""


class DegenerateBandwidthError(ResamplerError):
    pass


@dataclass(frozen=True)
class SimpleWithReplacement:
    """Classical bootstrap: N uniform draws with replacement (default N = n)."""

    size: int | None = None


@dataclass(frozen=True)
class SimpleWithoutReplacement:
    """N distinct uniform rows; default N = round(0.632 n), at least 2."""

    size: int | None = None


@dataclass(frozen=True)
class Stratified:
    """Per-response-level bootstrap preserving exact level counts."""


@dataclass(frozen=True)
class NormalParametric:
    """n draws from a multivariate normal fitted to the joint table."""


@dataclass(frozen=True)
class KernelSmoothed:
    """Smoothed bootstrap: row pick plus Gaussian noise with the NS bandwidth."""


ResamplerKind = (SimpleWithReplacement | SimpleWithoutReplacement | Stratified
                 | NormalParametric | KernelSmoothed)


def normal_scale_bandwidth(rows: np.ndarray) -> np.ndarray:
    """Normal scale rule bandwidth [4 / (n (d+2))]^(2/(d+4)) * Sigma-hat."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    n, d = rows.shape
    if n < 2 or d < 1:
        raise DegenerateBandwidthError("need >= 2 rows and >= 1 coordinate")
    _, cov = empirical_moments(rows)
    if np.trace(cov) <= 0.0:
        raise DegenerateBandwidthError("all coordinates are constant")
    cov = ensure_spd(cov)
    scale = (4.0 / (n * (d + 2.0))) ** (2.0 / (d + 4.0))
    return scale * cov


def _default_without_replacement_size(n: int) -> int:
    return max(2, int(round(WITHOUT_REPLACEMENT_FRACTION * n)))


def _joint_table(ts: TrainSet) -> np.ndarray:
    return np.column_stack([ts.X, ts.y])


def resample(ts: TrainSet, kind: ResamplerKind, rng: np.random.Generator) -> TrainSet:
    """One tree's training set drawn according to `kind`."""
    n = ts.n
    if isinstance(kind, SimpleWithReplacement):
        size = n if kind.size is None else kind.size
        if not 1 <= size:
            raise ResamplerError("resample size must be >= 1")
        rows = rng.integers(0, n, size=size)
        return ts.with_rows(ts.X[rows], ts.y[rows])

    if isinstance(kind, SimpleWithoutReplacement):
        size = _default_without_replacement_size(n) if kind.size is None else kind.size
        if not 1 <= size <= n:
            raise ResamplerError(f"without-replacement size must be in [1, {n}]")
        rows = rng.choice(n, size=size, replace=False)
        return ts.with_rows(ts.X[rows], ts.y[rows])

    if isinstance(kind, Stratified):
        if ts.task != CLASSIFICATION:
            raise ResamplerError("stratified resampling needs a categorical response")
        codes = ts.y.astype(np.int64)
        picked = []
        for level in range(ts.n_classes):
            stratum = np.flatnonzero(codes == level)
            if stratum.size:
                picked.append(stratum[rng.integers(0, stratum.size, size=stratum.size)])
        rows = np.concatenate(picked)
        return ts.with_rows(ts.X[rows], ts.y[rows])

    if isinstance(kind, NormalParametric):
        if ts.task != REGRESSION or np.any(ts.feat_kinds != 0) or np.any(ts.feat_levels > 0):
            raise ResamplerError("parametric-normal resampling needs an "
                                 "all-continuous table")
        joint = _joint_table(ts)
        mu, cov = empirical_moments(joint)
        draws = mvnormal_sample(rng, mu, cov, n)
        return ts.with_rows(draws[:, :-1], draws[:, -1])

    if isinstance(kind, KernelSmoothed):
        return _kernel_resample(ts, rng)

    raise ResamplerError(f"unknown resampler {kind!r}")


def _kernel_resample(ts: TrainSet, rng: np.random.Generator) -> TrainSet:
    """Row pick plus N(0, H_NS) noise on the continuous coordinates.

    Categorical coordinates (nominal or ordinal covariates, categorical
    response) are copied from the picked row unchanged. The row indices are
    drawn before the noise, so with the noise suppressed the draw coincides
    with the plain bootstrap of size n.
    """
    n = ts.n
    joint = _joint_table(ts)
    cont = [j for j in range(ts.q) if ts.feat_levels[j] == 0 and ts.feat_kinds[j] == 0]
    if ts.task == REGRESSION:
        cont.append(ts.q)
    rows = rng.integers(0, n, size=n)
    sample = joint[rows].copy()
    if cont:
        H = normal_scale_bandwidth(joint[:, cont])
        noise = rng.standard_normal((n, len(cont))) @ chol_or_sqrt(H).T
        sample[:, np.array(cont)] += noise
    return ts.with_rows(sample[:, :-1], sample[:, -1])
