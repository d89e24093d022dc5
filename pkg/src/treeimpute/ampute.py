"""Artificial missingness insertion: MCAR, chained-logistic MAR and
quantile-censoring MNAR, plus the scalar logistic fitter MAR needs.

All mechanisms operate on a complete matrix and return the amputed copy
together with the observed/missing mask that was applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .datamodel import DataMatrix
from .rngdist import stream

MCAR_EXACT = "mcar_exact"
MCAR_BERNOULLI = "mcar_bernoulli"
MAR = "mar"
MNAR = "mnar"

MECHANISMS = (MCAR_EXACT, MCAR_BERNOULLI, MAR, MNAR)


class DegenerateRateError(ValueError):
    """floor(r * n) == 0: the mechanism cannot place any cell."""


@dataclass(frozen=True)
class AmputeConfig:
    mechanism: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if not 0.0 < self.rate < 1.0:
            raise ValueError("rate must lie strictly between 0 and 1")


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    slope: float
    separation: bool = False

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return expit(self.intercept + self.slope * np.asarray(x))


def logistic_fit(x: np.ndarray, y: np.ndarray, max_newton: int = 25) -> LogisticModel:
    """Scalar-covariate logistic regression by IRLS.

    One-class labels or (near-)separation return the capped-iteration model
    flagged rather than failing: the MAR mechanism only consumes the
    ordering of the fitted probabilities, which stays well-defined.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < 2 or x.shape != y.shape:
        raise ValueError("need >= 2 paired observations")
    beta = np.zeros(2)
    X = np.column_stack([np.ones_like(x), x])
    ll_old = -np.inf
    separation = False
    for _ in range(max_newton):
        eta = X @ beta
        p = expit(eta)
        ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        if abs(ll - ll_old) < 1e-8:
            return LogisticModel(beta[0], beta[1], False)
        ll_old = ll
        w = p * (1.0 - p)
        if np.max(w) < 1e-10 or abs(beta[1]) > 1e3:
            separation = True
            break
        H = X.T @ (X * w[:, None])
        g = X.T @ (y - p)
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(2), g)
        except np.linalg.LinAlgError:
            separation = True
            break
        beta = beta + step
    return LogisticModel(beta[0], beta[1], separation)


def ampute(d: DataMatrix, cfg: AmputeConfig) -> tuple[DataMatrix, np.ndarray]:
    """Insert missing values; returns (amputed matrix, missing mask)."""
    if np.isnan(d.values).any():
        raise ValueError("ampute expects a complete matrix")
    n, p = d.n, d.p
    r = cfg.rate
    rng = stream(cfg.seed, "ampute-" + cfg.mechanism)

    if cfg.mechanism == MCAR_EXACT:
        total = int(np.ceil(r * n * p))
        flat = rng.choice(n * p, size=total, replace=False)
        mask = np.zeros(n * p, dtype=bool)
        mask[flat] = True
        mask = mask.reshape(n, p)
    elif cfg.mechanism == MCAR_BERNOULLI:
        mask = rng.random((n, p)) < r
    elif cfg.mechanism == MAR:
        mask = _mar_mask(d, r, rng)
    else:
        mask = _mnar_mask(d, r, rng)

    v = np.array(d.values)
    v[mask] = np.nan
    return d.with_values(v), mask


def mar_chain(d: DataMatrix, cfg: AmputeConfig) -> np.ndarray:
    """Column visit order of the MAR chain for cfg.seed (start column first)."""
    rng = stream(cfg.seed, "ampute-" + MAR)
    start = int(rng.integers(0, d.p))
    others = np.array([j for j in range(d.p) if j != start])
    return np.concatenate([[start], rng.permutation(others)]) if others.size \
        else np.array([start])


def _mar_mask(d: DataMatrix, r: float, rng: np.random.Generator) -> np.ndarray:
    n, p = d.n, d.p
    k = int(np.floor(r * n))
    if k == 0:
        raise DegenerateRateError(f"floor(r*n) = 0 for r={r}, n={n}")
    start = int(rng.integers(0, p))
    others = np.array([j for j in range(p) if j != start])
    chain = [start] + (list(rng.permutation(others)) if others.size else [])
    mask = np.zeros((n, p), dtype=bool)
    mask[:, start] = rng.random(n) < r
    for pred, succ in zip(chain[:-1], chain[1:]):
        obs_rows = np.flatnonzero(~mask[:, pred])
        labels = (rng.random(obs_rows.size) >= r).astype(np.float64)  # R~ ~ B(1-r)
        model = logistic_fit(d.values[obs_rows, pred], labels)
        phat = model.predict_proba(d.values[obs_rows, pred])
        # k smallest fitted probabilities go missing; ties break by row index
        chosen = obs_rows[np.lexsort((obs_rows, phat))[:k]]
        mask[chosen, succ] = True
    return mask


def _mnar_mask(d: DataMatrix, r: float, rng: np.random.Generator) -> np.ndarray:
    n, p = d.n, d.p
    k = int(np.floor(r * n))
    if k == 0:
        raise DegenerateRateError(f"floor(r*n) = 0 for r={r}, n={n}")
    mask = np.zeros((n, p), dtype=bool)
    lo_rank = max(int(np.ceil(r * n)) - 1, 0)            # r-th quantile position
    hi_rank = min(int(np.ceil((1.0 - r) * n)) - 1, n - 1)  # (1-r)-th
    for j in range(p):
        x = d.values[:, j]
        order = np.lexsort((np.arange(n), x))  # stable in row index
        xs = x[order]
        i = int(rng.integers(0, n))
        if xs[i] < xs[lo_rank]:
            direction = 1
        elif xs[i] > xs[hi_rank]:
            direction = -1
        else:
            direction = 1 if rng.random() < 0.5 else -1
        ranks = i + direction * np.arange(k)
        # ties in categorical columns can push the block out of range; shift it back
        shift = 0
        if ranks.max() > n - 1:
            shift = n - 1 - ranks.max()
        elif ranks.min() < 0:
            shift = -ranks.min()
        mask[order[ranks + shift], j] = True
    return mask
