"""Imputation accuracy measures and the Brunner-Munzel rank test.

NRMSE and PFC are pooled over all originally-missing cells of the
continuous resp. categorical columns, matching the ratio-of-double-sums
definitions. The Brunner-Munzel test uses the t approximation with
Satterthwaite degrees of freedom, which is appropriate at Monte Carlo
sample sizes around 100.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata, t as t_dist

from .datamodel import DataMatrix


class UndefinedMetricError(ValueError):
    pass


class DegenerateTestError(ValueError):
    """Zero variance estimate; carries the still-valid relative effect."""

    def __init__(self, msg: str, p_hat: float):
        super().__init__(msg)
        self.p_hat = p_hat


def _check_triple(truth: DataMatrix, imputed: DataMatrix, mask: np.ndarray) -> None:
    if truth.schema != imputed.schema or truth.values.shape != imputed.values.shape:
        raise ValueError("truth and imputed matrices must share shape and schema")
    if mask.shape != truth.values.shape:
        raise ValueError("mask shape mismatch")
    if np.isnan(imputed.values).any():
        raise ValueError("imputed matrix must be complete")


def nrmse(truth: DataMatrix, imputed: DataMatrix, mask: np.ndarray) -> float:
    """Normalized RMSE over originally-missing continuous cells.

    The denominator centers each column's true missing values at their own
    mean, so oracle mean-imputation scores exactly 1.
    """
    _check_triple(truth, imputed, mask)
    num = 0.0
    den = 0.0
    count = 0
    for j in truth.continuous_cols():
        m = mask[:, j]
        if not m.any():
            continue
        yt = truth.values[m, j]
        yi = imputed.values[m, j]
        num += float(np.sum((yt - yi) ** 2))
        den += float(np.sum((yt - yt.mean()) ** 2))
        count += int(m.sum())
    if count == 0:
        raise UndefinedMetricError("no missing continuous cell")
    if den <= 0.0:
        raise UndefinedMetricError("zero dispersion of the true missing values")
    return float(np.sqrt(num / den))


def pfc(truth: DataMatrix, imputed: DataMatrix, mask: np.ndarray) -> float:
    """Proportion of falsely classified originally-missing categorical cells."""
    _check_triple(truth, imputed, mask)
    wrong = 0
    total = 0
    for j in truth.categorical_cols():
        m = mask[:, j]
        total += int(m.sum())
        wrong += int(np.sum(truth.values[m, j] != imputed.values[m, j]))
    if total == 0:
        raise UndefinedMetricError("no missing categorical cell")
    return wrong / total


@dataclass(frozen=True)
class BmResult:
    statistic: float
    p_value: float
    p_hat: float
    df: float


def relative_effect(a: np.ndarray, b: np.ndarray) -> float:
    """p-hat = P(A < B) + 0.5 P(A = B) via midranks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ranks = rankdata(np.concatenate([a, b]))
    rb = ranks[a.size:].mean()
    return float((rb - (b.size + 1) / 2.0) / a.size)


def brunner_munzel(a: np.ndarray, b: np.ndarray,
                   alternative: str = "greater") -> BmResult:
    """One-sided Brunner-Munzel test on the relative effect p-hat.

    alternative="greater" tests p-hat > 0.5 (B tends larger than A);
    "less" the reverse. Complete separation or all-ties make the variance
    estimate zero and raise DegenerateTestError with p-hat attached.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError("both samples need at least 2 values")
    if alternative not in ("greater", "less"):
        raise ValueError("alternative must be 'greater' or 'less'")
    ranks = rankdata(np.concatenate([a, b]))
    ra, rb = ranks[:na], ranks[na:]
    ra_in = rankdata(a)
    rb_in = rankdata(b)
    p_hat = float((rb.mean() - (nb + 1) / 2.0) / na)
    sa2 = np.sum((ra - ra_in - ra.mean() + (na + 1) / 2.0) ** 2) / (na - 1)
    sb2 = np.sum((rb - rb_in - rb.mean() + (nb + 1) / 2.0) ** 2) / (nb - 1)
    var_term = na * sa2 + nb * sb2
    if var_term <= 0.0:
        raise DegenerateTestError("zero Brunner-Munzel variance estimate", p_hat)
    n = na + nb
    statistic = float(na * nb * (rb.mean() - ra.mean()) / (n * np.sqrt(var_term)))
    df = float(var_term ** 2 / ((na * sa2) ** 2 / (na - 1) + (nb * sb2) ** 2 / (nb - 1)))
    if alternative == "greater":
        p = float(t_dist.sf(statistic, df))
    else:
        p = float(t_dist.cdf(statistic, df))
    return BmResult(statistic, p, p_hat, df)


def star_code(p_value: float) -> str:
    """Significance stars: * < 0.1, ** < 0.05, *** < 0.01."""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""
