"""Synthetic benchmark data generators.

D1/D2: 7 nominal + 8 ordinal columns with 4 levels each, produced by
thresholding an equicorrelated (0.4) multivariate normal at cut points
drawn from a Dirichlet prior per column. D3-D7: 15 continuous columns
built as mu + Sigma^(1/2) eps with normal, chi-square or log-normal
innovations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .datamodel import CONTINUOUS, Column, DataMatrix, NOMINAL, ORDINAL
from .rngdist import chol_or_sqrt, dirichlet_sample, mvnormal_sample, stream

DESIGNS = ("D1", "D2", "D3", "D4", "D5", "D6", "D7")

DEFAULT_N = 250
N_VARS = 15
N_NOMINAL = 7
N_LEVELS = 4
LATENT_CORRELATION = 0.4

DIRICHLET_ALPHA = {
    "D1": np.array([100.0, 100.0, 100.0, 100.0]),
    "D2": np.array([100.0, 200.0, 500.0, 500.0]),
}

NOMINAL_LEVELS = ("A", "B", "C", "D")
ORDINAL_LEVELS = ("1", "2", "3", "4")


@dataclass(frozen=True)
class DesignSpec:
    design: str
    n: int = DEFAULT_N
    seed: int = 0
    rho07: bool = False  # D3 only: off-diagonal 6.3 with diagonal 9 (corr 0.7)

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def categorical_schema() -> tuple[Column, ...]:
    cols = [Column(f"x{j + 1}", NOMINAL, NOMINAL_LEVELS) for j in range(N_NOMINAL)]
    cols += [Column(f"x{j + 1}", ORDINAL, ORDINAL_LEVELS)
             for j in range(N_NOMINAL, N_VARS)]
    return tuple(cols)


def continuous_schema() -> tuple[Column, ...]:
    return tuple(Column(f"x{j + 1}", CONTINUOUS) for j in range(N_VARS))


def latent_draws(spec: DesignSpec) -> tuple[np.ndarray, np.ndarray]:
    """(latent normal rows, per-column level probabilities) for D1/D2."""
    rng = stream(spec.seed, "synth-" + spec.design)
    alpha = DIRICHLET_ALPHA[spec.design]
    probs = np.stack([dirichlet_sample(rng, alpha) for _ in range(N_VARS)])
    corr = np.full((N_VARS, N_VARS), LATENT_CORRELATION)
    np.fill_diagonal(corr, 1.0)
    z = mvnormal_sample(rng, np.zeros(N_VARS), corr, spec.n)
    return z, probs


def gen_categorical(spec: DesignSpec) -> DataMatrix:
    if spec.design not in ("D1", "D2"):
        raise ValueError("gen_categorical handles designs D1 and D2")
    z, probs = latent_draws(spec)
    values = np.empty_like(z)
    for j in range(N_VARS):
        cuts = norm.ppf(np.cumsum(probs[j])[:-1])
        values[:, j] = np.searchsorted(cuts, z[:, j], side="left")
    return DataMatrix(categorical_schema(), values)


def d3_covariance(rho07: bool = False) -> np.ndarray:
    if rho07:
        sigma = np.full((N_VARS, N_VARS), 6.3)
        np.fill_diagonal(sigma, 9.0)
        return sigma
    return 9.0 * np.eye(N_VARS) + 6.3 * np.ones((N_VARS, N_VARS))


def scaled_covariance() -> np.ndarray:
    """sigma_kk = k, sigma_kl = 0.7 sqrt(k l) for the D4-D7 designs."""
    k = np.arange(1, N_VARS + 1, dtype=np.float64)
    sigma = 0.7 * np.sqrt(np.outer(k, k))
    np.fill_diagonal(sigma, k)
    return sigma


def gen_continuous(spec: DesignSpec) -> DataMatrix:
    if spec.design not in ("D3", "D4", "D5", "D6", "D7"):
        raise ValueError("gen_continuous handles designs D3 through D7")
    rng = stream(spec.seed, "synth-" + spec.design)
    mu = np.arange(2.0, 2.0 + N_VARS)
    if spec.design == "D3":
        values = mvnormal_sample(rng, mu, d3_covariance(spec.rho07), spec.n)
    else:
        factor = chol_or_sqrt(scaled_covariance())
        if spec.design == "D4":
            eps = rng.chisquare(3.0, size=(spec.n, N_VARS))
        elif spec.design == "D5":
            eps = rng.chisquare(30.0, size=(spec.n, N_VARS))
        elif spec.design == "D6":
            eps = rng.lognormal(mean=0.0, sigma=1.0, size=(spec.n, N_VARS))
        else:
            eps = rng.lognormal(mean=0.0, sigma=2.0, size=(spec.n, N_VARS))
        # innovations enter raw, so the realized mean is shifted by E[eps]
        values = mu + eps @ factor.T
    return DataMatrix(continuous_schema(), values)


def generate(spec: DesignSpec) -> DataMatrix:
    if spec.design in ("D1", "D2"):
        return gen_categorical(spec)
    return gen_continuous(spec)
