"""Seeded stream derivation and distribution / SPD-matrix primitives.

Every stochastic component of the library draws from a stream derived from
(master seed, purpose label, integer ids). Streams with distinct labels or
ids never overlap, which keeps parallel tree fits and Monte Carlo runs
reproducible regardless of scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


class NotPsdError(ValueError):
    """Matrix is too far from positive semidefinite to factor."""


def _label_entropy(label: str) -> int:
    return int.from_bytes(hashlib.blake2s(label.encode()).digest()[:8], "little")


def stream(seed: int, label: str, *ids: int) -> np.random.Generator:
    """Independent generator for (seed, label, ids); stable across platforms."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, _label_entropy(label)]
    entropy.extend(int(i) & 0xFFFFFFFFFFFFFFFF for i in ids)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sub_seed(rng: np.random.Generator) -> int:
    """32-bit seed for consumers that need a plain integer (numba kernels)."""
    return int(rng.integers(0, 2**32))


# ---------------------------------------------------------------------------
# SPD matrices
# ---------------------------------------------------------------------------

def ensure_spd(m: np.ndarray) -> np.ndarray:
    """Symmetrize and, if slightly indefinite from rounding, jitter the diagonal.

    A single jitter of 1e-10 * trace/d is applied; anything needing more is an
    error rather than a silent repair.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotPsdError("expected a square matrix")
    m = 0.5 * (m + m.T)
    eig = np.linalg.eigvalsh(m)
    tr = max(np.trace(m), 0.0)
    if eig[0] >= -1e-10 * max(eig[-1], 0.0):
        return m
    if eig[0] < -1e-6 * max(tr, 1e-300):
        raise NotPsdError(f"matrix has eigenvalue {eig[0]:.3e}, not PSD")
    d = m.shape[0]
    return m + (1e-10 * tr / d) * np.eye(d)


def chol_or_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition; F @ F == m."""
    m = ensure_spd(m)
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def mvnormal_sample(rng: np.random.Generator, mu: np.ndarray, sigma: np.ndarray,
                    count: int) -> np.ndarray:
    """count i.i.d. draws mu + F z with F the symmetric root of sigma."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if mu.shape[0] != sigma.shape[0]:
        raise ValueError("dimension mismatch between mu and sigma")
    factor = chol_or_sqrt(sigma)
    z = rng.standard_normal((count, mu.shape[0]))
    return mu + z @ factor.T


def dirichlet_sample(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    """One Dirichlet draw via normalized gamma variates."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0.0):
        raise ValueError("Dirichlet concentration parameters must be positive")
    g = rng.gamma(shape=alpha)
    return g / g.sum()


def scalar_samples(rng: np.random.Generator, dist: str, count: int, **params) -> np.ndarray:
    """i.i.d. draws from one of the named scalar distributions.

    dist: chi2(df) | lognormal(mu, sigma) | normal | uniform | bernoulli(q)
    """
    if dist == "chi2":
        df = params["df"]
        if df <= 0:
            raise ValueError("chi2 needs df > 0")
        return rng.chisquare(df, size=count)
    if dist == "lognormal":
        mu, sigma = params.get("mu", 0.0), params.get("sigma", 1.0)
        if sigma <= 0:
            raise ValueError("lognormal needs sigma > 0")
        return rng.lognormal(mean=mu, sigma=sigma, size=count)
    if dist == "normal":
        return rng.standard_normal(count)
    if dist == "uniform":
        return rng.random(count)
    if dist == "bernoulli":
        q = params["q"]
        if not 0.0 <= q <= 1.0:
            raise ValueError("bernoulli needs q in [0, 1]")
        return (rng.random(count) < q).astype(np.float64)
    raise ValueError(f"unknown distribution {dist!r}")


def empirical_moments(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased (n-1) covariance, symmetrized."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError("need at least 2 rows to estimate moments")
    mu = rows.mean(axis=0)
    cov = np.cov(rows, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return mu, 0.5 * (cov + cov.T)
