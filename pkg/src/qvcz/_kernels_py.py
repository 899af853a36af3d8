"""Pure numpy implementations of the hot kernels (fallback for ``_core``)."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln


def two_mode_pnd(a: float, b: float, c2: float, cutoff: int) -> np.ndarray:
    """Photocount distribution of a zero-mean two-mode complex Gaussian field.

    ``a``, ``b`` are the mean intensities and ``c2`` = |<E1* E2>|^2. Uses the
    positive series p(n1, n2) = D^-1 sum_k w^k C(n1,k) C(n2,k) x1^(n1-k) x2^(n2-k),
    obtained by expanding the generating function 1/det(1 + Gamma (1 - s)).
    """
    n = np.arange(cutoff + 1)
    c = a * b - c2
    D = 1.0 + a + b + c
    x1, x2, w = (a + c) / D, (b + c) / D, c2 / D**2
    lf = gammaln(n + 1.0)
    k = n[:, None, None]
    n1 = n[None, :, None]
    n2 = n[None, None, :]
    valid = (k <= n1) & (k <= n2)
    kk = np.where(valid, k, 0)
    m1 = np.where(valid, n1 - k, 0)
    m2 = np.where(valid, n2 - k, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = (lf[n1] - lf[kk] - lf[m1] + lf[n2] - lf[kk] - lf[m2]
                + _xlogy(kk, w) + _xlogy(m1, x1) + _xlogy(m2, x2))
    terms = np.where(valid, np.exp(logt), 0.0)
    return terms.sum(axis=0) / D


def _xlogy(n, x):
    # n*log(x) with the convention 0*log(0) = 0
    if x > 0:
        return n * np.log(x)
    return np.where(n == 0, 0.0, -np.inf)


def poisson_table(intensity: np.ndarray, cutoff: int) -> np.ndarray:
    """Poisson pmf for every intensity, shape intensity.shape + (cutoff+1,)."""
    I = np.asarray(intensity, dtype=float)[..., None]
    n = np.arange(cutoff + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = n * np.log(I) - I - gammaln(n + 1.0)
    logp = np.where((I == 0) & (n == 0), 0.0, logp)
    return np.exp(logp)


def poisson_mixture_accumulate(I1: np.ndarray, I2: np.ndarray, cutoff: int):
    """Sum over realizations of (mean_b Pois(I1[r, b])) outer (mean_b Pois(I2[r, b])).

    Returns the elementwise sum and the sum of squares, each (cutoff+1, cutoff+1).
    """
    pm1 = poisson_table(I1, cutoff).mean(axis=1)
    pm2 = poisson_table(I2, cutoff).mean(axis=1)
    total = pm1.T @ pm2
    total_sq = (pm1**2).T @ (pm2**2)
    return total, total_sq
