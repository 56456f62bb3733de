"""Pure-NumPy PG(1, c) sampler plus series-based moment/sampling oracles.

The rejection sampler mirrors the compiled kernel exactly in distribution
(alternating-series accept/reject on the half-line) but consumes the random
stream in vectorized batches, so the two backends produce different draw
sequences from the same seed.
"""

import numpy as np
from scipy.special import log_ndtr

_TRUNC = 0.64


def _mass_texpon(z):
    """P(proposal from the exponential-tail piece) for each half-tilt z >= 0."""
    t = _TRUNC
    fz = np.pi ** 2 / 8.0 + 0.5 * z * z
    b = np.sqrt(1.0 / t) * (t * z - 1.0)
    a = -np.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = np.log(fz) + fz * t
    with np.errstate(over="ignore"):
        qdivp = 4.0 / np.pi * (np.exp(x0 - z + log_ndtr(b)) + np.exp(x0 + z + log_ndtr(a)))
    return 1.0 / (1.0 + qdivp)


def _a_coef(n, x):
    k = (n + 0.5) * np.pi
    out = np.empty_like(x)
    hi = x > _TRUNC
    out[hi] = k * np.exp(-0.5 * k * k * x[hi])
    lo = ~hi
    xl = x[lo]
    out[lo] = np.exp(-1.5 * (np.log(0.5 * np.pi) + np.log(xl)) + np.log(k)
                     - 2.0 * (n + 0.5) ** 2 / xl)
    return out


def _rtigauss(rng, z):
    """Inverse-Gaussian(mu=1/z, lambda=1) truncated to (0, TRUNC], elementwise."""
    t = _TRUNC
    out = np.empty_like(z)

    small = z < 1.0 / t  # mu > t: squeeze proposal
    idx = np.flatnonzero(small)
    pend = np.ones(idx.size, dtype=bool)
    while pend.any():
        k = np.flatnonzero(pend)
        e1 = rng.standard_exponential(k.size)
        e2 = rng.standard_exponential(k.size)
        u = rng.random(k.size)
        x = t / (1.0 + t * e1) ** 2
        acc = (e1 * e1 <= 2.0 * e2 / t) & (u <= np.exp(-0.5 * z[idx[k]] ** 2 * x))
        out[idx[k[acc]]] = x[acc]
        pend[k[acc]] = False

    idx = np.flatnonzero(~small)
    mu = 1.0 / z[idx]
    pend = np.ones(idx.size, dtype=bool)
    while pend.any():
        k = np.flatnonzero(pend)
        muk = mu[k]
        y = rng.standard_normal(k.size) ** 2
        mu_y = muk * y
        x = muk + 0.5 * muk * mu_y - 0.5 * muk * np.sqrt(4.0 * mu_y + mu_y ** 2)
        flip = rng.random(k.size) > muk / (muk + x)
        x = np.where(flip, muk * muk / x, x)
        acc = x <= t
        out[idx[k[acc]]] = x[acc]
        pend[k[acc]] = False
    return out


def _series_accept(rng, x):
    """Alternating-series acceptance decision for each proposal in x."""
    s = _a_coef(0, x)
    y = rng.random(x.size) * s
    accepted = np.zeros(x.size, dtype=bool)
    undecided = np.ones(x.size, dtype=bool)
    n = 0
    while undecided.any():
        n += 1
        k = np.flatnonzero(undecided)
        a_n = _a_coef(n, x[k])
        if n % 2 == 1:
            s[k] -= a_n
            hit = y[k] <= s[k]
            accepted[k[hit]] = True
            undecided[k[hit]] = False
        else:
            s[k] += a_n
            miss = y[k] > s[k]
            undecided[k[miss]] = False
        if not a_n.any():
            # partial sums have converged to working precision
            k = np.flatnonzero(undecided)
            accepted[k] = y[k] <= s[k]
            undecided[k] = False
    return accepted


def pg1_array(psi, rng):
    """Draw PG(1, psi_i) for every element of psi. Returns an array shaped like psi."""
    psi = np.asarray(psi, dtype=np.float64)
    z = 0.5 * np.abs(psi.ravel())
    fz = np.pi ** 2 / 8.0 + 0.5 * z * z
    p_exp = _mass_texpon(z)
    out = np.empty(z.size)
    pend = np.ones(z.size, dtype=bool)
    while pend.any():
        k = np.flatnonzero(pend)
        take_exp = rng.random(k.size) < p_exp[k]
        x = np.empty(k.size)
        ne = np.flatnonzero(take_exp)
        x[ne] = _TRUNC + rng.standard_exponential(ne.size) / fz[k[ne]]
        ni = np.flatnonzero(~take_exp)
        x[ni] = _rtigauss(rng, z[k[ni]])
        acc = _series_accept(rng, x)
        out[k[acc]] = 0.25 * x[acc]
        pend[k[acc]] = False
    return out.reshape(psi.shape)


def pg_mean_series(c, n_terms=10_000):
    """Mean of PG(1, c) via the truncated sum-of-gammas representation.

    Independent of the closed form tanh(c/2)/(2c); used as a test oracle.
    """
    k = np.arange(1, n_terms + 1)
    denom = (k - 0.5) ** 2 + c * c / (4.0 * np.pi ** 2)
    return float(np.sum(1.0 / denom) / (2.0 * np.pi ** 2))


def pg_var_series(c, n_terms=10_000):
    """Variance of PG(1, c) via the series representation (gammas have unit variance)."""
    k = np.arange(1, n_terms + 1)
    denom = (k - 0.5) ** 2 + c * c / (4.0 * np.pi ** 2)
    return float(np.sum(1.0 / denom ** 2) / (4.0 * np.pi ** 4))


def sample_pg_series(rng, c, size=None, n_terms=200, bias_correct=True):
    """Slow validation sampler: truncated sum of Gamma(1, 1) variables.

    Truncation removes a thin tail of mass; with ``bias_correct`` each draw is
    rescaled so the truncated mean matches the exact mean.
    """
    if n_terms < 200:
        raise ValueError("series sampler requires at least 200 terms")
    shape = (1,) if size is None else ((size,) if np.isscalar(size) else tuple(size))
    k = np.arange(1, n_terms + 1)
    denom = (k - 0.5) ** 2 + c * c / (4.0 * np.pi ** 2)
    g = rng.standard_gamma(1.0, size=shape + (n_terms,))
    draws = (g / denom).sum(axis=-1) / (2.0 * np.pi ** 2)
    if bias_correct:
        half = max(abs(0.5 * c), 1e-8)
        exact_mean = np.tanh(half) / (4.0 * half)
        trunc_mean = np.sum(1.0 / denom) / (2.0 * np.pi ** 2)
        draws = draws * (exact_mean / trunc_mean)
    return float(draws[0]) if size is None else draws
