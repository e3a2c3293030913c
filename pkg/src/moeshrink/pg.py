"""Exact Polya-Gamma random variates.

Implements the alternating-series rejection sampler for PG(1, c) (Devroye's
method as used for Bayesian logistic regression), plus the integer-shape
reduction PG(b, c) = sum of b PG(1, c) draws.  No finite-sum-of-gammas
approximation is involved: draws are exact up to floating point.

The density of PG(b, c) is an exponential tilt of PG(b, 0),
f(x | b, c) = cosh^b(c/2) exp(-c^2 x / 2) f(x | b, 0), so the sampler only
depends on |c|.
"""

from __future__ import annotations

import numpy as np
from scipy import special as sps

from .rng import as_generator

# Truncation point splitting the inverse-Gaussian and exponential proposal
# regions; 0.64 keeps both acceptance rates near one.
_TRUNC = 0.64
_PI2_8 = np.pi * np.pi / 8.0


def _log_norm_cdf(x):
    return sps.log_ndtr(x)


def _mass_texpon(z):
    """Probability of proposing from the (shifted) exponential branch."""
    fz = _PI2_8 + 0.5 * z * z
    b = (_TRUNC * z - 1.0) / np.sqrt(_TRUNC)
    a = -(_TRUNC * z + 1.0) / np.sqrt(_TRUNC)
    x0 = np.log(fz) + fz * _TRUNC
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    log_qdivp = np.log(4.0 / np.pi) + np.logaddexp(xb, xa)
    return sps.expit(-log_qdivp)


def _a_coef(n, x):
    """n-th coefficient of the alternating series for the Jacobi density,
    with the branch switch at the truncation point."""
    d = n + 0.5
    small = x <= _TRUNC
    out = np.empty_like(x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        xs = x[small]
        out[small] = (
            np.pi * d * np.power(2.0 / (np.pi * xs), 1.5) * np.exp(-2.0 * d * d / xs)
        )
        xl = x[~small]
        out[~small] = np.pi * d * np.exp(-0.5 * d * d * np.pi * np.pi * xl)
    return np.nan_to_num(out, nan=0.0, posinf=0.0)


def _rtigauss(z, rng):
    """Inverse-Gaussian(mu=1/z, lambda=1) draws truncated to (0, TRUNC]."""
    z = np.asarray(z, dtype=float)
    x = np.empty_like(z)

    # mu > TRUNC (small z): rejection from a scaled inverse-chi^2 proposal.
    big_mu = z < 1.0 / _TRUNC
    idx = np.flatnonzero(big_mu)
    while idx.size:
        n = idx.size
        e1 = rng.standard_exponential(n)
        e2 = rng.standard_exponential(n)
        ok = e1 * e1 <= 2.0 * e2 / _TRUNC
        cand = _TRUNC / np.square(1.0 + _TRUNC * e1)
        alpha = np.exp(-0.5 * np.square(z[idx]) * cand)
        acc = ok & (rng.random(n) < alpha)
        x[idx[acc]] = cand[acc]
        idx = idx[~acc]

    # mu <= TRUNC: draw IG(mu, 1) by the root transformation, keep if <= TRUNC.
    idx = np.flatnonzero(~big_mu)
    mu = np.empty_like(z)
    mu[~big_mu] = 1.0 / z[~big_mu]
    while idx.size:
        n = idx.size
        m = mu[idx]
        y = np.square(rng.standard_normal(n))
        my = m * y
        # smaller root of the IG transformation, written cancellation-free
        cand = 2.0 * m / (2.0 + my + np.sqrt(my * (4.0 + my)))
        flip = rng.random(n) > m / (m + cand)
        cand[flip] = np.square(m[flip]) / cand[flip]
        acc = cand <= _TRUNC
        x[idx[acc]] = cand[acc]
        idx = idx[~acc]

    return x


def _series_accept(x, v):
    """Alternating-series acceptance test: v*a_0(x) against the partial sums."""
    s = _a_coef(0, x)
    y = v * s
    accept = np.zeros(x.shape, dtype=bool)
    undecided = np.ones(x.shape, dtype=bool)
    n = 0
    while undecided.any():
        n += 1
        idx = np.flatnonzero(undecided)
        term = _a_coef(n, x[idx])
        if n % 2 == 1:
            s[idx] -= term
            hit = y[idx] <= s[idx]
            accept[idx[hit]] = True
            undecided[idx[hit]] = False
        else:
            s[idx] += term
            miss = y[idx] > s[idx]
            undecided[idx[miss]] = False
        if n > 10000:  # unreachable; the series decides within a few terms
            raise RuntimeError("Polya-Gamma series test failed to terminate")
    return accept


def sample_pg1(c, rng) -> np.ndarray:
    """Array of exact PG(1, c) draws, one per entry of c."""
    gen = as_generator(rng)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if not np.all(np.isfinite(c)):
        raise ValueError("PG tilt c must be finite")
    z = 0.5 * np.abs(c)
    out = np.empty_like(z)
    todo = np.arange(z.size)
    zf = z.ravel()
    while todo.size:
        zz = zf[todo]
        n = todo.size
        x = np.empty(n)
        use_exp = gen.random(n) < _mass_texpon(zz)
        if use_exp.any():
            fz = _PI2_8 + 0.5 * np.square(zz[use_exp])
            x[use_exp] = _TRUNC + gen.standard_exponential(int(use_exp.sum())) / fz
        if (~use_exp).any():
            x[~use_exp] = _rtigauss(zz[~use_exp], gen)
        acc = _series_accept(x, gen.random(n))
        out.ravel()[todo[acc]] = 0.25 * x[acc]
        todo = todo[~acc]
    return out.reshape(c.shape)


def sample_pg(b, c, rng) -> float:
    """One exact draw from PG(b, c) for positive integer shape b.

    E[PG(b, c)] = (b / (2c)) tanh(c / 2), with limit b/4 as c -> 0.
    """
    if not np.isfinite(b) or b <= 0:
        raise ValueError(f"PG shape b must be positive, got {b}")
    if float(b) != int(b):
        raise NotImplementedError("PG sampling implemented for integer shapes only")
    if not np.isfinite(c):
        raise ValueError("PG tilt c must be finite")
    gen = as_generator(rng)
    draws = sample_pg1(np.full(int(b), float(c)), gen)
    return float(draws.sum())


def pg_mean(b: float, c: float) -> float:
    """Analytic mean of PG(b, c)."""
    if abs(c) < 1e-8:
        return b / 4.0
    return b / (2.0 * c) * np.tanh(c / 2.0)


def pg_var(b: float, c: float) -> float:
    """Analytic variance of PG(b, c)."""
    if abs(c) < 1e-4:
        return b / 24.0
    t = np.tanh(c / 2.0)
    return b / (4.0 * c**3) * (np.sinh(c) - c) * (1.0 - t * t)
