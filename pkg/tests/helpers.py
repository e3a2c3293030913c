"""Shared independent oracles for the test suite: series densities and
quadrature for the exotic distributions, a dip-style multimodality statistic
with Monte Carlo calibration, and batch-means standard errors."""

from __future__ import annotations

import numpy as np
from scipy import integrate

from moeshrink.special import log_bessel_k

_TRUNC = 0.64


def pg_jacobi_density(x: float, n_terms: int = 200) -> float:
    """Density of the basic Jacobi-type variable (PG(1,0) is this over 4),
    from the alternating series with the standard branch switch."""
    if x <= 0:
        return 0.0
    total = 0.0
    for n in range(n_terms):
        d = n + 0.5
        if x <= _TRUNC:
            a = np.pi * d * (2.0 / (np.pi * x)) ** 1.5 * np.exp(-2.0 * d * d / x)
        else:
            a = np.pi * d * np.exp(-0.5 * d * d * np.pi * np.pi * x)
        total += a if n % 2 == 0 else -a
        if a < 1e-18 and n > 2:
            break
    return max(total, 0.0)


def pg_density(y: float, c: float = 0.0) -> float:
    """PG(1, c) density: exponential tilt of PG(1, 0)."""
    base = 4.0 * pg_jacobi_density(4.0 * y)
    return float(np.cosh(c / 2.0) * np.exp(-0.5 * c * c * y) * base)


def pg_moment_quadrature(c: float, power: int) -> float:
    """E[PG(1,c)^power] by numerical integration of the series density."""
    val, _ = integrate.quad(
        lambda y: y**power * pg_density(y, c), 0.0, 10.0, limit=400, points=[_TRUNC / 4.0]
    )
    return val


def gig_logpdf(x, p: float, chi: float, psi: float):
    x = np.asarray(x, dtype=float)
    omega = np.sqrt(chi * psi)
    log_norm = 0.5 * p * (np.log(psi) - np.log(chi)) - np.log(2.0) - log_bessel_k(p, omega)
    return log_norm + (p - 1.0) * np.log(x) - 0.5 * (chi / x + psi * x)


def gig_moment_quadrature(p: float, chi: float, psi: float, power: int) -> float:
    def f(u):  # integrate on the log scale for robustness
        x = np.exp(u)
        return np.exp(gig_logpdf(x, p, chi, psi)) * x ** (power + 1)

    val, _ = integrate.quad(f, -40.0, 40.0, limit=400)
    return val


def grid_inverse_cdf_sample(grid: np.ndarray, log_density: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Deterministic draws from a 1-d grid density via inverse cdf (for KS
    comparisons against exact samplers)."""
    w = np.exp(log_density - log_density.max())
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    return np.interp(u, cdf, grid)


def ks_distance(sample: np.ndarray, grid: np.ndarray, log_density: np.ndarray) -> float:
    """KS distance between an empirical sample and a grid density's cdf."""
    w = np.exp(log_density - log_density.max())
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    xs = np.sort(sample)
    emp = np.arange(1, xs.size + 1) / xs.size
    theo = np.interp(xs, grid, cdf)
    return float(np.max(np.abs(emp - theo)))


def batch_means_se(chain: np.ndarray, n_batches: int = 40) -> float:
    """Standard error of a correlated chain's mean via batch means."""
    n = chain.size
    bs = n // n_batches
    means = chain[: bs * n_batches].reshape(n_batches, bs).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


# ---------------------------------------------------------------------------
# dip-style multimodality statistic
# ---------------------------------------------------------------------------

def _unimodal_envelope_gap(xs: np.ndarray, mode_idx: int) -> float:
    """Sup gap between the empirical cdf and the closest fixed-mode unimodal
    envelope (convex below the mode, concave above)."""
    n = xs.size
    f = np.arange(1, n + 1) / n

    def lower_hull_gap(pts_x, pts_y):
        # greatest convex minorant via lower hull; gap = max(F - hull)
        hull = [0]
        for i in range(1, pts_x.size):
            while len(hull) >= 2:
                a, b = hull[-2], hull[-1]
                cross = (pts_x[b] - pts_x[a]) * (pts_y[i] - pts_y[a]) - (
                    pts_y[b] - pts_y[a]
                ) * (pts_x[i] - pts_x[a])
                if cross < 0:
                    hull.pop()
                else:
                    break
            hull.append(i)
        gap = 0.0
        for j in range(len(hull) - 1):
            a, b = hull[j], hull[j + 1]
            seg = slice(a, b + 1)
            t = (pts_x[seg] - pts_x[a]) / max(pts_x[b] - pts_x[a], 1e-300)
            interp = pts_y[a] + t * (pts_y[b] - pts_y[a])
            gap = max(gap, float(np.max(pts_y[seg] - interp)))
        return gap

    left_x, left_y = xs[: mode_idx + 1], f[: mode_idx + 1]
    right_x, right_y = xs[mode_idx:], f[mode_idx:]
    g1 = lower_hull_gap(left_x, left_y) if left_x.size >= 2 else 0.0
    # concave majorant on the right == convex minorant of the flipped cdf
    g2 = lower_hull_gap(-right_x[::-1], -right_y[::-1]) if right_x.size >= 2 else 0.0
    return max(g1, g2)


def dip_statistic(sample: np.ndarray, n_modes_checked: int = 50) -> float:
    """Distance of the empirical cdf from the closest unimodal envelope,
    minimized over candidate mode positions.  Calibrate p-values with
    :func:`dip_pvalue` (Monte Carlo under the uniform null)."""
    xs = np.sort(np.asarray(sample, dtype=float))
    n = xs.size
    cand = np.unique(np.linspace(0, n - 1, min(n_modes_checked, n)).astype(int))
    return min(_unimodal_envelope_gap(xs, int(i)) for i in cand)


def dip_pvalue(sample: np.ndarray, rng, n_sim: int = 200) -> float:
    """Monte Carlo p-value of the dip statistic against the uniform null."""
    obs = dip_statistic(sample)
    n = len(sample)
    null = np.array([dip_statistic(rng.random(n)) for _ in range(n_sim)])
    return float((null >= obs).mean())
