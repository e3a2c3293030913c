"""Generalized Inverse Gaussian random variates.

Canonical parameterization used everywhere in this package:

    f(x | p, chi, psi) ~ x^(p-1) exp(-(chi / x + psi * x) / 2),  x > 0.

Sampling uses the standard three-regime scheme: ratio-of-uniforms with mode
shift for large parameters, plain ratio-of-uniforms for the middle range, and
a three-piece hat rejection for the quasi-concave small-omega range.  The
boundary cases chi = 0 and psi = 0 reduce to Gamma and Inverse-Gamma draws.
"""

from __future__ import annotations

import numpy as np

from .rng import as_generator
from .special import log_bessel_k


def _check_params(p: float, chi: float, psi: float) -> None:
    if not (np.isfinite(p) and np.isfinite(chi) and np.isfinite(psi)):
        raise ValueError("GIG parameters must be finite")
    if chi < 0 or psi < 0:
        raise ValueError("GIG requires chi >= 0 and psi >= 0")
    if chi == 0 and psi == 0:
        raise ValueError("GIG requires chi > 0 or psi > 0")
    if p <= 0 and chi == 0:
        raise ValueError("GIG with p <= 0 requires chi > 0")
    if p >= 0 and psi == 0:
        raise ValueError("GIG with p >= 0 requires psi > 0")


def _gig_mode(lam: float, omega: float) -> float:
    if lam >= 1.0:
        return (np.sqrt((lam - 1.0) ** 2 + omega * omega) + (lam - 1.0)) / omega
    return omega / (np.sqrt((1.0 - lam) ** 2 + omega * omega) + (1.0 - lam))


def _rou_noshift(lam: float, omega: float, gen: np.random.Generator) -> float:
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    # maximum of x * sqrt(f(x)): positive root of omega/2 y^2 - (lam+1) y - omega/2
    ym = ((lam + 1.0) + np.sqrt((lam + 1.0) ** 2 + omega * omega)) / omega
    um = np.exp(0.5 * (lam + 1.0) * np.log(ym) - s * (ym + 1.0 / ym) - nc)
    while True:
        u = um * gen.random()
        v = gen.random()
        x = u / v
        if np.log(v) <= t * np.log(x) - s * (x + 1.0 / x) - nc:
            return x


def _rou_shift(lam: float, omega: float, gen: np.random.Generator) -> float:
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    # extrema of (x - xm) * sqrt(f(x)): roots of a cubic, via Cardano
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    pp = b - a * a / 3.0
    qq = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    fi = np.arccos(-qq / (2.0 * np.sqrt(-(pp**3) / 27.0)))
    fak = 2.0 * np.sqrt(-pp / 3.0)
    y1 = fak * np.cos(fi / 3.0) - a / 3.0
    y2 = fak * np.cos(fi / 3.0 + 4.0 * np.pi / 3.0) - a / 3.0
    uplus = (y1 - xm) * np.exp(t * np.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * np.exp(t * np.log(y2) - s * (y2 + 1.0 / y2) - nc)
    while True:
        u = uminus + gen.random() * (uplus - uminus)
        v = gen.random()
        x = u / v + xm
        if x > 0.0 and np.log(v) <= t * np.log(x) - s * (x + 1.0 / x) - nc:
            return x


def _hat_three_piece(lam: float, omega: float, gen: np.random.Generator) -> float:
    """Rejection with a constant/power/exponential hat; 0 <= lam < 1, small omega."""
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = np.exp((lam - 1.0) * np.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        k2 = x0 ** (lam - 1.0)
        a2 = k2 * 2.0 * np.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = np.exp(-omega)
        a1 = (
            k1 * np.log(2.0 / (omega * omega))
            if lam == 0.0
            else k1 / lam * ((2.0 / omega) ** lam - x0**lam)
        )
        k2 = (2.0 / omega) ** (lam - 1.0)
        a2 = k2 * 2.0 * np.exp(-1.0) / omega
    atot = a0 + a1 + a2
    while True:
        v = atot * gen.random()
        if v <= a0:
            x = x0 * v / a0
            hx = k0
        elif v <= a0 + a1:
            v -= a0
            if lam == 0.0:
                x = omega * np.exp(np.exp(omega) * v)
            else:
                x = (x0**lam + lam / k1 * v) ** (1.0 / lam)
            hx = k1 * x ** (lam - 1.0)
        else:
            v -= a0 + a1
            a = max(x0, 2.0 / omega)
            x = -2.0 / omega * np.log(np.exp(-omega / 2.0 * a) - omega / (2.0 * k2) * v)
            hx = k2 * np.exp(-omega / 2.0 * x)
        u = gen.random() * hx
        if np.log(u) <= (lam - 1.0) * np.log(x) - 0.5 * omega * (x + 1.0 / x):
            return x


def sample_gig(p: float, chi: float, psi: float, rng) -> float:
    """One draw from GIG(p, chi, psi) under the canonical density above."""
    _check_params(p, chi, psi)
    gen = as_generator(rng)
    if chi == 0.0:
        # reduces to Gamma(shape p, rate psi/2)
        return float(gen.gamma(p, 2.0 / psi))
    if psi == 0.0:
        # reduces to Inverse-Gamma(shape -p, rate chi/2)
        return float(chi / (2.0 * gen.gamma(-p)))
    lam = abs(p)
    omega = np.sqrt(chi * psi)
    alpha = np.sqrt(chi / psi)
    if lam > 2.0 or omega > 3.0:
        x = _rou_shift(lam, omega, gen)
    elif lam >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        x = _rou_noshift(lam, omega, gen)
    else:
        x = _hat_three_piece(lam, omega, gen)
    return float(alpha / x) if p < 0 else float(alpha * x)


def sample_gig_many(p: float, chi, psi, rng) -> np.ndarray:
    """Broadcast sample_gig over arrays of chi/psi (shared index p)."""
    gen = as_generator(rng)
    chi_a, psi_a = np.broadcast_arrays(np.asarray(chi, float), np.asarray(psi, float))
    out = np.empty(chi_a.shape)
    flat = out.ravel()
    for i, (c, s) in enumerate(zip(chi_a.ravel(), psi_a.ravel())):
        flat[i] = sample_gig(p, float(c), float(s), gen)
    return out


def gig_mean(p: float, chi: float, psi: float) -> float:
    """E[X] = sqrt(chi/psi) K_{p+1}(sqrt(chi psi)) / K_p(sqrt(chi psi))."""
    _check_params(p, chi, psi)
    if chi == 0.0:
        return 2.0 * p / psi
    if psi == 0.0:
        if p >= -1.0:
            return np.inf
        return chi / (-2.0 * (p + 1.0))
    omega = np.sqrt(chi * psi)
    return float(np.sqrt(chi / psi) * np.exp(log_bessel_k(p + 1.0, omega) - log_bessel_k(p, omega)))
