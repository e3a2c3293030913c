"""Special functions shared across the sampler and the bridge estimator:
log-sum-exp and the modified Bessel function of the second kind."""

from __future__ import annotations

import numpy as np
from scipy import special as sps


def logsumexp(values, axis=None):
    """max(x) + log(sum(exp(x - max(x)))), safe for large magnitudes.

    All -inf inputs yield -inf.  Empty input is an error.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("logsumexp of empty input")
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.squeeze(m, axis=axis) if axis is not None else m.reshape(())
    with np.errstate(divide="ignore"):
        res = out + np.log(np.sum(np.exp(x - m), axis=axis))
    return float(res) if np.ndim(res) == 0 else res


def bessel_k(nu: float, x) -> np.ndarray | float:
    """K_nu(x), the modified Bessel function of the second kind.

    Symmetric in nu (K_{-nu} = K_nu); requires x > 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    out = sps.kv(nu, x)
    return float(out) if out.ndim == 0 else out


def log_bessel_k(nu: float, x) -> np.ndarray | float:
    """log K_nu(x), computed via the exponentially scaled kve to stay
    finite where K itself underflows (large x)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("log_bessel_k requires x > 0")
    out = np.log(sps.kve(nu, x)) - x
    return float(out) if out.ndim == 0 else out
