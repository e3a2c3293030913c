"""Model definition: the covariate-dependent gating network, the gating-prior
families (normal-gamma shrinkage, spike-and-slab, flat), the component
families (Bernoulli product, multivariate Gaussian), and every log-density
used by the sampler and the marginal-likelihood estimator.

Normal-gamma convention used throughout: ``tau2[k, p]`` is the *effective*
prior variance of the gating coefficient beta[k, p], with hierarchy

    beta ~ N(0, tau2),   tau2 ~ Gamma(theta, rate theta * lam_k / 2),
    lam_k ~ Gamma(c0, rate c1),

so E[tau2 | lam_k] = 2 / lam_k.  Marginalizing tau2 gives the closed-form
coefficient prior of :func:`log_prior_beta_marginal`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, multigammaln

from .special import log_bessel_k, logsumexp
from .data import Dataset

LOG_2PI = np.log(2.0 * np.pi)


class MarginalPoleError(ValueError):
    """Marginal shrinkage prior evaluated at its pole (beta = 0, theta <= 0.5)."""


# ---------------------------------------------------------------------------
# gating network
# ---------------------------------------------------------------------------

def gating_log_probs(x: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Log class-membership probabilities of the multinomial logit gate.

    x: (N, P) or (P,) covariates; beta: (K-1, P) with group K fixed at zero.
    Returns (N, K) (or (K,)) log probabilities, computed with max-subtraction.
    """
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or beta.shape[1] != x2.shape[1]:
        raise ValueError(
            f"dimension mismatch: x has {x2.shape[1]} covariates, beta is {beta.shape}"
        )
    z = np.hstack([x2 @ beta.T, np.zeros((x2.shape[0], 1))])
    z -= z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return logp[0] if np.ndim(x) == 1 else logp


def gating_probs(x: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Class-membership probabilities; rows sum to one."""
    return np.exp(gating_log_probs(x, beta))


# ---------------------------------------------------------------------------
# gating-prior families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NgHyper:
    theta: float = 0.1
    c0: float = 0.01
    c1: float = 0.01

    def __post_init__(self) -> None:
        if min(self.theta, self.c0, self.c1) <= 0:
            raise ValueError("normal-gamma hyperparameters must be positive")


@dataclass(frozen=True)
class SsvsHyper:
    spike_var: float = 0.01
    slab_var: float = 1.0
    incl_prob: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.incl_prob <= 1.0:
            raise ValueError("inclusion probability must be in (0, 1]")
        if not 0.0 < self.spike_var < self.slab_var:
            raise ValueError("need 0 < spike_var < slab_var")


@dataclass(frozen=True)
class FlatHyper:
    prior_var: float = 10.0

    def __post_init__(self) -> None:
        if self.prior_var <= 0:
            raise ValueError("prior variance must be positive")


GatingHyper = NgHyper | SsvsHyper | FlatHyper


def _normal_logpdf(x, var):
    return -0.5 * (LOG_2PI + np.log(var) + np.square(x) / var)


def log_prior_beta_marginal(beta_kp, theta: float, lam: float):
    """Log marginal prior of one gating coefficient with local scales
    integrated out analytically:

        p(b) = sqrt(theta*lam)^(theta+1/2) / (sqrt(pi) 2^(theta-1/2) Gamma(theta))
               * |b|^(theta-1/2) * K_(theta-1/2)(sqrt(theta*lam) |b|).

    theta > 0.5 has a finite limit at b = 0; theta <= 0.5 diverges there and
    raises :class:`MarginalPoleError`.
    """
    if theta <= 0 or lam <= 0:
        raise ValueError("theta and lam must be positive")
    b = np.abs(np.asarray(beta_kp, dtype=float))
    a = np.sqrt(theta * lam)
    const = (theta + 0.5) * np.log(a) - 0.5 * np.log(np.pi) - (theta - 0.5) * np.log(2.0) - gammaln(theta)
    zero = b == 0.0
    if np.any(zero):
        if theta <= 0.5:
            raise MarginalPoleError(
                "marginal shrinkage prior has a pole at beta = 0 for theta <= 0.5"
            )
        at0 = (
            0.5 * np.log(theta * lam)
            - 0.5 * np.log(np.pi)
            - np.log(2.0)
            + gammaln(theta - 0.5)
            - gammaln(theta)
        )
        out = np.where(zero, at0, 0.0)
        nz = ~zero
        bnz = np.where(nz, b, 1.0)
        out = out + np.where(nz, const + (theta - 0.5) * np.log(bnz) + log_bessel_k(theta - 0.5, a * bnz), 0.0)
        return float(out) if out.ndim == 0 else out
    out = const + (theta - 0.5) * np.log(b) + log_bessel_k(theta - 0.5, a * b)
    return float(out) if np.ndim(out) == 0 else out


def log_prior_gating(beta: np.ndarray, hyper: GatingHyper, state=None, lam_hat=None) -> float:
    """Log prior density of the gating coefficients.

    Normal-gamma and spike-slab are evaluated conditionally on their state
    (tau2 effective variances, or inclusion indicators).  Passing ``lam_hat``
    with an NgHyper instead evaluates the tau2-marginalized prior (used by
    the bridge sampler); spike-slab without a state marginalizes the
    indicators exactly.
    """
    beta = np.asarray(beta, dtype=float)
    if isinstance(hyper, FlatHyper):
        return float(_normal_logpdf(beta, hyper.prior_var).sum())
    if isinstance(hyper, NgHyper):
        if lam_hat is not None:
            lam_hat = np.broadcast_to(np.asarray(lam_hat, float), (beta.shape[0],))
            total = 0.0
            for k in range(beta.shape[0]):
                total += float(np.sum(log_prior_beta_marginal(beta[k], hyper.theta, lam_hat[k])))
            return total
        if state is None:
            raise ValueError("normal-gamma conditional prior needs tau2 state")
        tau2 = np.asarray(state, dtype=float)
        return float(_normal_logpdf(beta, tau2).sum())
    if isinstance(hyper, SsvsHyper):
        slab = _normal_logpdf(beta, hyper.slab_var)
        spike = _normal_logpdf(beta, hyper.spike_var)
        if state is None:
            w = hyper.incl_prob
            return float(np.logaddexp(np.log(w) + slab, np.log1p(-w) + spike).sum())
        delta = np.asarray(state)
        return float(np.where(delta == 1, slab, spike).sum())
    raise TypeError(f"unknown gating prior {type(hyper).__name__}")


# ---------------------------------------------------------------------------
# component families
# ---------------------------------------------------------------------------

@dataclass
class BernoulliComponents:
    """Product-Bernoulli mixture components with independent Beta priors."""

    gamma: np.ndarray           # (K, J) occurrence probabilities
    a0: np.ndarray              # (J,) Beta prior shapes
    b0: np.ndarray              # (J,)

    def __post_init__(self) -> None:
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        self.a0 = np.broadcast_to(np.asarray(self.a0, float), (self.gamma.shape[1],)).copy()
        self.b0 = np.broadcast_to(np.asarray(self.b0, float), (self.gamma.shape[1],)).copy()
        if np.any(self.gamma <= 0.0) or np.any(self.gamma >= 1.0):
            raise ValueError("occurrence probabilities must lie in (0, 1)")
        if np.any(self.a0 <= 0) or np.any(self.b0 <= 0):
            raise ValueError("Beta hyperparameters must be positive")

    @property
    def n_components(self) -> int:
        return self.gamma.shape[0]

    def loglik_matrix(self, y: np.ndarray) -> np.ndarray:
        """(N, K) matrix of per-component log likelihoods."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return y @ np.log(self.gamma).T + (1.0 - y) @ np.log1p(-self.gamma).T

    def log_prior(self) -> float:
        a, b = self.a0, self.b0
        lognorm = gammaln(a + b) - gammaln(a) - gammaln(b)
        dens = lognorm + (a - 1.0) * np.log(self.gamma) + (b - 1.0) * np.log1p(-self.gamma)
        return float(dens.sum())

    def permuted(self, order: np.ndarray) -> "BernoulliComponents":
        return BernoulliComponents(self.gamma[order], self.a0, self.b0)

    def copy(self) -> "BernoulliComponents":
        return BernoulliComponents(self.gamma.copy(), self.a0, self.b0)


@dataclass
class GaussianComponents:
    """Multivariate-normal mixture components with a conjugate
    normal-inverse-Wishart prior."""

    mu: np.ndarray              # (K, d)
    sigma: np.ndarray           # (K, d, d) SPD
    m0: np.ndarray              # (d,)
    kappa0: float
    nu0: float
    psi0: np.ndarray            # (d, d) SPD

    def __post_init__(self) -> None:
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        self.sigma = np.asarray(self.sigma, dtype=float)
        d = self.mu.shape[1]
        self.m0 = np.asarray(self.m0, dtype=float).reshape(d)
        self.psi0 = np.asarray(self.psi0, dtype=float).reshape(d, d)
        if self.nu0 <= d - 1:
            raise ValueError("nu0 must exceed dimension - 1")
        if self.kappa0 <= 0:
            raise ValueError("kappa0 must be positive")
        np.linalg.cholesky(self.sigma)  # SPD check, raises LinAlgError otherwise

    @property
    def n_components(self) -> int:
        return self.mu.shape[0]

    @property
    def dim(self) -> int:
        return self.mu.shape[1]

    def loglik_matrix(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        n, d = y.shape
        out = np.empty((n, self.n_components))
        for k in range(self.n_components):
            chol = np.linalg.cholesky(self.sigma[k])
            diff = np.linalg.solve(chol, (y - self.mu[k]).T)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            out[:, k] = -0.5 * (d * LOG_2PI + logdet + np.square(diff).sum(axis=0))
        return out

    def log_prior(self) -> float:
        total = 0.0
        for k in range(self.n_components):
            total += invwishart_logpdf(self.sigma[k], self.nu0, self.psi0)
            total += float(mvn_logpdf(self.mu[k], self.m0, self.sigma[k] / self.kappa0))
        return total

    def permuted(self, order: np.ndarray) -> "GaussianComponents":
        return GaussianComponents(
            self.mu[order], self.sigma[order], self.m0, self.kappa0, self.nu0, self.psi0
        )

    def copy(self) -> "GaussianComponents":
        return GaussianComponents(
            self.mu.copy(), self.sigma.copy(), self.m0, self.kappa0, self.nu0, self.psi0
        )

    @classmethod
    def default_hyper(cls, y: np.ndarray) -> dict:
        """Weakly informative conjugate hyperparameters anchored at the data:
        prior mean at the sample mean, prior scale at the sample variances."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        d = y.shape[1]
        return {
            "m0": y.mean(axis=0),
            "kappa0": 0.01,
            "nu0": d + 2.0,
            "psi0": np.diag(np.maximum(y.var(axis=0), 1e-12)),
        }


Components = BernoulliComponents | GaussianComponents


def component_loglik(y_row: np.ndarray, k: int, components: Components) -> float:
    """Exact log density of one observation under component k."""
    return float(components.loglik_matrix(np.atleast_2d(y_row))[0, k - 1])


def log_prior_components(components: Components) -> float:
    return components.log_prior()


def mixture_loglik(data: Dataset, beta: np.ndarray, components: Components) -> float:
    """Observed-data log likelihood sum_i log sum_k eta_k(x_i) f_k(y_i)."""
    logw = gating_log_probs(data.covariates, beta)
    ll = components.loglik_matrix(data.responses)
    if logw.shape != ll.shape:
        raise ValueError(
            f"gating gives {logw.shape[1]} groups, components give {ll.shape[1]}"
        )
    return float(logsumexp(logw + ll, axis=1).sum())


def class_posterior_probs(data: Dataset, beta: np.ndarray, components: Components) -> np.ndarray:
    """(N, K) posterior class-membership probabilities (gate times component
    likelihood, normalized row-wise in log space)."""
    logw = gating_log_probs(data.covariates, beta) + components.loglik_matrix(data.responses)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# stacked-array density helpers (shared with the bridge sampler)
# ---------------------------------------------------------------------------

def mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Multivariate normal log density; supports stacked leading dimensions
    on any argument (broadcast like numpy.linalg)."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[-1]
    diff = x - mean
    sol = np.linalg.solve(cov, diff[..., None])[..., 0]
    quad = np.einsum("...i,...i->...", diff, sol)
    _, logdet = np.linalg.slogdet(cov)
    return -0.5 * (d * LOG_2PI + logdet + quad)


def invwishart_logpdf(sigma: np.ndarray, nu: float, psi: np.ndarray) -> np.ndarray | float:
    """Inverse-Wishart log density, vectorized over stacked sigma/psi/nu."""
    sigma = np.asarray(sigma, dtype=float)
    psi = np.asarray(psi, dtype=float)
    d = sigma.shape[-1]
    nu = np.asarray(nu, dtype=float)
    _, logdet_psi = np.linalg.slogdet(psi)
    _, logdet_sig = np.linalg.slogdet(sigma)
    tr = np.trace(np.linalg.solve(sigma, np.broadcast_to(psi, sigma.shape)), axis1=-2, axis2=-1)
    if nu.ndim == 0:
        mg = multigammaln(0.5 * float(nu), d)
    else:
        mg = np.array([multigammaln(0.5 * v, d) for v in nu.ravel()]).reshape(nu.shape)
    out = (
        0.5 * nu * logdet_psi
        - 0.5 * nu * d * np.log(2.0)
        - mg
        - 0.5 * (nu + d + 1.0) * logdet_sig
        - 0.5 * tr
    )
    return float(out) if np.ndim(out) == 0 else out


def beta_logpdf(x, a, b):
    """Beta log density, broadcasting across all arguments."""
    x = np.asarray(x, dtype=float)
    return (
        gammaln(a + b) - gammaln(a) - gammaln(b)
        + (a - 1.0) * np.log(x)
        + (b - 1.0) * np.log1p(-x)
    )
