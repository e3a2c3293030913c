"""The full Gibbs sampler: class labels, Polya-Gamma auxiliaries, gating
coefficients, shrinkage (or inclusion) states, component parameters, and the
concluding random permutation step, with importance-snapshot capture for the
bridge sampler.

Sweep order: labels -> omega -> beta -> shrinkage -> components -> permute.
The omega update must precede beta (the augmentation makes beta's conditional
Gaussian given omega).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import stats as sst

from .data import Dataset, DataValidationError
from .gig import sample_gig_many
from .model import (
    BernoulliComponents,
    Components,
    FlatHyper,
    GatingHyper,
    GaussianComponents,
    NgHyper,
    SsvsHyper,
    gating_log_probs,
    mixture_loglik,
)
from .pg import sample_pg1
from .rng import RngStream, as_generator
from .special import logsumexp

_GAMMA_CLIP = 1e-12     # keeps Bernoulli occurrence probabilities inside (0, 1)
_CHI_FLOOR = 1e-300     # GIG chi argument when a coefficient underflows to 0


class NumericalError(RuntimeError):
    """Raised when a linear-algebra step fails beyond recovery."""


@dataclass(frozen=True)
class ChainConfig:
    n_components: int
    prior: str = "ng"                 # ng | ssvs | flat
    family: str = "bernoulli"         # bernoulli | gaussian | multinomial
    n_burn: int = 1000
    n_save: int = 2000
    thin: int = 1
    snapshot_count: int = 100
    seed: RngStream = RngStream(0)
    gating_hyper: GatingHyper | None = None
    beta_a0: float = 1.0              # Bernoulli-component Beta prior
    beta_b0: float = 1.0
    niw: dict | None = None           # Gaussian-component prior overrides
    permute: bool = True

    def __post_init__(self) -> None:
        if self.n_components < 1:
            raise ValueError("need at least one component")
        if self.prior not in ("ng", "ssvs", "flat"):
            raise ValueError(f"unknown gating prior '{self.prior}'")
        if self.family not in ("bernoulli", "gaussian", "multinomial"):
            raise ValueError(f"unknown component family '{self.family}'")
        if self.n_save < 1 or self.n_burn < 0 or self.thin < 1:
            raise ValueError("invalid chain lengths")
        if not 1 <= self.snapshot_count <= self.n_save:
            raise ValueError("snapshot_count must lie in 1..n_save")

    def resolved_hyper(self) -> GatingHyper:
        if self.gating_hyper is not None:
            return self.gating_hyper
        return {"ng": NgHyper(), "ssvs": SsvsHyper(), "flat": FlatHyper()}[self.prior]


@dataclass
class ChainState:
    labels: np.ndarray              # (N,) in 1..K
    beta: np.ndarray                # (K-1, P)
    omega: np.ndarray               # (N, K-1) positive
    tau2: np.ndarray | None         # (K-1, P) effective prior variances (NG)
    lam: np.ndarray | None          # (K-1,) global shrinkage (NG)
    delta: np.ndarray | None        # (K-1, P) inclusion indicators (SSVS)
    components: Components | None


@dataclass
class ImportanceSnapshot:
    """Full-conditional posterior parameters of one MCMC sweep, recorded
    before that sweep's permutation; the uniform mixture of these densities
    is the bridge sampler's importance density."""

    beta_mean: np.ndarray           # (K-1, P)
    beta_cov: np.ndarray            # (K-1, P, P)
    family: str
    comp_params: dict = field(default_factory=dict)


@dataclass
class DrawsStore:
    """Saved post-permutation draws of all parameter blocks."""

    config: ChainConfig
    beta: np.ndarray                # (M, K-1, P)
    labels: np.ndarray              # (M, N)
    lam: np.ndarray | None
    tau2: np.ndarray | None
    delta: np.ndarray | None
    gamma: np.ndarray | None        # (M, K, J) Bernoulli
    mu: np.ndarray | None           # (M, K, d) Gaussian
    sigma: np.ndarray | None        # (M, K, d, d)
    perms: np.ndarray               # (M, K) permutation applied at each save
    loglik: np.ndarray              # (M,) mixture log likelihood per draw
    snapshots: list[ImportanceSnapshot]
    runtime_sec: float
    comp_hyper: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    @property
    def n_components(self) -> int:
        return self.config.n_components

    def components_at(self, m: int) -> Components | None:
        if self.gamma is not None:
            return BernoulliComponents(self.gamma[m], self.comp_hyper["a0"], self.comp_hyper["b0"])
        if self.mu is not None:
            return GaussianComponents(self.mu[m], self.sigma[m], **self.comp_hyper["niw"])
        return None

    def state_at(self, m: int) -> "ChainState":
        return ChainState(
            labels=self.labels[m],
            beta=self.beta[m],
            omega=np.empty((0, 0)),
            tau2=None if self.tau2 is None else self.tau2[m],
            lam=None if self.lam is None else self.lam[m],
            delta=None if self.delta is None else self.delta[m],
            components=self.components_at(m),
        )

    def lam_posterior_mean(self) -> np.ndarray | None:
        return None if self.lam is None else self.lam.mean(axis=0)


# ---------------------------------------------------------------------------
# individual full-conditional updates
# ---------------------------------------------------------------------------

def update_labels(data: Dataset, beta: np.ndarray, components: Components, rng) -> np.ndarray:
    """Draw each class label from its multinomial full conditional, with
    gate-times-likelihood weights normalized in log space."""
    gen = as_generator(rng)
    logw = gating_log_probs(data.covariates, beta) + components.loglik_matrix(data.responses)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    cdf = np.cumsum(w, axis=1)
    u = gen.random(data.n_obs) * cdf[:, -1]
    return 1 + (cdf < u[:, None]).sum(axis=1)


def _logit_offsets(x: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """C[i, k] = log sum_{j != k} exp(x_i' beta_j), baseline term included."""
    n = x.shape[0]
    km1 = beta.shape[0]
    z = np.hstack([x @ beta.T, np.zeros((n, 1))])
    out = np.empty((n, km1))
    for k in range(km1):
        others = np.delete(z, k, axis=1)
        out[:, k] = logsumexp(others, axis=1)
    return out


def update_omega(data: Dataset, beta: np.ndarray, rng, offsets: np.ndarray | None = None) -> np.ndarray:
    """Polya-Gamma auxiliaries omega[i, k] ~ PG(1, x_i' beta_k - C[i, k])."""
    gen = as_generator(rng)
    x = data.covariates
    if offsets is None:
        offsets = _logit_offsets(x, beta)
    psi = x @ beta.T - offsets
    if psi.size == 0:
        return np.empty_like(psi)
    return sample_pg1(psi, gen).reshape(psi.shape)


def prior_precision_rows(
    hyper: GatingHyper,
    shape: tuple[int, int],
    tau2: np.ndarray | None = None,
    delta: np.ndarray | None = None,
) -> np.ndarray:
    """(K-1, P) per-coefficient prior precisions for the beta update."""
    if isinstance(hyper, FlatHyper):
        return np.full(shape, 1.0 / hyper.prior_var)
    if isinstance(hyper, NgHyper):
        return 1.0 / np.asarray(tau2, dtype=float)
    if isinstance(hyper, SsvsHyper):
        var = np.where(np.asarray(delta) == 1, hyper.slab_var, hyper.spike_var)
        return 1.0 / var
    raise TypeError(type(hyper).__name__)


def beta_conditional(
    data: Dataset,
    labels: np.ndarray,
    omega: np.ndarray,
    prior_prec: np.ndarray,
    offsets: np.ndarray | None = None,
    beta: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian full-conditional moments of every gating coefficient row.

    Returns (means (K-1, P), precision Cholesky factors (K-1, P, P)) with
    V_k^-1 = X' Omega_k X + diag(prior precision) and
    m_k = V_k X'(kappa_k + Omega_k C_k); the offset C enters with a plus
    because the augmented exponent is quadratic in x'beta - C.
    """
    x = data.covariates
    km1, p = prior_prec.shape
    if offsets is None:
        if beta is None:
            raise ValueError("need either offsets or beta to form C")
        offsets = _logit_offsets(x, beta)
    means = np.empty((km1, p))
    prec_chols = np.empty((km1, p, p))
    for k in range(km1):
        om = omega[:, k]
        a = x.T @ (om[:, None] * x)
        a[np.diag_indices_from(a)] += prior_prec[k]
        kappa = (labels == k + 1).astype(float) - 0.5
        rhs = x.T @ (kappa + om * offsets[:, k])
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            a[np.diag_indices_from(a)] += 1e-10
            try:
                chol = np.linalg.cholesky(a)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"beta precision for group {k + 1} is not SPD") from exc
        means[k] = sla.cho_solve((chol, True), rhs)
        prec_chols[k] = chol
    return means, prec_chols


def draw_beta(means: np.ndarray, prec_chols: np.ndarray, rng) -> np.ndarray:
    gen = as_generator(rng)
    km1, p = means.shape
    out = np.empty((km1, p))
    for k in range(km1):
        z = gen.standard_normal(p)
        out[k] = means[k] + sla.solve_triangular(prec_chols[k], z, lower=True, trans="T")
    return out


def cov_from_prec_chol(prec_chols: np.ndarray) -> np.ndarray:
    """Posterior covariances V_k from the precision Cholesky factors."""
    km1, p, _ = prec_chols.shape
    out = np.empty_like(prec_chols)
    eye = np.eye(p)
    for k in range(km1):
        linv = sla.solve_triangular(prec_chols[k], eye, lower=True)
        out[k] = linv.T @ linv
    return out


def update_gating(
    data: Dataset,
    labels: np.ndarray,
    beta: np.ndarray,
    prior_prec: np.ndarray,
    rng,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One sweep over the gating blocks: for each group k, draw the
    Polya-Gamma auxiliaries from the offsets at the *current* coefficients,
    then the coefficient row from its Gaussian conditional.

    The per-group interleaving matters: the auxiliary of group k is only a
    valid augmentation against offsets that include the already-updated rows,
    so computing all auxiliaries up front from the pre-sweep coefficients
    would leave the joint posterior non-invariant for three or more groups.

    Returns (beta, omega, conditional means, precision Cholesky factors).
    """
    gen = as_generator(rng)
    x = data.covariates
    beta = np.asarray(beta, dtype=float).copy()
    km1, p = beta.shape
    n = x.shape[0]
    omega = np.empty((n, km1))
    means = np.empty((km1, p))
    prec_chols = np.empty((km1, p, p))
    for k in range(km1):
        z = np.hstack([x @ beta.T, np.zeros((n, 1))])
        offsets_k = logsumexp(np.delete(z, k, axis=1), axis=1)
        psi = z[:, k] - offsets_k
        omega[:, k] = sample_pg1(psi, gen)
        om = omega[:, k]
        a = x.T @ (om[:, None] * x)
        a[np.diag_indices_from(a)] += prior_prec[k]
        kappa = (labels == k + 1).astype(float) - 0.5
        rhs = x.T @ (kappa + om * offsets_k)
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            a[np.diag_indices_from(a)] += 1e-10
            try:
                chol = np.linalg.cholesky(a)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"beta precision for group {k + 1} is not SPD") from exc
        m = sla.cho_solve((chol, True), rhs)
        beta[k] = m + sla.solve_triangular(chol, gen.standard_normal(p), lower=True, trans="T")
        means[k] = m
        prec_chols[k] = chol
    return beta, omega, means, prec_chols


def update_tau2(beta: np.ndarray, lam: np.ndarray, hyper: NgHyper, rng) -> np.ndarray:
    """Local-variance conditional:
    tau2[k,p] | beta, lam ~ GIG(theta - 1/2, beta[k,p]^2, theta * lam[k])."""
    gen = as_generator(rng)
    km1, p = beta.shape
    chi = np.maximum(np.square(beta), _CHI_FLOOR)
    psi = np.broadcast_to((hyper.theta * lam)[:, None], (km1, p))
    tau2 = sample_gig_many(hyper.theta - 0.5, chi, psi, gen)
    return np.maximum(tau2, _CHI_FLOOR)


def update_lambda(tau2: np.ndarray, hyper: NgHyper, rng) -> np.ndarray:
    """Global-scale conditional:
    lam[k] | tau2 ~ Gamma(P*theta + c0, rate c1 + (theta/2) sum_p tau2[k,p])."""
    gen = as_generator(rng)
    p = tau2.shape[1]
    shape = p * hyper.theta + hyper.c0
    rate = hyper.c1 + 0.5 * hyper.theta * tau2.sum(axis=1)
    return gen.gamma(shape, 1.0 / rate)


def update_shrinkage_ng(
    beta: np.ndarray, lam: np.ndarray, hyper: NgHyper, rng
) -> tuple[np.ndarray, np.ndarray]:
    """Both conjugate shrinkage updates, local scales first."""
    gen = as_generator(rng)
    tau2 = update_tau2(beta, lam, hyper, gen)
    return tau2, update_lambda(tau2, hyper, gen)


def update_ssvs(beta: np.ndarray, hyper: SsvsHyper, rng) -> np.ndarray:
    """Inclusion indicators from their Bernoulli full conditional (slab odds
    against spike odds at the current coefficient values)."""
    gen = as_generator(rng)
    if hyper.incl_prob == 1.0:
        return np.ones(beta.shape, dtype=int)
    b2 = np.square(beta)
    log_slab = np.log(hyper.incl_prob) - 0.5 * (np.log(hyper.slab_var) + b2 / hyper.slab_var)
    log_spike = np.log1p(-hyper.incl_prob) - 0.5 * (np.log(hyper.spike_var) + b2 / hyper.spike_var)
    p_incl = 1.0 / (1.0 + np.exp(log_spike - log_slab))
    return (gen.random(beta.shape) < p_incl).astype(int)


def bernoulli_conditional(
    y: np.ndarray, labels: np.ndarray, k: int, a0: np.ndarray, b0: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-(component, item) Beta posterior parameters given the labels."""
    onehot = (labels[:, None] == np.arange(1, k + 1)[None, :]).astype(float)
    n_k = onehot.sum(axis=0)
    n_kj = onehot.T @ y
    return a0[None, :] + n_kj, b0[None, :] + (n_k[:, None] - n_kj)


def gaussian_conditional(
    y: np.ndarray, labels: np.ndarray, k: int, m0, kappa0, nu0, psi0
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normal-inverse-Wishart posterior parameters per component; empty
    components fall back to the prior (a valid conditional)."""
    d = y.shape[1]
    m_n = np.empty((k, d))
    kappa_n = np.empty(k)
    nu_n = np.empty(k)
    psi_n = np.empty((k, d, d))
    for j in range(k):
        rows = y[labels == j + 1]
        n = rows.shape[0]
        kappa_n[j] = kappa0 + n
        nu_n[j] = nu0 + n
        if n == 0:
            m_n[j] = m0
            psi_n[j] = psi0
            continue
        ybar = rows.mean(axis=0)
        diff = rows - ybar
        scatter = diff.T @ diff
        m_n[j] = (kappa0 * m0 + n * ybar) / kappa_n[j]
        dev = (ybar - m0)[:, None]
        psi = psi0 + scatter + (kappa0 * n / kappa_n[j]) * (dev @ dev.T)
        psi_n[j] = 0.5 * (psi + psi.T)
    return m_n, kappa_n, nu_n, psi_n


def draw_bernoulli_components(a_post, b_post, a0, b0, rng) -> BernoulliComponents:
    gen = as_generator(rng)
    gamma = np.clip(gen.beta(a_post, b_post), _GAMMA_CLIP, 1.0 - _GAMMA_CLIP)
    return BernoulliComponents(gamma, a0, b0)


def draw_gaussian_components(m_n, kappa_n, nu_n, psi_n, hyper: dict, rng) -> GaussianComponents:
    gen = as_generator(rng)
    k, d = m_n.shape
    mu = np.empty((k, d))
    sigma = np.empty((k, d, d))
    for j in range(k):
        sig = sst.invwishart.rvs(df=nu_n[j], scale=psi_n[j], random_state=gen)
        sig = np.atleast_2d(sig)
        sigma[j] = 0.5 * (sig + sig.T)
        chol = np.linalg.cholesky(sigma[j] / kappa_n[j])
        mu[j] = m_n[j] + chol @ gen.standard_normal(d)
    return GaussianComponents(mu, sigma, **hyper)


def update_components(data: Dataset, labels: np.ndarray, template: Components, rng) -> Components:
    """Draw new component parameters from their full conditional."""
    k = template.n_components
    if isinstance(template, BernoulliComponents):
        a_post, b_post = bernoulli_conditional(data.responses, labels, k, template.a0, template.b0)
        return draw_bernoulli_components(a_post, b_post, template.a0, template.b0, rng)
    hyper = {"m0": template.m0, "kappa0": template.kappa0, "nu0": template.nu0, "psi0": template.psi0}
    m_n, kappa_n, nu_n, psi_n = gaussian_conditional(data.responses, labels, k, **hyper)
    return draw_gaussian_components(m_n, kappa_n, nu_n, psi_n, hyper, rng)


# ---------------------------------------------------------------------------
# random permutation step
# ---------------------------------------------------------------------------

def relabel_state(state: ChainState, rho: np.ndarray, n_components: int) -> ChainState:
    """Relabel every block so that new slot k holds old slot rho[k]
    (0-based).  Gating coefficients are re-expressed against the new baseline
    rho[K-1]; shrinkage rows travel with their gating rows, the freed old
    baseline row inheriting the row vacated by the new baseline."""
    rho = np.asarray(rho, dtype=int)
    k = n_components
    inv = np.empty(k, dtype=int)
    inv[rho] = np.arange(k)
    labels = inv[state.labels - 1] + 1
    p = state.beta.shape[1]
    z = np.vstack([state.beta, np.zeros((1, p))])
    beta = z[rho[:-1]] - z[rho[-1]]
    sigma_idx = np.where(rho[:-1] == k - 1, rho[-1], rho[:-1])
    return ChainState(
        labels=labels,
        beta=beta,
        omega=state.omega[:, sigma_idx] if state.omega.size else state.omega,
        tau2=None if state.tau2 is None else state.tau2[sigma_idx],
        lam=None if state.lam is None else state.lam[sigma_idx],
        delta=None if state.delta is None else state.delta[sigma_idx],
        components=None if state.components is None else state.components.permuted(rho),
    )


def permute_step(state: ChainState, n_components: int, rng) -> tuple[ChainState, np.ndarray]:
    """Apply one uniformly drawn label permutation to the whole state."""
    gen = as_generator(rng)
    rho = gen.permutation(n_components)
    return relabel_state(state, rho, n_components), rho


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------

def _init_components(config: ChainConfig, data: Dataset, labels: np.ndarray, gen) -> Components | None:
    k = config.n_components
    if config.family == "multinomial":
        return None
    if config.family == "bernoulli":
        data.validate_binary()
        a0 = np.full(data.n_responses, config.beta_a0)
        b0 = np.full(data.n_responses, config.beta_b0)
        a_post, b_post = bernoulli_conditional(data.responses, labels, k, a0, b0)
        return draw_bernoulli_components(a_post, b_post, a0, b0, gen)
    hyper = GaussianComponents.default_hyper(data.responses)
    if config.niw:
        hyper.update(config.niw)
    m_n, kappa_n, nu_n, psi_n = gaussian_conditional(data.responses, labels, k, **hyper)
    return draw_gaussian_components(m_n, kappa_n, nu_n, psi_n, hyper, gen)


def _init_labels(config: ChainConfig, data: Dataset, gen) -> np.ndarray:
    if config.family == "multinomial":
        if data.labels is None:
            raise DataValidationError("multinomial family requires observed labels")
        if data.labels.max() > config.n_components:
            raise DataValidationError("observed labels exceed the configured group count")
        return data.labels.copy()
    k = config.n_components
    if k == 1:
        return np.ones(data.n_obs, dtype=int)
    # cheap k-means warm start; stationarity does not depend on it
    from .kmeans import kmeans

    assign, _, _ = kmeans(data.responses, k, gen, n_restarts=5, max_iter=50)
    return assign + 1


def run_chain(config: ChainConfig, data: Dataset) -> DrawsStore:
    """Run burn-in plus M saved sweeps and return the draws store.

    Importance snapshots are captured at ``snapshot_count`` uniformly random
    saved iterations, recording the full-conditional parameters of that sweep
    before its permutation is applied.
    """
    t0 = time.perf_counter()
    gen = as_generator(config.seed)
    k = config.n_components
    p = data.n_covariates
    n = data.n_obs
    m_draws = config.n_save
    hyper = config.resolved_hyper()
    expected = {"ng": NgHyper, "ssvs": SsvsHyper, "flat": FlatHyper}[config.prior]
    if not isinstance(hyper, expected):
        raise ValueError("gating_hyper does not match the configured prior")

    supervised = config.family == "multinomial"
    do_permute = config.permute and not supervised and k > 1
    snap_at = set(np.sort(gen.choice(m_draws, size=config.snapshot_count, replace=False)).tolist())

    labels = _init_labels(config, data, gen)
    components = _init_components(config, data, labels, gen)
    state = ChainState(
        labels=labels,
        beta=np.zeros((k - 1, p)),
        omega=np.ones((n, k - 1)),
        tau2=np.full((k - 1, p), 2.0) if config.prior == "ng" else None,
        lam=np.ones(k - 1) if config.prior == "ng" else None,
        delta=np.ones((k - 1, p), dtype=int) if config.prior == "ssvs" else None,
        components=components,
    )

    store = DrawsStore(
        config=config,
        beta=np.empty((m_draws, k - 1, p)),
        labels=np.empty((m_draws, n), dtype=int),
        lam=np.empty((m_draws, k - 1)) if config.prior == "ng" else None,
        tau2=np.empty((m_draws, k - 1, p)) if config.prior == "ng" else None,
        delta=np.empty((m_draws, k - 1, p), dtype=int) if config.prior == "ssvs" else None,
        gamma=np.empty((m_draws, k, data.n_responses)) if config.family == "bernoulli" else None,
        mu=np.empty((m_draws, k, data.n_responses)) if config.family == "gaussian" else None,
        sigma=(
            np.empty((m_draws, k, data.n_responses, data.n_responses))
            if config.family == "gaussian"
            else None
        ),
        perms=np.tile(np.arange(k), (m_draws, 1)),
        loglik=np.full(m_draws, np.nan),
        snapshots=[],
        runtime_sec=0.0,
        comp_hyper=_component_hyper_dict(config, components),
    )

    total = config.n_burn + m_draws * config.thin
    saved = 0
    for sweep in range(total):
        is_saved = sweep >= config.n_burn and (sweep - config.n_burn) % config.thin == 0
        want_snapshot = is_saved and saved in snap_at

        if not supervised and state.components is not None:
            state.labels = update_labels(data, state.beta, state.components, gen)

        if k > 1:
            prec = prior_precision_rows(hyper, (k - 1, p), tau2=state.tau2, delta=state.delta)
            state.beta, state.omega, means, prec_chols = update_gating(
                data, state.labels, state.beta, prec, gen
            )
        else:
            means = np.empty((0, p))
            prec_chols = np.empty((0, p, p))

        if config.prior == "ng" and k > 1:
            state.tau2, state.lam = update_shrinkage_ng(state.beta, state.lam, hyper, gen)
        elif config.prior == "ssvs" and k > 1:
            state.delta = update_ssvs(state.beta, hyper, gen)

        snap_comp: dict = {}
        if state.components is not None:
            if isinstance(state.components, BernoulliComponents):
                a_post, b_post = bernoulli_conditional(
                    data.responses, state.labels, k, state.components.a0, state.components.b0
                )
                state.components = draw_bernoulli_components(
                    a_post, b_post, state.components.a0, state.components.b0, gen
                )
                snap_comp = {"a": a_post, "b": b_post}
            else:
                chyper = store.comp_hyper["niw"]
                m_n, kappa_n, nu_n, psi_n = gaussian_conditional(
                    data.responses, state.labels, k, **chyper
                )
                state.components = draw_gaussian_components(
                    m_n, kappa_n, nu_n, psi_n, chyper, gen
                )
                snap_comp = {"m": m_n, "kappa": kappa_n, "nu": nu_n, "psi": psi_n}

        if want_snapshot:
            store.snapshots.append(
                ImportanceSnapshot(
                    beta_mean=means.copy(),
                    beta_cov=cov_from_prec_chol(prec_chols),
                    family=config.family,
                    comp_params=snap_comp,
                )
            )

        if do_permute:
            state, rho = permute_step(state, k, gen)
        else:
            rho = np.arange(k)

        if is_saved:
            store.beta[saved] = state.beta
            store.labels[saved] = state.labels
            store.perms[saved] = rho
            if store.lam is not None:
                store.lam[saved] = state.lam
                store.tau2[saved] = state.tau2
            if store.delta is not None:
                store.delta[saved] = state.delta
            if store.gamma is not None:
                store.gamma[saved] = state.components.gamma
            if store.mu is not None:
                store.mu[saved] = state.components.mu
                store.sigma[saved] = state.components.sigma
            if state.components is not None:
                store.loglik[saved] = mixture_loglik(data, state.beta, state.components)
            else:
                logp = gating_log_probs(data.covariates, state.beta)
                store.loglik[saved] = float(logp[np.arange(n), state.labels - 1].sum())
            saved += 1

    store.runtime_sec = time.perf_counter() - t0
    return store


def _component_hyper_dict(config: ChainConfig, components: Components | None) -> dict:
    if components is None:
        return {}
    if isinstance(components, BernoulliComponents):
        return {"a0": components.a0, "b0": components.b0}
    return {
        "niw": {
            "m0": components.m0,
            "kappa0": components.kappa0,
            "nu0": components.nu0,
            "psi0": components.psi0,
        }
    }


def permutation_counts(perms: np.ndarray) -> dict[tuple[int, ...], int]:
    """How often each permutation was selected (diagnostic for balance)."""
    out: dict[tuple[int, ...], int] = {}
    for row in perms:
        key = tuple(int(v) for v in row)
        out[key] = out.get(key, 0) + 1
    return out


def n_permutations(k: int) -> int:
    return math.factorial(k)
