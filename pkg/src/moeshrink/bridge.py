"""Bridge-sampling marginal likelihood.

The importance density q is a uniform mixture of the full-conditional
posterior densities captured in S random snapshots during the (random
permutation) MCMC run.  The estimator iterates the optimal-bridge recursion
entirely in log space with a nested log-sum-exp decomposition; its inputs are
four log vectors: the unnormalized posterior and q evaluated at both the M
MCMC draws and the L i.i.d. importance draws.

Identification is deliberately NOT applied before bridging: the permuted
draws visit all labelings evenly, which is what makes the multimodal q match
the multimodal posterior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sst

from .data import Dataset
from .gibbs import ChainConfig, DrawsStore, ImportanceSnapshot, run_chain
from .model import (
    FlatHyper,
    GatingHyper,
    NgHyper,
    SsvsHyper,
    beta_logpdf,
    invwishart_logpdf,
    log_prior_gating,
    mvn_logpdf,
)
from .rng import RngStream, as_generator
from .special import logsumexp

_GAMMA_CLIP = 1e-12


@dataclass
class ParamDraws:
    """A batch of (gating, component) parameter draws to evaluate."""

    beta: np.ndarray                 # (L, K-1, P)
    gamma: np.ndarray | None = None  # (L, K, J)
    mu: np.ndarray | None = None     # (L, K, d)
    sigma: np.ndarray | None = None  # (L, K, d, d)

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    @staticmethod
    def from_store(store: DrawsStore) -> "ParamDraws":
        return ParamDraws(beta=store.beta, gamma=store.gamma, mu=store.mu, sigma=store.sigma)


@dataclass
class BridgeResult:
    log_ml: float
    iterations: int
    converged: bool
    start_log_ml_is: float
    start_log_ml_ris: float
    rel_step_at_stop: float
    lam_hat: np.ndarray | None = None
    se_proxy: float = float("nan")


# ---------------------------------------------------------------------------
# importance density: draws and evaluation
# ---------------------------------------------------------------------------

def draw_importance(snapshots: list[ImportanceSnapshot], n_draws: int, rng) -> ParamDraws:
    """L i.i.d. draws from the uniform mixture of the snapshot densities."""
    if not snapshots:
        raise ValueError("no importance snapshots available")
    if n_draws < 1:
        raise ValueError("need at least one importance draw")
    gen = as_generator(rng)
    s_count = len(snapshots)
    pick = gen.integers(s_count, size=n_draws)
    km1, p = snapshots[0].beta_mean.shape
    beta = np.empty((n_draws, km1, p))
    family = snapshots[0].family
    gamma = mu = sigma = None
    if family == "bernoulli":
        kk, jj = snapshots[0].comp_params["a"].shape
        gamma = np.empty((n_draws, kk, jj))
    elif family == "gaussian":
        kk, dd = snapshots[0].comp_params["m"].shape
        mu = np.empty((n_draws, kk, dd))
        sigma = np.empty((n_draws, kk, dd, dd))

    for s in range(s_count):
        idx = np.flatnonzero(pick == s)
        if idx.size == 0:
            continue
        snap = snapshots[s]
        for k in range(km1):
            chol = np.linalg.cholesky(snap.beta_cov[k])
            z = gen.standard_normal((idx.size, p))
            beta[idx, k, :] = snap.beta_mean[k] + z @ chol.T
        if gamma is not None:
            a = snap.comp_params["a"]
            b = snap.comp_params["b"]
            gamma[idx] = np.clip(
                gen.beta(np.broadcast_to(a, (idx.size,) + a.shape),
                         np.broadcast_to(b, (idx.size,) + b.shape)),
                _GAMMA_CLIP, 1.0 - _GAMMA_CLIP,
            )
        if mu is not None:
            m_n = snap.comp_params["m"]
            kap = snap.comp_params["kappa"]
            nu = snap.comp_params["nu"]
            psi = snap.comp_params["psi"]
            for i in idx:
                for k in range(m_n.shape[0]):
                    sig = np.atleast_2d(
                        sst.invwishart.rvs(df=nu[k], scale=psi[k], random_state=gen)
                    )
                    sigma[i, k] = 0.5 * (sig + sig.T)
                    chol = np.linalg.cholesky(sigma[i, k] / kap[k])
                    mu[i, k] = m_n[k] + chol @ gen.standard_normal(m_n.shape[1])
    return ParamDraws(beta=beta, gamma=gamma, mu=mu, sigma=sigma)


def log_q_many(draws: ParamDraws, snapshots: list[ImportanceSnapshot]) -> np.ndarray:
    """log q at each draw: log-sum-exp over the S mixture terms minus log S."""
    s_count = len(snapshots)
    n = draws.n_draws
    km1 = draws.beta.shape[1]
    per_snap = np.zeros((n, s_count))

    inv_sigma = logdet_sigma = None
    if draws.sigma is not None:
        inv_sigma = np.linalg.inv(draws.sigma)              # (n, K, d, d)
        _, logdet_sigma = np.linalg.slogdet(draws.sigma)    # (n, K)

    for s, snap in enumerate(snapshots):
        acc = np.zeros(n)
        for k in range(km1):
            chol = np.linalg.cholesky(snap.beta_cov[k])
            diff = draws.beta[:, k, :] - snap.beta_mean[k]
            sol = np.linalg.solve(chol, diff.T)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            acc += -0.5 * (diff.shape[1] * np.log(2 * np.pi) + logdet + np.square(sol).sum(axis=0))
        if draws.gamma is not None:
            a = snap.comp_params["a"]
            b = snap.comp_params["b"]
            acc += beta_logpdf(draws.gamma, a[None], b[None]).sum(axis=(1, 2))
        if draws.mu is not None:
            m_n = snap.comp_params["m"]
            kap = snap.comp_params["kappa"]
            nu = snap.comp_params["nu"]
            psi = snap.comp_params["psi"]
            d = m_n.shape[1]
            acc += invwishart_logpdf(draws.sigma, nu[None, :], psi[None]).sum(axis=1)
            diff = draws.mu - m_n[None]                      # (n, K, d)
            quad = np.einsum("nkd,nkde,nke->nk", diff, inv_sigma, diff) * kap[None, :]
            logdet = logdet_sigma - d * np.log(kap)[None, :]
            acc += (-0.5 * (d * np.log(2 * np.pi) + logdet + quad)).sum(axis=1)
        per_snap[:, s] = acc
    return logsumexp(per_snap, axis=1) - np.log(s_count)


def log_q(theta_draw: ParamDraws, snapshots: list[ImportanceSnapshot]) -> float:
    """log q of a single draw (batch of one)."""
    return float(log_q_many(theta_draw, snapshots)[0])


# ---------------------------------------------------------------------------
# unnormalized posterior
# ---------------------------------------------------------------------------

def log_unnorm_posterior_many(
    draws: ParamDraws,
    data: Dataset,
    hyper: GatingHyper,
    comp_hyper: dict,
    lam_hat: np.ndarray | None = None,
) -> np.ndarray:
    """Mixture log likelihood plus component and gating log priors, one value
    per draw.  Under the normal-gamma prior the gating term is the
    local-scale-marginalized coefficient prior at the plug-in global scales
    ``lam_hat``."""
    n = draws.n_draws
    y = data.responses
    x = data.covariates
    out = np.empty(n)
    zcol = np.zeros((x.shape[0], 1))

    if draws.gamma is not None:
        a0 = np.asarray(comp_hyper["a0"], dtype=float)
        b0 = np.asarray(comp_hyper["b0"], dtype=float)
    elif draws.mu is not None:
        niw = comp_hyper["niw"]

    for i in range(n):
        z = np.hstack([x @ draws.beta[i].T, zcol])
        z -= z.max(axis=1, keepdims=True)
        logw = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        if draws.gamma is not None:
            g = draws.gamma[i]
            ll = y @ np.log(g).T + (1.0 - y) @ np.log1p(-g).T
        elif draws.mu is not None:
            d = draws.mu.shape[2]
            ll = np.empty((x.shape[0], draws.mu.shape[1]))
            for k in range(draws.mu.shape[1]):
                chol = np.linalg.cholesky(draws.sigma[i, k])
                df = np.linalg.solve(chol, (y - draws.mu[i, k]).T)
                ll[:, k] = -0.5 * (
                    d * np.log(2 * np.pi)
                    + 2.0 * np.log(np.diag(chol)).sum()
                    + np.square(df).sum(axis=0)
                )
        else:
            raise ValueError("bridge sampling requires component parameters")
        out[i] = logsumexp(logw + ll, axis=1).sum()

    # component priors
    if draws.gamma is not None:
        out += beta_logpdf(draws.gamma, a0[None, None, :], b0[None, None, :]).sum(axis=(1, 2))
    else:
        out += invwishart_logpdf(draws.sigma, niw["nu0"], niw["psi0"][None, None]).sum(axis=1)
        cov = draws.sigma / niw["kappa0"]
        out += mvn_logpdf(draws.mu, niw["m0"][None, None, :], cov).sum(axis=1)

    # gating prior
    if draws.beta.shape[1] > 0:
        if isinstance(hyper, NgHyper):
            if lam_hat is None:
                raise ValueError("normal-gamma bridge needs plug-in global scales lam_hat")
            for i in range(n):
                out[i] += log_prior_gating(draws.beta[i], hyper, lam_hat=lam_hat)
        else:
            for i in range(n):
                out[i] += log_prior_gating(draws.beta[i], hyper)
    return out


def log_unnorm_posterior(
    theta_draw: ParamDraws,
    data: Dataset,
    hyper: GatingHyper,
    comp_hyper: dict,
    lam_hat: np.ndarray | None = None,
) -> float:
    return float(log_unnorm_posterior_many(theta_draw, data, hyper, comp_hyper, lam_hat)[0])


# ---------------------------------------------------------------------------
# the iterative estimator
# ---------------------------------------------------------------------------

def _recursion(lp_l, lq_l, lp_m, lq_m, start: float, tol: float, max_iter: int):
    log_l = np.log(len(lp_l))
    log_m = np.log(len(lp_m))
    current = start
    step = np.inf
    for it in range(1, max_iter + 1):
        num = lp_l - np.logaddexp(log_l + lq_l, log_m + lp_l - current)
        den = lq_m - np.logaddexp(log_l + lq_m, log_m + lp_m - current)
        new = (-log_l + logsumexp(num)) - (-log_m + logsumexp(den))
        step = abs(new - current)
        current = new
        if step < tol:
            return current, it, True, step
    return current, max_iter, False, step


def bridge_estimate(
    mcmc_draws: ParamDraws,
    imp_draws: ParamDraws,
    snapshots: list[ImportanceSnapshot],
    data: Dataset,
    hyper: GatingHyper,
    comp_hyper: dict,
    lam_hat: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 1000,
    compute_se_proxy: bool = True,
) -> tuple[BridgeResult, dict]:
    """Run the full estimator; also returns the four log vectors for audit."""
    lp_l = log_unnorm_posterior_many(imp_draws, data, hyper, comp_hyper, lam_hat)
    lq_l = log_q_many(imp_draws, snapshots)
    lp_m = log_unnorm_posterior_many(mcmc_draws, data, hyper, comp_hyper, lam_hat)
    lq_m = log_q_many(mcmc_draws, snapshots)

    start_is = float(-np.log(len(lp_l)) + logsumexp(lp_l - lq_l))
    start_ris = float(np.log(len(lp_m)) - logsumexp(lq_m - lp_m))

    log_ml, iters, converged, step = _recursion(lp_l, lq_l, lp_m, lq_m, start_is, tol, max_iter)

    se = float("nan")
    if compute_se_proxy and len(lp_l) >= 4 and len(lp_m) >= 4:
        hl = len(lp_l) // 2
        hm = len(lp_m) // 2
        a, *_ = _recursion(lp_l[:hl], lq_l[:hl], lp_m[:hm], lq_m[:hm], start_is, tol, max_iter)
        b, *_ = _recursion(lp_l[hl:], lq_l[hl:], lp_m[hm:], lq_m[hm:], start_is, tol, max_iter)
        se = abs(a - b) / 2.0

    result = BridgeResult(
        log_ml=float(log_ml),
        iterations=iters,
        converged=converged,
        start_log_ml_is=start_is,
        start_log_ml_ris=start_ris,
        rel_step_at_stop=float(step),
        lam_hat=None if lam_hat is None else np.asarray(lam_hat, float),
        se_proxy=se,
    )
    audit = {"log_pstar_imp": lp_l, "log_q_imp": lq_l, "log_pstar_mcmc": lp_m, "log_q_mcmc": lq_m}
    return result, audit


def bridge_for_store(
    store: DrawsStore,
    data: Dataset,
    rng,
    n_importance: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> tuple[BridgeResult, dict]:
    """Bridge estimate from a finished (permuted, unidentified) run."""
    n_imp = store.n_draws if n_importance is None else n_importance
    imp = draw_importance(store.snapshots, n_imp, rng)
    return bridge_estimate(
        mcmc_draws=ParamDraws.from_store(store),
        imp_draws=imp,
        snapshots=store.snapshots,
        data=data,
        hyper=store.config.resolved_hyper(),
        comp_hyper=store.comp_hyper,
        lam_hat=store.lam_posterior_mean(),
        tol=tol,
        max_iter=max_iter,
    )


def marglik_for_k(
    data: Dataset,
    base_config: ChainConfig,
    k_list: list[int],
    ref_k: int | None = None,
    n_importance: int | None = None,
) -> list[dict]:
    """Fit and bridge one model per component count; log Bayes factors are
    log-ML differences against the reference (equal model priors)."""
    from dataclasses import replace

    rows = []
    for i, k in enumerate(k_list):
        cfg = replace(base_config, n_components=k, seed=base_config.seed.child(i))
        store = run_chain(cfg, data)
        result, _ = bridge_for_store(
            store, data, cfg.seed.child(10_000 + i), n_importance=n_importance
        )
        rows.append(
            {
                "K": k,
                "log_ml": result.log_ml,
                "se_proxy": result.se_proxy,
                "converged": result.converged,
                "iterations": result.iterations,
            }
        )
    ref = ref_k if ref_k is not None else k_list[0]
    ref_ml = next(r["log_ml"] for r in rows if r["K"] == ref)
    for r in rows:
        r["log_bf_vs_ref"] = r["log_ml"] - ref_ml
        r["ref_K"] = ref
    return rows
