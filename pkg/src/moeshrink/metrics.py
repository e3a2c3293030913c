"""Accuracy metrics against a known generator: coefficient RMSEs split by the
true sparsity pattern, predicted-probability RMSE, and the misclassification
rate after minimum-error component matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import Dataset
from .gibbs import DrawsStore
from .gibbs import relabel_state
from .model import BernoulliComponents, GaussianComponents, class_posterior_probs, gating_probs


@dataclass
class MetricsReport:
    rmse_zeros: float
    rmse_nonzeros: float
    rmse_overall: float
    rmse_pp: float
    miscl_rate: float
    runtime_sec: float
    n_zeros: int
    n_nonzeros: int

    def decomposition_gap(self) -> float:
        """|rmse_overall^2 * n - (rmse_zeros^2 * n0 + rmse_nonzeros^2 * n1)|."""
        lhs = self.rmse_overall**2 * (self.n_zeros + self.n_nonzeros)
        rhs = self.rmse_zeros**2 * self.n_zeros + self.rmse_nonzeros**2 * self.n_nonzeros
        return abs(lhs - rhs)


def map_labels(draws: DrawsStore) -> np.ndarray:
    """Most frequent label per observation across the draws."""
    k = draws.n_components
    counts = np.zeros((draws.labels.shape[1], k), dtype=int)
    for j in range(k):
        counts[:, j] = (draws.labels == j + 1).sum(axis=0)
    return 1 + counts.argmax(axis=1)


def best_matching(est_labels: np.ndarray, true_labels: np.ndarray, k: int) -> np.ndarray:
    """Permutation rho (new slot c holds estimated slot rho[c]) minimizing the
    misclassification of est against truth, via assignment on the confusion
    matrix."""
    conf = np.zeros((k, k), dtype=int)
    for a in range(k):
        for b in range(k):
            conf[a, b] = int(np.sum((est_labels == a + 1) & (true_labels == b + 1)))
    rows, cols = linear_sum_assignment(-conf)
    rho = np.empty(k, dtype=int)
    rho[cols] = rows
    return rho


def relabel_store(draws: DrawsStore, rho: np.ndarray) -> DrawsStore:
    """Apply one fixed permutation to every draw (all parameter blocks)."""
    from dataclasses import replace as dc_replace

    out = dc_replace(
        draws,
        beta=draws.beta.copy(),
        labels=draws.labels.copy(),
        lam=None if draws.lam is None else draws.lam.copy(),
        tau2=None if draws.tau2 is None else draws.tau2.copy(),
        delta=None if draws.delta is None else draws.delta.copy(),
        gamma=None if draws.gamma is None else draws.gamma.copy(),
        mu=None if draws.mu is None else draws.mu.copy(),
        sigma=None if draws.sigma is None else draws.sigma.copy(),
    )
    k = draws.n_components
    for m in range(draws.n_draws):
        state = relabel_state(draws.state_at(m), rho, k)
        out.beta[m] = state.beta
        out.labels[m] = state.labels
        if out.lam is not None:
            out.lam[m] = state.lam
            out.tau2[m] = state.tau2
        if out.delta is not None:
            out.delta[m] = state.delta
        if out.gamma is not None:
            out.gamma[m] = state.components.gamma
        if out.mu is not None:
            out.mu[m] = state.components.mu
            out.sigma[m] = state.components.sigma
    return out


def _pad_truth_betas(true_betas: np.ndarray, fitted_cols: int) -> np.ndarray:
    """Prepend a zero intercept column when the fit used one."""
    if true_betas.shape[1] == fitted_cols:
        return true_betas
    if true_betas.shape[1] + 1 == fitted_cols:
        return np.hstack([np.zeros((true_betas.shape[0], 1)), true_betas])
    raise ValueError(
        f"fitted betas have {fitted_cols} columns, truth has {true_betas.shape[1]}"
    )


def _rmse(err: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(err)))) if err.size else 0.0


def align_to_truth(truth: dict, draws: DrawsStore) -> DrawsStore:
    """Relabel a whole store by the minimum-error matching of its MAP labels
    against the true labels (identity for supervised or one-component fits)."""
    k = draws.n_components
    if draws.config.family == "multinomial" or k == 1:
        return draws
    rho = best_matching(map_labels(draws), np.asarray(truth["labels"], dtype=int), k)
    return draws if np.array_equal(rho, np.arange(k)) else relabel_store(draws, rho)


def compute_metrics(truth: dict, draws: DrawsStore, data: Dataset) -> MetricsReport:
    """Metrics of a fitted (identified, for mixture fits) draws store against
    the generating truth.

    The estimated components are matched to the true ones by minimum-error
    label assignment before any comparison, so a globally relabeled but
    otherwise perfect fit scores zero everywhere.
    """
    supervised = draws.config.family == "multinomial"
    true_labels = np.asarray(truth["labels"], dtype=int)
    aligned = align_to_truth(truth, draws)
    miscl = 0.0 if supervised else float(np.mean(map_labels(aligned) != true_labels))

    beta_hat = aligned.beta.mean(axis=0)
    true_betas = _pad_truth_betas(np.asarray(truth["betas"], dtype=float), beta_hat.shape[1])
    err = beta_hat - true_betas
    zeros_mask = true_betas == 0.0
    sq = np.square(err)
    n0 = int(zeros_mask.sum())
    n1 = int((~zeros_mask).sum())
    rmse_zeros = float(np.sqrt(sq[zeros_mask].mean())) if n0 else 0.0
    rmse_nonzeros = float(np.sqrt(sq[~zeros_mask].mean())) if n1 else 0.0
    rmse_overall = float(np.sqrt(sq.mean()))

    # predicted probabilities at the posterior means vs at the truth
    if supervised:
        p_hat = gating_probs(data.covariates, beta_hat)
        p_true = truth["probs"]
    else:
        comps_hat = _posterior_mean_components(aligned)
        p_hat = class_posterior_probs(data, beta_hat, comps_hat)
        p_true = _true_class_posterior(truth, data)
    rmse_pp = _rmse(p_hat - p_true)

    return MetricsReport(
        rmse_zeros=rmse_zeros,
        rmse_nonzeros=rmse_nonzeros,
        rmse_overall=rmse_overall,
        rmse_pp=rmse_pp,
        miscl_rate=miscl,
        runtime_sec=draws.runtime_sec,
        n_zeros=n0,
        n_nonzeros=n1,
    )


def _posterior_mean_components(draws: DrawsStore):
    if draws.gamma is not None:
        return BernoulliComponents(
            draws.gamma.mean(axis=0), draws.comp_hyper["a0"], draws.comp_hyper["b0"]
        )
    if draws.mu is not None:
        return GaussianComponents(
            draws.mu.mean(axis=0), draws.sigma.mean(axis=0), **draws.comp_hyper["niw"]
        )
    raise ValueError("no component draws")


def _true_class_posterior(truth: dict, data: Dataset) -> np.ndarray:
    if "means" in truth:
        k = truth["means"].shape[0]
        comps = GaussianComponents(
            truth["means"],
            np.repeat(truth["cov"][None], k, axis=0),
            **GaussianComponents.default_hyper(data.responses),
        )
    elif "gamma" in truth:
        g = np.asarray(truth["gamma"], dtype=float)
        comps = BernoulliComponents(g, np.ones(g.shape[1]), np.ones(g.shape[1]))
    else:
        raise ValueError("truth dict lacks component parameters")
    true_betas = np.asarray(truth["betas"], dtype=float)
    x = data.covariates
    if x.shape[1] == true_betas.shape[1] + 1 and data.intercept_included:
        true_betas = np.hstack([np.zeros((true_betas.shape[0], 1)), true_betas])
    return class_posterior_probs(data, true_betas, comps)
