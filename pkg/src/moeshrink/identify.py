"""Ex-post identification of label-switched MCMC output.

The K per-component parameter vectors of each saved draw are stacked into an
M*K-row point-process matrix and clustered with k-means.  Each draw whose K
cluster assignments form a permutation of 1..K gets relabeled by it; draws
where clusters overlap (assignments not a permutation) are removed, and the
removal share is the overlap / overfitting diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .gibbs import DrawsStore, relabel_state
from .kmeans import kmeans
from .rng import as_generator

NONPERM_WARN_THRESHOLD = 0.05


@dataclass
class PointProcessMatrix:
    values: np.ndarray          # (M*K, r), columns standardized
    n_draws: int
    n_components: int
    column_names: list[str]

    def __post_init__(self) -> None:
        if self.values.shape[0] != self.n_draws * self.n_components:
            raise ValueError("point-process matrix must have M*K rows")
        if self.values.shape[1] < 1:
            raise ValueError("need at least one identification parameter")


@dataclass
class RelabelResult:
    permutations: np.ndarray    # (R, K) rho per retained draw, 0-based slots
    retained: np.ndarray        # (R,) indices into 1..M (0-based)
    nonperm_rate: float

    def __post_init__(self) -> None:
        for rho in self.permutations:
            if sorted(rho.tolist()) != list(range(len(rho))):
                raise ValueError("relabeling sequence is not a permutation")


def default_param_selector(draws: DrawsStore) -> tuple[np.ndarray, list[str]]:
    """(M, K, r) identification parameters: all occurrence probabilities for
    the Bernoulli family, component means for the Gaussian family."""
    if draws.gamma is not None:
        j = draws.gamma.shape[2]
        return draws.gamma, [f"gamma_j{i + 1}" for i in range(j)]
    if draws.mu is not None:
        d = draws.mu.shape[2]
        return draws.mu, [f"mu_d{i + 1}" for i in range(d)]
    raise ValueError("draws carry no component parameters to identify on")


def column_selector(columns: str | None):
    """Restrict identification to a 1-based subset of the default parameter
    columns, e.g. "1,3" for the first and third occurrence probability (or
    component-mean dimension).  None or "all" keeps every column."""
    if columns in (None, "", "all"):
        return default_param_selector

    idx = [int(c) - 1 for c in str(columns).split(",") if c.strip()]

    def selector(draws: DrawsStore) -> tuple[np.ndarray, list[str]]:
        params, names = default_param_selector(draws)
        bad = [i for i in idx if not 0 <= i < len(names)]
        if bad:
            raise ValueError(f"identification columns out of range: {[i + 1 for i in bad]}")
        return params[:, :, idx], [names[i] for i in idx]

    return selector


def build_point_process(
    draws: DrawsStore, param_selector=default_param_selector
) -> PointProcessMatrix:
    """Stack per-component parameter vectors of every draw, draw-major, and
    standardize each column to zero mean and unit variance."""
    if draws.n_draws == 0:
        raise ValueError("empty draws store")
    params, names = param_selector(draws)
    m, k, r = params.shape
    mat = params.reshape(m * k, r).astype(float).copy()
    keep = []
    for c in range(r):
        sd = mat[:, c].std()
        if sd <= 1e-14:
            warnings.warn(f"identification column {names[c]} is constant; dropped")
            continue
        mat[:, c] = (mat[:, c] - mat[:, c].mean()) / sd
        keep.append(c)
    if not keep:
        raise ValueError("all identification columns are constant")
    return PointProcessMatrix(
        values=mat[:, keep],
        n_draws=m,
        n_components=k,
        column_names=[names[c] for c in keep],
    )


def kmeans_relabel(pp: PointProcessMatrix, rng, n_restarts: int = 20, max_iter: int = 300) -> RelabelResult:
    """Cluster the M*K points with K centroids and keep the draws whose
    cluster sequence is a valid permutation."""
    gen = as_generator(rng)
    k = pp.n_components
    assign, _, _ = kmeans(pp.values, k, gen, n_restarts=n_restarts, max_iter=max_iter)
    seq = assign.reshape(pp.n_draws, k)
    valid = np.array([sorted(row.tolist()) == list(range(k)) for row in seq])
    retained = np.flatnonzero(valid)
    return RelabelResult(
        permutations=seq[retained],
        retained=retained,
        nonperm_rate=1.0 - retained.size / pp.n_draws,
    )


def apply_relabeling(draws: DrawsStore, result: RelabelResult) -> DrawsStore:
    """Reorder every parameter block of each retained draw by its cluster
    sequence (gating rows re-baselined) and drop removed draws."""
    k = draws.n_components
    r = result.retained.size
    if r == 0:
        raise ValueError("no draws retained; model appears badly overfitted")
    sel = result.retained
    out = dc_replace(
        draws,
        beta=np.empty((r,) + draws.beta.shape[1:]),
        labels=np.empty((r,) + draws.labels.shape[1:], dtype=int),
        lam=None if draws.lam is None else np.empty((r,) + draws.lam.shape[1:]),
        tau2=None if draws.tau2 is None else np.empty((r,) + draws.tau2.shape[1:]),
        delta=None if draws.delta is None else np.empty((r,) + draws.delta.shape[1:], dtype=int),
        gamma=None if draws.gamma is None else np.empty((r,) + draws.gamma.shape[1:]),
        mu=None if draws.mu is None else np.empty((r,) + draws.mu.shape[1:]),
        sigma=None if draws.sigma is None else np.empty((r,) + draws.sigma.shape[1:]),
        perms=draws.perms[sel].copy(),
        loglik=draws.loglik[sel].copy(),
        snapshots=draws.snapshots,
    )
    for i, m in enumerate(sel):
        # rho[c] = slot whose point fell in cluster c: new slot c <- old slot rho[c]
        rho = np.empty(k, dtype=int)
        rho[result.permutations[i]] = np.arange(k)
        state = relabel_state(draws.state_at(int(m)), rho, k)
        out.beta[i] = state.beta
        out.labels[i] = state.labels
        if out.lam is not None:
            out.lam[i] = state.lam
            out.tau2[i] = state.tau2
        if out.delta is not None:
            out.delta[i] = state.delta
        if out.gamma is not None:
            out.gamma[i] = state.components.gamma
        if out.mu is not None:
            out.mu[i] = state.components.mu
            out.sigma[i] = state.components.sigma
    return out


def identify(
    draws: DrawsStore, rng, param_selector=default_param_selector
) -> tuple[DrawsStore, RelabelResult]:
    """Full pipeline: point process, k-means relabeling, reordering."""
    pp = build_point_process(draws, param_selector)
    result = kmeans_relabel(pp, rng)
    if result.nonperm_rate > NONPERM_WARN_THRESHOLD:
        warnings.warn(
            f"non-permutation rate {result.nonperm_rate:.3f} exceeds "
            f"{NONPERM_WARN_THRESHOLD}; clusters overlap in the point-process "
            "representation, which points toward an over-fitting model"
        )
    return apply_relabeling(draws, result), result
