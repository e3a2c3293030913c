"""Synthetic data generators reproducing the two simulation studies: a pure
multinomial-logit prior-performance design with sparse group-specific
coefficients, and four mixture-of-experts classification scenarios with
bivariate normal components."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import gating_probs
from .rng import as_generator

# Sparse true coefficient vectors of the prior-performance study (group 4 is
# the zero baseline).
STUDY1_BETAS = np.zeros((3, 20))
STUDY1_BETAS[0, :4] = [0.8, 1.0, 2.0, 0.5]
STUDY1_BETAS[1, [0, 4, 5, 6]] = [0.3, -1.0, 1.7, -2.0]
STUDY1_BETAS[2, :5] = [0.3, 1.0, -2.0, 0.8, 0.9]

# Complex-sparsity pattern: predictors 1-3 act on group 1 only, 4-6 on group
# 2 only, 7-10 on group 3 only, the last predictor on all groups.  Magnitudes
# of 1 with alternating signs are a fixture choice; only the pattern is
# prescribed.
COMPLEX_BETAS = np.zeros((3, 20))
COMPLEX_BETAS[0, :3] = [1.0, -1.0, 1.0]
COMPLEX_BETAS[1, 3:6] = [-1.0, 1.0, -1.0]
COMPLEX_BETAS[2, 6:10] = [1.0, -1.0, 1.0, -1.0]
COMPLEX_BETAS[:, 19] = [1.0, -1.0, 1.0]

WELL_SEPARATED_MEANS = np.array([[-1.5, -0.5], [0.0, 1.3], [1.0, -1.0], [3.0, -2.0]])
OVERLAPPING_MEANS = np.array([[-1.5, 0.0], [0.5, 0.5], [1.0, -0.5], [3.0, -0.5]])

SCENARIOS = ("well-separated", "overlapping", "high-sparsity", "complex-sparsity")


@dataclass(frozen=True)
class Study1Design:
    n_obs: int = 3000
    n_covariates: int = 20
    n_components: int = 4
    true_betas: np.ndarray = field(default_factory=lambda: STUDY1_BETAS.copy())

    def __post_init__(self) -> None:
        if self.n_obs not in (3000, 300, 100):
            raise ValueError("study 1 uses 3000, 300 or 100 observations")
        if self.true_betas.shape != (self.n_components - 1, self.n_covariates):
            raise ValueError("true_betas shape mismatch")


@dataclass(frozen=True)
class Study2Design:
    scenario: str = "well-separated"
    n_obs: int = 300
    n_components: int = 4

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")

    @property
    def means(self) -> np.ndarray:
        return (OVERLAPPING_MEANS if self.scenario == "overlapping" else WELL_SEPARATED_MEANS).copy()

    @property
    def cov_scale(self) -> float:
        return 0.2 if self.scenario == "overlapping" else 0.25

    @property
    def extra_noise_covariates(self) -> int:
        return 60 if self.scenario == "high-sparsity" else 0

    @property
    def true_betas(self) -> np.ndarray:
        base = COMPLEX_BETAS if self.scenario == "complex-sparsity" else STUDY1_BETAS
        if self.extra_noise_covariates:
            return np.hstack([base, np.zeros((3, self.extra_noise_covariates))])
        return base.copy()


def _draw_labels(probs: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    u = gen.random(probs.shape[0]) * cdf[:, -1]
    return 1 + (cdf < u[:, None]).sum(axis=1)


def gen_study1(design: Study1Design, rng) -> tuple[Dataset, dict]:
    """Multinomial-logit data with observed labels: standard-normal
    covariates, labels drawn from the gate at the sparse true coefficients."""
    gen = as_generator(rng)
    x = gen.standard_normal((design.n_obs, design.n_covariates))
    probs = gating_probs(x, design.true_betas)
    labels = _draw_labels(probs, gen)
    data = Dataset(
        responses=np.empty((design.n_obs, 0)),
        covariates=x,
        labels=labels,
        covariate_names=[f"x{p + 1}" for p in range(design.n_covariates)],
    )
    truth = {
        "study": 1,
        "betas": design.true_betas.copy(),
        "probs": probs,
        "labels": labels.copy(),
        "n_components": design.n_components,
    }
    return data, truth


def gen_study2(design: Study2Design, rng) -> tuple[Dataset, dict]:
    """Mixture-of-experts data: gate-driven labels, bivariate normal
    responses around scenario-specific component means."""
    gen = as_generator(rng)
    betas = design.true_betas
    p = betas.shape[1]
    x = gen.standard_normal((design.n_obs, p))
    probs = gating_probs(x, betas)
    labels = _draw_labels(probs, gen)
    means = design.means
    cov = design.cov_scale * np.eye(2)
    y = means[labels - 1] + np.sqrt(design.cov_scale) * gen.standard_normal((design.n_obs, 2))
    data = Dataset(
        responses=y,
        covariates=x,
        labels=labels,
        response_names=["y1", "y2"],
        covariate_names=[f"x{j + 1}" for j in range(p)],
    )
    truth = {
        "study": 2,
        "scenario": design.scenario,
        "betas": betas.copy(),
        "probs": probs,
        "labels": labels.copy(),
        "means": means,
        "cov": cov,
        "n_components": design.n_components,
    }
    return data, truth
