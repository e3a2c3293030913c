"""Bayesian mixture-of-experts with shrinkage priors on the gating network.

A library plus CLI for fully Bayesian inference in finite mixtures whose
component weights depend on covariates through a multinomial logit gate:
Polya-Gamma Gibbs sampling with normal-gamma / spike-slab / flat gating
priors, random-permutation sampling with k-means relabeling, and
bridge-sampling marginal likelihoods for choosing the number of components.
"""

__version__ = "0.1.0"

from .bridge import BridgeResult, ParamDraws, bridge_estimate, bridge_for_store, marglik_for_k
from .data import Dataset, DataValidationError, load_dataset
from .gibbs import ChainConfig, ChainState, DrawsStore, ImportanceSnapshot, NumericalError, run_chain
from .identify import RelabelResult, apply_relabeling, build_point_process, identify, kmeans_relabel
from .metrics import MetricsReport, compute_metrics
from .model import (
    BernoulliComponents,
    FlatHyper,
    GaussianComponents,
    NgHyper,
    SsvsHyper,
    gating_probs,
    log_prior_beta_marginal,
    mixture_loglik,
)
from .rng import RngStream
from .simulate import Study1Design, Study2Design, gen_study1, gen_study2
from .study import StudySpec, run_study

__all__ = [
    "BridgeResult",
    "ParamDraws",
    "bridge_estimate",
    "bridge_for_store",
    "marglik_for_k",
    "Dataset",
    "DataValidationError",
    "load_dataset",
    "ChainConfig",
    "ChainState",
    "DrawsStore",
    "ImportanceSnapshot",
    "NumericalError",
    "run_chain",
    "RelabelResult",
    "apply_relabeling",
    "build_point_process",
    "identify",
    "kmeans_relabel",
    "MetricsReport",
    "compute_metrics",
    "BernoulliComponents",
    "FlatHyper",
    "GaussianComponents",
    "NgHyper",
    "SsvsHyper",
    "gating_probs",
    "log_prior_beta_marginal",
    "mixture_loglik",
    "RngStream",
    "Study1Design",
    "Study2Design",
    "gen_study1",
    "gen_study2",
    "StudySpec",
    "run_study",
]
