"""Benchmark harness: fits the competing gating priors (flat, spike-slab,
normal-gamma) on replicated synthetic datasets and aggregates the metric
tables, with an optional marginal-likelihood sweep across component counts.

Replications are independent tasks on disjoint random streams, so they can
run concurrently; aggregation is a pure fold over the ordered results.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bridge import marglik_for_k
from .gibbs import ChainConfig, run_chain
from .identify import identify
from .metrics import MetricsReport, align_to_truth, compute_metrics
from .model import FlatHyper, NgHyper, SsvsHyper
from .rng import RngStream
from .simulate import Study1Design, Study2Design, gen_study1, gen_study2

PRIORS = ("flat", "ssvs", "ng")
PRIOR_LABELS = {"flat": "Standard Prior", "ssvs": "SSVS", "ng": "NG"}

METRIC_COLS = ("rmse_zeros", "rmse_nonzeros", "rmse_overall", "rmse_pp", "miscl_rate", "runtime_sec")


@dataclass(frozen=True)
class StudySpec:
    study: int
    rng: RngStream
    priors: tuple[str, ...] = PRIORS
    replications: int = 5
    n_obs: int | None = None
    scenario: str = "well-separated"
    n_save: int = 5000
    n_burn: int = 1000
    thin: int = 1
    theta: float = 0.1
    k_range: tuple[int, ...] = ()
    ref_k: int = 4

    def __post_init__(self) -> None:
        if self.study not in (1, 2):
            raise ValueError("study must be 1 or 2")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        for prior in self.priors:
            if prior not in PRIORS:
                raise ValueError(f"unknown prior '{prior}'")


@dataclass
class StudyResult:
    spec: StudySpec
    reports: dict[str, list[MetricsReport]]
    nonperm_rates: dict[str, list[float]]
    absolute: list[dict]
    relative: list[dict]
    bf_rows: dict[str, list[dict]] = field(default_factory=dict)
    scatter: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    coef_means: dict[str, list[np.ndarray]] = field(default_factory=dict)
    coef_sds: dict[str, list[np.ndarray]] = field(default_factory=dict)
    true_betas: np.ndarray | None = None

    def per_replication_rows(self) -> list[dict]:
        rows = []
        for prior in self.spec.priors:
            for rep, report in enumerate(self.reports[prior]):
                row = {"prior": PRIOR_LABELS[prior], "replication": rep + 1}
                row.update({c: getattr(report, c) for c in METRIC_COLS})
                if self.nonperm_rates.get(prior):
                    row["nonperm_rate"] = self.nonperm_rates[prior][rep]
                rows.append(row)
        return rows

    def coefficient_rows(self) -> list[dict]:
        """Per-coefficient posterior means and SDs averaged over
        replications, one row per gating coefficient."""
        if self.true_betas is None:
            return []
        rows = []
        km1, p = self.true_betas.shape
        for k in range(km1):
            for j in range(p):
                row = {"parameter": f"beta_{k + 1}_{j + 1}", "true": self.true_betas[k, j]}
                for prior in self.spec.priors:
                    est = np.mean([m[k, j] for m in self.coef_means[prior]])
                    sd = np.mean([s[k, j] for s in self.coef_sds[prior]])
                    row[f"{prior}_est"] = float(est)
                    row[f"{prior}_se"] = float(sd)
                rows.append(row)
        return rows


def _chain_config(spec: StudySpec, prior: str, k: int, seed: RngStream) -> ChainConfig:
    hyper = {
        "ng": NgHyper(theta=spec.theta),
        "ssvs": SsvsHyper(),
        "flat": FlatHyper(),
    }[prior]
    return ChainConfig(
        n_components=k,
        prior=prior,
        family="multinomial" if spec.study == 1 else "gaussian",
        n_burn=spec.n_burn,
        n_save=spec.n_save,
        thin=spec.thin,
        snapshot_count=min(100, spec.n_save),
        seed=seed,
        gating_hyper=hyper,
    )


def _run_task(args: tuple[StudySpec, int, str]) -> dict:
    """One (replication, prior) cell; top-level so executors can pickle it."""
    spec, rep, prior = args
    data_stream = spec.rng.child(rep)
    if spec.study == 1:
        design1 = Study1Design(n_obs=spec.n_obs or 3000)
        data, truth = gen_study1(design1, data_stream)
        fit_data = data
    else:
        design2 = Study2Design(scenario=spec.scenario, n_obs=spec.n_obs or 300)
        data, truth = gen_study2(design2, data_stream)
        fit_data = data.with_intercept()

    pi = spec.priors.index(prior)
    fit_stream = spec.rng.child(1000 + rep * 10 + pi)
    cfg = _chain_config(spec, prior, truth["n_components"], fit_stream)
    store = run_chain(cfg, fit_data)

    out: dict = {"rep": rep, "prior": prior, "nonperm": None, "bf": [], "scatter": None}
    if spec.study == 1:
        out["report"] = compute_metrics(truth, store, fit_data)
        aligned = store
    else:
        ident_store, relab = identify(store, fit_stream.child(7))
        out["nonperm"] = relab.nonperm_rate
        out["report"] = compute_metrics(truth, ident_store, fit_data)
        aligned = align_to_truth(truth, ident_store)
        if spec.k_range:
            rows = marglik_for_k(fit_data, cfg, list(spec.k_range), ref_k=spec.ref_k)
            out["bf"] = [{**r, "replication": rep} for r in rows]
    est_mean = aligned.beta.mean(axis=0)
    est_sd = aligned.beta.std(axis=0, ddof=1)
    if est_mean.shape[1] == truth["betas"].shape[1] + 1:  # drop the intercept column
        est_mean = est_mean[:, 1:]
        est_sd = est_sd[:, 1:]
    out["coef_mean"] = est_mean
    out["coef_sd"] = est_sd
    out["true_betas"] = truth["betas"]
    if rep == 0:
        out["scatter"] = (truth["betas"].ravel().copy(), est_mean.ravel())
    return out


def run_study(spec: StudySpec, max_workers: int = 1) -> StudyResult:
    """Run every (replication, prior) cell and aggregate."""
    tasks = [(spec, rep, prior) for rep in range(spec.replications) for prior in spec.priors]
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    reports: dict[str, list[MetricsReport]] = {p: [] for p in spec.priors}
    nonperm: dict[str, list[float]] = {p: [] for p in spec.priors}
    bf_rows: dict[str, list[dict]] = {}
    scatter: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    coef_means: dict[str, list[np.ndarray]] = {p: [] for p in spec.priors}
    coef_sds: dict[str, list[np.ndarray]] = {p: [] for p in spec.priors}
    true_betas = None
    for res in results:
        prior = res["prior"]
        reports[prior].append(res["report"])
        if res["nonperm"] is not None:
            nonperm[prior].append(res["nonperm"])
        if res["bf"]:
            bf_rows.setdefault(prior, []).extend(res["bf"])
        if res["scatter"] is not None:
            scatter[PRIOR_LABELS[prior]] = res["scatter"]
        coef_means[prior].append(res["coef_mean"])
        coef_sds[prior].append(res["coef_sd"])
        true_betas = res["true_betas"]

    absolute, relative = aggregate_tables(reports, spec.priors)
    return StudyResult(
        spec=spec,
        reports=reports,
        nonperm_rates=nonperm,
        absolute=absolute,
        relative=relative,
        bf_rows=bf_rows,
        scatter=scatter,
        coef_means=coef_means,
        coef_sds=coef_sds,
        true_betas=true_betas,
    )


def _mean_metrics(reports: list[MetricsReport]) -> dict[str, float]:
    return {c: float(np.mean([getattr(r, c) for r in reports])) for c in METRIC_COLS}


def aggregate_tables(reports: dict[str, list[MetricsReport]], priors) -> tuple[list[dict], list[dict]]:
    """Absolute metric means per prior, plus the table of ratios relative to
    the normal-gamma row (misclassification stays absolute, as reported)."""
    absolute = []
    for prior in priors:
        row = {"prior": PRIOR_LABELS[prior]}
        row.update(_mean_metrics(reports[prior]))
        absolute.append(row)
    ng_row = next((r for r in absolute if r["prior"] == "NG"), absolute[-1])
    relative = []
    for row in absolute:
        rel = {"prior": row["prior"]}
        for c in METRIC_COLS:
            if c == "miscl_rate":
                rel[c] = row[c]
            else:
                rel[c] = row[c] / ng_row[c] if ng_row[c] > 0 else float("nan")
        relative.append(rel)
    return absolute, relative


def average_bf_table(bf_rows: list[dict]) -> list[dict]:
    """(K, mean log BF, sd) rows averaged over replications."""
    ks = sorted({r["K"] for r in bf_rows})
    out = []
    for k in ks:
        vals = np.array([r["log_bf_vs_ref"] for r in bf_rows if r["K"] == k])
        out.append(
            {
                "K": k,
                "mean_log_bf": float(vals.mean()),
                "sd_log_bf": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            }
        )
    return out
