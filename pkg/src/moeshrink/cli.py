"""Command-line interface: simulate / fit / identify / marglik / study.

All randomness flows from a single --seed plus derived stream ids.  Every
command writes a manifest.json that suffices to reproduce its outputs.
Values in a --config YAML file override the corresponding flags.

Exit codes: 0 success (including non-convergence diagnostics), 2 usage,
3 data validation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bridge import bridge_for_store, marglik_for_k
from .data import DataValidationError, Dataset, load_dataset, write_matrix_csv
from .gibbs import ChainConfig, NumericalError, run_chain
from .identify import column_selector, identify
from .io import (
    config_to_dict,
    load_draws,
    posterior_summary_rows,
    save_bridge_audit,
    save_draws,
    save_relabeling,
    write_manifest,
)
from .kmeans import KMeansError
from .model import FlatHyper, NgHyper, SsvsHyper
from .report import (
    plot_dataset_scatter,
    plot_log_bf,
    plot_log_ml,
    plot_occurrence_probs,
    plot_relative_rmse,
    plot_true_vs_estimated,
    write_table_csv,
)
from .rng import RngStream
from .simulate import SCENARIOS, Study1Design, Study2Design, gen_study1, gen_study2
from .study import PRIOR_LABELS, StudySpec, average_bf_table, run_study

CONFIG_KEYS = {
    "K": "k",
    "prior": "prior",
    "family": "family",
    "theta": "theta",
    "c0": "c0",
    "c1": "c1",
    "burn": "burn",
    "save": "save",
    "thin": "thin",
    "seed": "seed",
    "snapshots": "snapshots",
}


def _add_chain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=4, help="number of mixture components")
    p.add_argument("--prior", choices=["ng", "ssvs", "flat"], default="ng")
    p.add_argument("--family", choices=["bernoulli", "gaussian", "multinomial"], default="bernoulli")
    p.add_argument("--theta", type=float, default=0.1,
                   help="normal-gamma local shape (0.1 for simulations, 0.05 for application-style runs)")
    p.add_argument("--c0", type=float, default=0.01, help="global-scale Gamma shape")
    p.add_argument("--c1", type=float, default=0.01, help="global-scale Gamma rate")
    p.add_argument("--spike-var", type=float, default=0.01)
    p.add_argument("--slab-var", type=float, default=1.0)
    p.add_argument("--prior-var", type=float, default=10.0, help="flat-prior variance")
    p.add_argument("--burn", type=int, default=1000)
    p.add_argument("--save", type=int, default=2000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--snapshots", type=int, default=100)
    p.add_argument("--intercept", action="store_true", help="prepend an all-ones column")


def _chain_config(args: argparse.Namespace, stream_id: int = 0) -> ChainConfig:
    hyper = {
        "ng": NgHyper(theta=args.theta, c0=args.c0, c1=args.c1),
        "ssvs": SsvsHyper(spike_var=args.spike_var, slab_var=args.slab_var),
        "flat": FlatHyper(prior_var=args.prior_var),
    }[args.prior]
    return ChainConfig(
        n_components=args.k,
        prior=args.prior,
        family=args.family,
        n_burn=args.burn,
        n_save=args.save,
        thin=args.thin,
        snapshot_count=min(args.snapshots, args.save),
        seed=RngStream(args.seed, stream_id),
        gating_hyper=hyper,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moeshrink",
        description="Bayesian mixture-of-experts with shrinkage priors on the gating network",
    )
    parser.add_argument("--version", action="version", version=f"moeshrink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic study datasets")
    sim.add_argument("--study", type=int, choices=[1, 2], required=True)
    sim.add_argument("--scenario", choices=list(SCENARIOS), help="study 2 scenario")
    sim.add_argument("--n", type=int, help="observations (study defaults: 3000 / 300)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", type=Path, default=Path("sim_out"))
    sim.add_argument("--config", type=Path)

    fit = sub.add_parser("fit", help="run the Gibbs sampler on CSV data")
    fit.add_argument("--responses", type=Path, required=True)
    fit.add_argument("--covariates", type=Path, required=True)
    _add_chain_flags(fit)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--identify", action="store_true", help="relabel the draws afterwards")
    fit.add_argument("--ident-params", type=str,
                     help="1-based identification columns, e.g. 1,3 (default: all)")
    fit.add_argument("--out", type=Path, default=Path("fit_out"))
    fit.add_argument("--config", type=Path)

    ide = sub.add_parser("identify", help="relabel a finished fit")
    ide.add_argument("--fit-dir", type=Path, required=True)
    ide.add_argument("--seed", type=int, default=0)
    ide.add_argument("--ident-params", type=str,
                     help="1-based identification columns, e.g. 1,3 (default: all)")
    ide.add_argument("--out", type=Path, help="defaults to FIT_DIR/identified")
    ide.add_argument("--config", type=Path)

    mar = sub.add_parser("marglik", help="bridge-sampling marginal likelihoods")
    mar.add_argument("--fit-dir", type=Path, help="bridge one finished fit")
    mar.add_argument("--responses", type=Path)
    mar.add_argument("--covariates", type=Path)
    mar.add_argument("--k-range", type=str, help="e.g. 2:6, fits internally per K")
    mar.add_argument("--ref", type=int, default=4, help="reference K for log Bayes factors")
    mar.add_argument("--importance-draws", type=int, help="L (default: match M)")
    mar.add_argument("--oracle", choices=["bernoulli-k1"], help="conjugate-oracle comparison mode")
    _add_chain_flags(mar)
    mar.add_argument("--seed", type=int, default=0)
    mar.add_argument("--out", type=Path, default=Path("marglik_out"))
    mar.add_argument("--config", type=Path)

    stu = sub.add_parser("study", help="replicate a simulation study")
    stu.add_argument("--id", type=int, choices=[1, 2], required=True)
    stu.add_argument("--n", type=int)
    stu.add_argument("--reps", type=int, default=5)
    stu.add_argument("--priors", type=str, default="flat,ssvs,ng")
    stu.add_argument("--scenario", choices=list(SCENARIOS), default="well-separated")
    stu.add_argument("--burn", type=int, default=1000)
    stu.add_argument("--save", type=int, default=5000)
    stu.add_argument("--thin", type=int, default=1)
    stu.add_argument("--theta", type=float, default=0.1)
    stu.add_argument("--k-range", type=str, help="also sweep K for log Bayes factors, e.g. 2:6")
    stu.add_argument("--ref", type=int, default=4)
    stu.add_argument("--coef-table", action="store_true",
                     help="also emit the per-coefficient estimate table")
    stu.add_argument("--threads", type=int, default=1, help="max concurrent replications")
    stu.add_argument("--seed", type=int, default=0)
    stu.add_argument("--out", type=Path, default=Path("study_out"))
    stu.add_argument("--config", type=Path)
    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    """Config-file values override the flags (documented precedence)."""
    if not getattr(args, "config", None):
        return
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh) or {}
    for key, value in cfg.items():
        dest = CONFIG_KEYS.get(key, key.replace("-", "_"))
        if not hasattr(args, dest):
            raise DataValidationError(f"unknown config key '{key}'")
        setattr(args, dest, value)


def _parse_k_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    stream = RngStream(args.seed)
    if args.study == 1:
        design = Study1Design(n_obs=args.n or 3000)
        data, truth = gen_study1(design, stream)
        write_matrix_csv(outdir / "responses.csv", ["label"], truth["labels"][:, None].astype(float), fmt="%d")
    else:
        if not args.scenario:
            raise DataValidationError("--scenario is required for study 2")
        design2 = Study2Design(scenario=args.scenario, n_obs=args.n or 300)
        data, truth = gen_study2(design2, stream)
        write_matrix_csv(outdir / "responses.csv", data.response_names, data.responses)
        plot_dataset_scatter(
            data.responses, truth["labels"], outdir / "scatter.png", title=args.scenario
        )
    write_matrix_csv(outdir / "covariates.csv", data.covariate_names, data.covariates)
    k = truth["n_components"]
    truth_cols = ["label"] + [f"prob_{j + 1}" for j in range(k)]
    truth_mat = np.hstack([truth["labels"][:, None].astype(float), truth["probs"]])
    write_matrix_csv(outdir / "truth.csv", truth_cols, truth_mat)
    config = {
        "study": args.study,
        "scenario": getattr(args, "scenario", None),
        "n": data.n_obs,
        "seed": args.seed,
    }
    extras = {"truth": {key: truth[key] for key in truth if key != "probs"}}
    outputs = ["responses.csv", "covariates.csv", "truth.csv"]
    write_manifest(outdir, "simulate", config, outputs, extras)
    print(f"wrote {data.n_obs}-row dataset to {outdir}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    data = load_dataset(
        args.responses,
        args.covariates,
        add_intercept=args.intercept,
        supervised=args.family == "multinomial",
    )
    config = _chain_config(args)
    store = run_chain(config, data)
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    save_draws(outdir, store)
    outputs = ["draws.csv", "labels.csv", "snapshots.npz", "draws_manifest.json"]
    summary_store = store
    if args.identify and config.family != "multinomial" and config.n_components > 1:
        ident_dir = outdir / "identified"
        ident_store, relab = identify(
            store, RngStream(args.seed, 1), param_selector=column_selector(args.ident_params)
        )
        ident_dir.mkdir(exist_ok=True)
        save_draws(ident_dir, ident_store)
        save_relabeling(ident_dir, relab)
        outputs += ["identified/draws.csv", "identified/relabel.json"]
        summary_store = ident_store
        print(f"nonperm_rate: {relab.nonperm_rate:.4f} ({len(relab.retained)}/{store.n_draws} retained)")
    write_table_csv(outdir / "summary.csv", posterior_summary_rows(summary_store))
    outputs.append("summary.csv")
    if summary_store.gamma is not None:
        names = data.response_names or [f"y{j + 1}" for j in range(summary_store.gamma.shape[2])]
        plot_occurrence_probs(summary_store.gamma.mean(axis=0), names, outdir / "occurrence_probs.png")
        outputs.append("occurrence_probs.png")
    write_manifest(outdir, "fit", config_to_dict(config), outputs)
    print(f"saved {store.n_draws} draws to {outdir} ({store.runtime_sec:.1f}s)")
    return 0


def cmd_identify(args: argparse.Namespace) -> int:
    store = load_draws(args.fit_dir)
    outdir = args.out or (args.fit_dir / "identified")
    outdir.mkdir(parents=True, exist_ok=True)
    ident_store, relab = identify(
        store, RngStream(args.seed, 1), param_selector=column_selector(args.ident_params)
    )
    save_draws(outdir, ident_store)
    save_relabeling(outdir, relab)
    write_table_csv(outdir / "summary.csv", posterior_summary_rows(ident_store))
    write_manifest(
        outdir,
        "identify",
        {"fit_dir": str(args.fit_dir), "seed": args.seed},
        ["draws.csv", "relabel.json", "summary.csv"],
        {"nonperm_rate": relab.nonperm_rate},
    )
    print(f"nonperm_rate: {relab.nonperm_rate:.4f} ({len(relab.retained)}/{store.n_draws} retained)")
    return 0


def _analytic_bernoulli_k1_logml(data: Dataset, a0: float, b0: float) -> float:
    from scipy.special import betaln

    y = data.responses
    n = y.shape[0]
    total = 0.0
    for j in range(y.shape[1]):
        nj = float(y[:, j].sum())
        total += betaln(a0 + nj, b0 + n - nj) - betaln(a0, b0)
    return total


def cmd_marglik(args: argparse.Namespace) -> int:
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)

    if args.oracle == "bernoulli-k1":
        if args.responses and args.covariates:
            data = load_dataset(args.responses, args.covariates, add_intercept=args.intercept)
        else:
            gen = RngStream(args.seed, 99).generator()
            y = (gen.random((30, 2)) < np.array([0.7, 0.3])).astype(float)
            data = Dataset(responses=y, covariates=np.ones((30, 1)), intercept_included=True,
                           response_names=["y1", "y2"], covariate_names=["intercept"])
        data.validate_binary()
        cfg = replace(_chain_config(args), n_components=1, family="bernoulli")
        store = run_chain(cfg, data)
        result, audit = bridge_for_store(
            store, data, RngStream(args.seed, 2), n_importance=args.importance_draws
        )
        analytic = _analytic_bernoulli_k1_logml(data, cfg.beta_a0, cfg.beta_b0)
        save_bridge_audit(outdir, result, audit, tag="oracle")
        print(f"analytic log ML : {analytic:+.6f}")
        print(f"bridge  log ML : {result.log_ml:+.6f} (error {result.log_ml - analytic:+.2e}, "
              f"{result.iterations} iterations, converged={result.converged})")
        write_manifest(outdir, "marglik", {"oracle": "bernoulli-k1", "seed": args.seed},
                       ["bridge_result_oracle.json", "bridge_eval_oracle.csv"],
                       {"analytic_log_ml": analytic, "bridge_log_ml": result.log_ml})
        return 0

    rows: list[dict]
    outputs: list[str] = []
    if args.fit_dir or args.k_range:
        if not (args.responses and args.covariates):
            raise DataValidationError("marglik needs --responses and --covariates")
    if args.fit_dir:
        store = load_draws(args.fit_dir)
        manifest = store.config
        data = load_dataset(
            args.responses, args.covariates,
            add_intercept=args.intercept,
            supervised=manifest.family == "multinomial",
        )
        result, audit = bridge_for_store(
            store, data, RngStream(args.seed, 2), n_importance=args.importance_draws
        )
        save_bridge_audit(outdir, result, audit, tag=f"k{manifest.n_components}")
        rows = [{
            "K": manifest.n_components,
            "log_ml": result.log_ml,
            "se_proxy": result.se_proxy,
            "converged": result.converged,
            "iterations": result.iterations,
            "log_bf_vs_ref": 0.0,
            "ref_K": manifest.n_components,
        }]
        outputs += [f"bridge_result_k{manifest.n_components}.json"]
        if not result.converged:
            print("warning: bridge recursion did not converge (diagnostic, exit 0)")
    else:
        if not args.k_range:
            raise DataValidationError("marglik needs either --fit-dir or --k-range")
        data = load_dataset(args.responses, args.covariates, add_intercept=args.intercept,
                            supervised=False)
        k_list = _parse_k_range(args.k_range)
        base = _chain_config(args)
        rows = marglik_for_k(data, base, k_list, ref_k=args.ref,
                             n_importance=args.importance_draws)
        if not all(r["converged"] for r in rows):
            print("warning: bridge recursion did not converge for some K (diagnostic, exit 0)")

    write_table_csv(outdir / "logml_by_k.csv",
                    rows, ["K", "log_ml", "se_proxy", "log_bf_vs_ref", "ref_K", "converged", "iterations"])
    outputs.append("logml_by_k.csv")
    if len(rows) > 1:
        bf_rows = [{"K": r["K"], "mean_log_bf": r["log_bf_vs_ref"], "sd_log_bf": 0.0} for r in rows]
        plot_log_bf(bf_rows, rows[0]["ref_K"], outdir / "logbf_plot.png")
        plot_log_ml(rows, outdir / "logml_plot.png")
        outputs += ["logbf_plot.png", "logml_plot.png"]
    config = {"k_range": args.k_range, "ref": args.ref, "seed": args.seed,
              "fit_dir": str(args.fit_dir) if args.fit_dir else None}
    write_manifest(outdir, "marglik", config, outputs)
    for r in rows:
        print(f"K={r['K']}: log ML {r['log_ml']:+.3f}  log BF vs K={r['ref_K']}: {r['log_bf_vs_ref']:+.3f}")
    return 0


def cmd_study(args: argparse.Namespace) -> int:
    priors = tuple(p.strip() for p in args.priors.split(",") if p.strip())
    spec = StudySpec(
        study=args.id,
        rng=RngStream(args.seed),
        priors=priors,
        replications=args.reps,
        n_obs=args.n,
        scenario=args.scenario,
        n_save=args.save,
        n_burn=args.burn,
        thin=args.thin,
        theta=args.theta,
        k_range=tuple(_parse_k_range(args.k_range)) if args.k_range else (),
        ref_k=args.ref,
    )
    result = run_study(spec, max_workers=max(1, args.threads))
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    write_table_csv(outdir / "study_absolute.csv", result.absolute)
    write_table_csv(outdir / "study_relative.csv", result.relative)
    write_table_csv(outdir / "study_replications.csv", result.per_replication_rows())
    outputs = ["study_absolute.csv", "study_relative.csv", "study_replications.csv"]
    if args.coef_table:
        write_table_csv(outdir / "coefficients.csv", result.coefficient_rows())
        outputs.append("coefficients.csv")
    plot_relative_rmse(result.relative, outdir / "relative_rmse.png",
                       title=f"Study {args.id}" + (f" ({args.scenario})" if args.id == 2 else ""))
    outputs.append("relative_rmse.png")
    if result.scatter:
        plot_true_vs_estimated(result.scatter, outdir / "true_vs_estimated.png")
        outputs.append("true_vs_estimated.png")
    if args.id == 2:
        nonperm_rows = [
            {"prior": PRIOR_LABELS[p], "mean_nonperm_rate": float(np.mean(v)) if v else float("nan")}
            for p, v in result.nonperm_rates.items()
        ]
        write_table_csv(outdir / "nonperm_rates.csv", nonperm_rows)
        outputs.append("nonperm_rates.csv")
    for prior, rows in result.bf_rows.items():
        tab = average_bf_table(rows)
        write_table_csv(outdir / f"logbf_{prior}.csv", tab)
        plot_log_bf(tab, spec.ref_k, outdir / f"logbf_{prior}.png", title=PRIOR_LABELS[prior])
        outputs += [f"logbf_{prior}.csv", f"logbf_{prior}.png"]
    config = {
        "study": args.id, "priors": list(priors), "reps": args.reps, "n": args.n,
        "scenario": args.scenario, "burn": args.burn, "save": args.save,
        "thin": args.thin, "theta": args.theta, "seed": args.seed,
        "k_range": args.k_range, "ref": args.ref,
    }
    write_manifest(outdir, "study", config, outputs)
    for row in result.relative:
        print(
            f"{row['prior']:>14}: rel rmse_zeros {row['rmse_zeros']:.2f}  "
            f"rel rmse_overall {row['rmse_overall']:.2f}  miscl {row['miscl_rate']:.3f}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        handler = {
            "simulate": cmd_simulate,
            "fit": cmd_fit,
            "identify": cmd_identify,
            "marglik": cmd_marglik,
            "study": cmd_study,
        }[args.command]
        return handler(args)
    except DataValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, KMeansError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
