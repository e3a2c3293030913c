"""Run artifacts on disk: draws as columnar CSV, snapshots as an npz archive,
and JSON manifests that make every run reproducible bit-for-bit."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import BridgeResult
from .data import write_matrix_csv
from .gibbs import ChainConfig, DrawsStore, ImportanceSnapshot
from .identify import RelabelResult
from .model import FlatHyper, NgHyper, SsvsHyper
from .rng import RngStream


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_manifest(outdir: Path, command: str, config: dict, outputs: list[str], extras: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "outputs": outputs,
        "version": __version__,
        "created_unix": time.time(),
    }
    if extras:
        manifest.update(extras)
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=_jsonify)
    return path


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def read_manifest(outdir: Path) -> dict:
    with open(Path(outdir) / "manifest.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# draws store round trip
# ---------------------------------------------------------------------------

def _hyper_dict(config: ChainConfig) -> dict:
    h = config.resolved_hyper()
    if isinstance(h, NgHyper):
        return {"theta": h.theta, "c0": h.c0, "c1": h.c1}
    if isinstance(h, SsvsHyper):
        return {"spike_var": h.spike_var, "slab_var": h.slab_var, "incl_prob": h.incl_prob}
    return {"prior_var": h.prior_var}


def _hyper_from_dict(prior: str, d: dict):
    if prior == "ng":
        return NgHyper(**d)
    if prior == "ssvs":
        return SsvsHyper(**d)
    return FlatHyper(**d)


def config_to_dict(config: ChainConfig) -> dict:
    return {
        "n_components": config.n_components,
        "prior": config.prior,
        "family": config.family,
        "n_burn": config.n_burn,
        "n_save": config.n_save,
        "thin": config.thin,
        "snapshot_count": config.snapshot_count,
        "seed": config.seed.seed,
        "stream_id": config.seed.stream_id,
        "hyper": _hyper_dict(config),
        "beta_a0": config.beta_a0,
        "beta_b0": config.beta_b0,
        "permute": config.permute,
    }


def config_from_dict(d: dict) -> ChainConfig:
    return ChainConfig(
        n_components=d["n_components"],
        prior=d["prior"],
        family=d["family"],
        n_burn=d["n_burn"],
        n_save=d["n_save"],
        thin=d["thin"],
        snapshot_count=d["snapshot_count"],
        seed=RngStream(d["seed"], d["stream_id"]),
        gating_hyper=_hyper_from_dict(d["prior"], d["hyper"]),
        beta_a0=d["beta_a0"],
        beta_b0=d["beta_b0"],
        permute=d["permute"],
    )


def draw_columns(store: DrawsStore) -> tuple[list[str], np.ndarray]:
    """Flatten every saved parameter block into named columns, draw-major."""
    m = store.n_draws
    k = store.n_components
    cols: list[str] = ["draw"]
    parts: list[np.ndarray] = [np.arange(1, m + 1, dtype=float)[:, None]]

    km1, p = store.beta.shape[1:]
    for kk in range(km1):
        for pp in range(p):
            cols.append(f"beta_{kk + 1}_{pp + 1}")
    parts.append(store.beta.reshape(m, km1 * p))

    if store.lam is not None:
        cols += [f"lambda_{kk + 1}" for kk in range(km1)]
        parts.append(store.lam)
        for kk in range(km1):
            for pp in range(p):
                cols.append(f"tau2_{kk + 1}_{pp + 1}")
        parts.append(store.tau2.reshape(m, km1 * p))
    if store.delta is not None:
        for kk in range(km1):
            for pp in range(p):
                cols.append(f"delta_{kk + 1}_{pp + 1}")
        parts.append(store.delta.reshape(m, km1 * p).astype(float))
    if store.gamma is not None:
        j = store.gamma.shape[2]
        for kk in range(k):
            for jj in range(j):
                cols.append(f"gamma_{kk + 1}_{jj + 1}")
        parts.append(store.gamma.reshape(m, k * j))
    if store.mu is not None:
        d = store.mu.shape[2]
        for kk in range(k):
            for dd in range(d):
                cols.append(f"mu_{kk + 1}_{dd + 1}")
        parts.append(store.mu.reshape(m, k * d))
        for kk in range(k):
            for i in range(d):
                for jj in range(d):
                    cols.append(f"sigma_{kk + 1}_{i + 1}_{jj + 1}")
        parts.append(store.sigma.reshape(m, k * d * d))
    cols.append("loglik")
    parts.append(store.loglik[:, None])
    return cols, np.hstack(parts)


def save_draws(outdir: str | Path, store: DrawsStore) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cols, mat = draw_columns(store)
    write_matrix_csv(outdir / "draws.csv", cols, mat)
    write_matrix_csv(
        outdir / "labels.csv",
        [f"obs_{i + 1}" for i in range(store.labels.shape[1])],
        store.labels.astype(float),
        fmt="%d",
    )
    np.savez_compressed(outdir / "snapshots.npz", **_snapshots_arrays(store))
    meta = {
        "chain_config": config_to_dict(store.config),
        "n_draws": store.n_draws,
        "n_obs": int(store.labels.shape[1]),
        "runtime_sec": store.runtime_sec,
        "perms": store.perms.tolist(),
    }
    with open(outdir / "draws_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=_jsonify)


def _snapshots_arrays(store: DrawsStore) -> dict:
    out: dict = {}
    snaps = store.snapshots
    if snaps:
        out["snap_beta_mean"] = np.stack([s.beta_mean for s in snaps])
        out["snap_beta_cov"] = np.stack([s.beta_cov for s in snaps])
        for key in snaps[0].comp_params:
            out[f"snap_comp_{key}"] = np.stack([s.comp_params[key] for s in snaps])
    if store.comp_hyper:
        if "a0" in store.comp_hyper:
            out["hyper_a0"] = store.comp_hyper["a0"]
            out["hyper_b0"] = store.comp_hyper["b0"]
        else:
            niw = store.comp_hyper["niw"]
            out["hyper_m0"] = niw["m0"]
            out["hyper_kappa0"] = np.array(niw["kappa0"])
            out["hyper_nu0"] = np.array(niw["nu0"])
            out["hyper_psi0"] = niw["psi0"]
    return out


def load_draws(outdir: str | Path) -> DrawsStore:
    outdir = Path(outdir)
    with open(outdir / "draws_manifest.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    config = config_from_dict(meta["chain_config"])
    k = config.n_components
    header = open(outdir / "draws.csv", encoding="utf-8").readline().strip().split(",")
    mat = np.loadtxt(outdir / "draws.csv", delimiter=",", skiprows=1, ndmin=2)
    col = {name: i for i, name in enumerate(header)}
    m = mat.shape[0]

    def block(prefix: str, shape: tuple[int, ...]) -> np.ndarray | None:
        names = [c for c in header if c.startswith(prefix)]
        if not names:
            return None
        idx = [col[c] for c in names]
        return mat[:, idx].reshape((m,) + shape)

    km1 = k - 1
    p = sum(1 for c in header if c.startswith("beta_1_")) if km1 else 0
    if km1 == 0:
        p = 0
    beta = mat[:, [col[c] for c in header if c.startswith("beta_")]].reshape(m, km1, p) if km1 else np.empty((m, 0, 0))

    labels = np.loadtxt(outdir / "labels.csv", delimiter=",", skiprows=1, ndmin=2).astype(int)

    npz = np.load(outdir / "snapshots.npz")
    comp_hyper: dict = {}
    gamma = mu = sigma = None
    if "hyper_a0" in npz:
        comp_hyper = {"a0": npz["hyper_a0"], "b0": npz["hyper_b0"]}
        j = comp_hyper["a0"].shape[0]
        gamma = block("gamma_", (k, j))
    elif "hyper_m0" in npz:
        comp_hyper = {
            "niw": {
                "m0": npz["hyper_m0"],
                "kappa0": float(npz["hyper_kappa0"]),
                "nu0": float(npz["hyper_nu0"]),
                "psi0": npz["hyper_psi0"],
            }
        }
        d = npz["hyper_m0"].shape[0]
        mu = block("mu_", (k, d))
        sigma = block("sigma_", (k, d, d))

    snapshots = []
    if "snap_beta_mean" in npz:
        s_count = npz["snap_beta_mean"].shape[0]
        comp_keys = [key[10:] for key in npz.files if key.startswith("snap_comp_")]
        for s in range(s_count):
            snapshots.append(
                ImportanceSnapshot(
                    beta_mean=npz["snap_beta_mean"][s],
                    beta_cov=npz["snap_beta_cov"][s],
                    family=config.family,
                    comp_params={key: npz[f"snap_comp_{key}"][s] for key in comp_keys},
                )
            )

    lam = block("lambda_", (km1,))
    tau2 = block("tau2_", (km1, p)) if km1 else None
    delta_f = block("delta_", (km1, p)) if km1 else None
    return DrawsStore(
        config=config,
        beta=beta,
        labels=labels,
        lam=lam,
        tau2=tau2,
        delta=None if delta_f is None else delta_f.astype(int),
        gamma=gamma,
        mu=mu,
        sigma=sigma,
        perms=np.asarray(meta["perms"], dtype=int),
        loglik=mat[:, col["loglik"]],
        snapshots=snapshots,
        runtime_sec=meta["runtime_sec"],
        comp_hyper=comp_hyper,
    )


def save_relabeling(outdir: str | Path, result: RelabelResult) -> None:
    payload = {
        "nonperm_rate": result.nonperm_rate,
        "retained": result.retained.tolist(),
        "permutations": result.permutations.tolist(),
    }
    with open(Path(outdir) / "relabel.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def save_bridge_audit(outdir: str | Path, result: BridgeResult, audit: dict, tag: str = "") -> None:
    outdir = Path(outdir)
    suffix = f"_{tag}" if tag else ""
    n_imp = len(audit["log_pstar_imp"])
    n_mcmc = len(audit["log_pstar_mcmc"])
    rows = np.empty((n_imp + n_mcmc, 4), dtype=object)
    rows[:n_imp, 0] = "importance"
    rows[n_imp:, 0] = "mcmc"
    rows[:n_imp, 1] = np.arange(1, n_imp + 1)
    rows[n_imp:, 1] = np.arange(1, n_mcmc + 1)
    rows[:n_imp, 2] = audit["log_pstar_imp"]
    rows[n_imp:, 2] = audit["log_pstar_mcmc"]
    rows[:n_imp, 3] = audit["log_q_imp"]
    rows[n_imp:, 3] = audit["log_q_mcmc"]
    with open(outdir / f"bridge_eval{suffix}.csv", "w", encoding="utf-8") as fh:
        fh.write("draw_set,index,log_pstar,log_q\n")
        for r in rows:
            fh.write(f"{r[0]},{int(r[1])},{r[2]:.10g},{r[3]:.10g}\n")
    payload = {
        "log_ml": result.log_ml,
        "iterations": result.iterations,
        "converged": result.converged,
        "start_log_ml_is": result.start_log_ml_is,
        "start_log_ml_ris": result.start_log_ml_ris,
        "rel_step_at_stop": result.rel_step_at_stop,
        "se_proxy": result.se_proxy,
        "lam_hat": None if result.lam_hat is None else result.lam_hat.tolist(),
    }
    with open(outdir / f"bridge_result{suffix}.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def posterior_summary_rows(store: DrawsStore) -> list[dict]:
    cols, mat = draw_columns(store)
    rows = []
    for i, name in enumerate(cols):
        if name == "draw":
            continue
        v = mat[:, i]
        rows.append(
            {
                "parameter": name,
                "mean": float(v.mean()),
                "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                "q05": float(np.quantile(v, 0.05)),
                "q50": float(np.quantile(v, 0.50)),
                "q95": float(np.quantile(v, 0.95)),
            }
        )
    return rows
