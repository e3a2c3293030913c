import json
from pathlib import Path

import numpy as np
import pytest

from moeshrink.cli import main


def _read(path: Path) -> bytes:
    return path.read_bytes()


class TestSimulate:
    def test_study2_outputs(self, tmp_path):
        out = tmp_path / "sim"
        rc = main(["simulate", "--study", "2", "--scenario", "well-separated",
                   "--seed", "7", "--out", str(out)])
        assert rc == 0
        for name in ["responses.csv", "covariates.csv", "truth.csv", "manifest.json", "scatter.png"]:
            assert (out / name).exists()
        rows = np.loadtxt(out / "responses.csv", delimiter=",", skiprows=1)
        assert rows.shape == (300, 2)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert np.asarray(manifest["truth"]["betas"]).shape == (3, 20)

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["simulate", "--study", "2", "--scenario", "overlapping",
                         "--seed", "3", "--out", str(out)]) == 0
        for name in ["responses.csv", "covariates.csv", "truth.csv"]:
            assert _read(a / name) == _read(b / name)

    def test_missing_scenario_is_an_error(self, tmp_path):
        rc = main(["simulate", "--study", "2", "--out", str(tmp_path / "x")])
        assert rc == 3

    def test_study1_writes_labels(self, tmp_path):
        out = tmp_path / "s1"
        assert main(["simulate", "--study", "1", "--n", "300", "--seed", "1",
                     "--out", str(out)]) == 0
        labels = np.loadtxt(out / "responses.csv", delimiter=",", skiprows=1)
        assert labels.shape == (300,)
        assert set(np.unique(labels)) <= {1.0, 2.0, 3.0, 4.0}


class TestFitAndIdentify:
    @pytest.fixture()
    def simdir(self, tmp_path):
        out = tmp_path / "sim"
        main(["simulate", "--study", "2", "--scenario", "well-separated",
              "--seed", "11", "--out", str(out)])
        return out

    def test_fit_identify_smoke(self, simdir, tmp_path):
        fit = tmp_path / "fit"
        rc = main(["fit", "--responses", str(simdir / "responses.csv"),
                   "--covariates", str(simdir / "covariates.csv"),
                   "--family", "gaussian", "--k", "4", "--prior", "ng",
                   "--intercept", "--burn", "150", "--save", "300",
                   "--snapshots", "30", "--seed", "5", "--identify",
                   "--out", str(fit)])
        assert rc == 0
        assert (fit / "draws.csv").exists()
        assert (fit / "summary.csv").exists()
        assert (fit / "identified" / "relabel.json").exists()
        relab = json.loads((fit / "identified" / "relabel.json").read_text())
        assert 0.0 <= relab["nonperm_rate"] <= 1.0

    def test_fit_rerun_reproducible(self, simdir, tmp_path):
        outs = []
        for tag in ("f1", "f2"):
            fit = tmp_path / tag
            assert main(["fit", "--responses", str(simdir / "responses.csv"),
                         "--covariates", str(simdir / "covariates.csv"),
                         "--family", "gaussian", "--k", "3", "--prior", "flat",
                         "--intercept", "--burn", "40", "--save", "60",
                         "--snapshots", "10", "--seed", "9", "--out", str(fit)]) == 0
            outs.append(_read(fit / "draws.csv"))
        assert outs[0] == outs[1]

    def test_binary_validation_names_column(self, simdir, tmp_path, capsys):
        rc = main(["fit", "--responses", str(simdir / "responses.csv"),
                   "--covariates", str(simdir / "covariates.csv"),
                   "--family", "bernoulli", "--k", "2",
                   "--out", str(tmp_path / "bad")])
        assert rc == 3
        err = capsys.readouterr().err
        assert "y1" in err and "not binary" in err

    def test_bernoulli_k4_fit_reports_nonperm_rate(self, tmp_path, capsys):
        # four well-separated binary prototypes, mixture-of-experts fit
        gen = np.random.default_rng(123)
        protos = np.array([[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9], [0.9, 0.9, 0.9]])
        labels = np.tile(np.arange(4), 50)
        y = (gen.random((200, 3)) < protos[labels]).astype(int)
        x = gen.standard_normal((200, 2))
        sim = tmp_path / "bdata"
        sim.mkdir()
        np.savetxt(sim / "responses.csv", y, delimiter=",", header="y1,y2,y3", comments="", fmt="%d")
        np.savetxt(sim / "covariates.csv", x, delimiter=",", header="x1,x2", comments="")
        fit = tmp_path / "bfit"
        rc = main(["fit", "--responses", str(sim / "responses.csv"),
                   "--covariates", str(sim / "covariates.csv"),
                   "--family", "bernoulli", "--k", "4", "--prior", "ng",
                   "--intercept", "--burn", "200", "--save", "400",
                   "--snapshots", "40", "--seed", "8", "--identify",
                   "--out", str(fit)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "nonperm_rate" in out
        assert (fit / "occurrence_probs.png").exists()
        manifest = json.loads((fit / "manifest.json").read_text())
        assert manifest["config"]["prior"] == "ng"

    def test_prior_flag_recorded_in_manifest(self, simdir, tmp_path):
        for prior in ("flat", "ssvs"):
            fit = tmp_path / f"fit_{prior}"
            assert main(["fit", "--responses", str(simdir / "responses.csv"),
                         "--covariates", str(simdir / "covariates.csv"),
                         "--family", "gaussian", "--k", "2", "--prior", prior,
                         "--intercept", "--burn", "20", "--save", "40",
                         "--snapshots", "10", "--seed", "3", "--out", str(fit)]) == 0
            manifest = json.loads((fit / "manifest.json").read_text())
            assert manifest["config"]["prior"] == prior

    def test_identify_command_on_fit_dir(self, simdir, tmp_path):
        fit = tmp_path / "fit2"
        main(["fit", "--responses", str(simdir / "responses.csv"),
              "--covariates", str(simdir / "covariates.csv"),
              "--family", "gaussian", "--k", "4", "--prior", "ng", "--intercept",
              "--burn", "100", "--save", "200", "--snapshots", "20",
              "--seed", "6", "--out", str(fit)])
        rc = main(["identify", "--fit-dir", str(fit), "--seed", "2"])
        assert rc == 0
        assert (fit / "identified" / "draws.csv").exists()


class TestMarglik:
    def test_oracle_mode(self, tmp_path, capsys):
        out = tmp_path / "m"
        rc = main(["marglik", "--oracle", "bernoulli-k1", "--seed", "4",
                   "--burn", "100", "--save", "1500", "--snapshots", "50",
                   "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "analytic log ML" in text and "bridge  log ML" in text
        result = json.loads((out / "bridge_result_oracle.json").read_text())
        manifest = json.loads((out / "manifest.json").read_text())
        assert abs(result["log_ml"] - manifest["analytic_log_ml"]) < 0.05
        assert (out / "bridge_eval_oracle.csv").exists()

    def test_k_range_table_and_plots(self, tmp_path):
        sim = tmp_path / "sim"
        main(["simulate", "--study", "2", "--scenario", "well-separated",
              "--n", "120", "--seed", "13", "--out", str(sim)])
        out = tmp_path / "ml"
        rc = main(["marglik", "--responses", str(sim / "responses.csv"),
                   "--covariates", str(sim / "covariates.csv"),
                   "--family", "gaussian", "--intercept", "--prior", "ng",
                   "--k-range", "2:3", "--ref", "2", "--burn", "80",
                   "--save", "200", "--snapshots", "20", "--seed", "3",
                   "--out", str(out)])
        assert rc == 0
        table = (out / "logml_by_k.csv").read_text().splitlines()
        assert table[0].startswith("K,log_ml")
        assert len(table) == 3
        assert (out / "logbf_plot.png").exists()
        assert (out / "logml_plot.png").exists()
        ref_row = table[1].split(",")
        assert float(ref_row[3]) == 0.0  # log BF of the reference against itself

    def test_requires_inputs(self, tmp_path):
        assert main(["marglik", "--out", str(tmp_path / "x")]) == 3


class TestStudyCommand:
    def test_tiny_study1(self, tmp_path, capsys):
        out = tmp_path / "study"
        rc = main(["study", "--id", "1", "--n", "100", "--reps", "2",
                   "--priors", "flat,ng", "--burn", "50", "--save", "150",
                   "--seed", "21", "--out", str(out)])
        assert rc == 0
        rel = (out / "study_relative.csv").read_text().splitlines()
        assert len(rel) == 3
        ng_row = [r for r in rel[1:] if r.startswith("NG")][0]
        assert ",1.0," in ng_row or ng_row.split(",")[1] == "1.0"
        assert (out / "relative_rmse.png").exists()
        assert (out / "true_vs_estimated.png").exists()

    def test_reps_zero_rejected(self, tmp_path):
        rc = main(["study", "--id", "1", "--reps", "0", "--out", str(tmp_path / "x")])
        assert rc == 3


class TestConfigFile:
    def test_config_overrides_flags(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("seed: 99\n")
        a = tmp_path / "a"
        b = tmp_path / "b"
        main(["simulate", "--study", "2", "--scenario", "overlapping",
              "--seed", "1", "--config", str(cfg), "--out", str(a)])
        main(["simulate", "--study", "2", "--scenario", "overlapping",
              "--seed", "99", "--out", str(b)])
        assert _read(a / "responses.csv") == _read(b / "responses.csv")

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("bogus_key: 1\n")
        rc = main(["simulate", "--study", "2", "--scenario", "overlapping",
                   "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert rc == 3


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["fit"])  # missing required arguments
    assert exc.value.code == 2
