import numpy as np

from moeshrink.rng import RngStream
from moeshrink.study import StudySpec, average_bf_table, run_study


def test_study1_smoke_tables_and_scatter():
    spec = StudySpec(
        study=1, rng=RngStream(77), priors=("flat", "ng"), replications=2,
        n_obs=100, n_save=150, n_burn=50,
    )
    result = run_study(spec)
    assert {r["prior"] for r in result.absolute} == {"Standard Prior", "NG"}
    ng = next(r for r in result.relative if r["prior"] == "NG")
    assert ng["rmse_zeros"] == 1.0 and ng["rmse_overall"] == 1.0
    assert set(result.scatter) == {"Standard Prior", "NG"}
    truth, est = result.scatter["NG"]
    assert truth.shape == est.shape == (60,)
    for reports in result.reports.values():
        assert len(reports) == 2
        for rep in reports:
            assert rep.decomposition_gap() < 1e-10


def test_study2_single_prior_relative_table_is_unity():
    spec = StudySpec(
        study=2, rng=RngStream(78), priors=("ng",), replications=1,
        n_save=200, n_burn=100, scenario="well-separated",
    )
    result = run_study(spec)
    row = result.relative[0]
    assert row["prior"] == "NG"
    for col in ("rmse_zeros", "rmse_nonzeros", "rmse_overall", "rmse_pp"):
        assert row[col] == 1.0
    assert len(result.nonperm_rates["ng"]) == 1


def test_parallel_matches_sequential():
    spec = StudySpec(
        study=1, rng=RngStream(79), priors=("ng",), replications=2,
        n_obs=100, n_save=80, n_burn=30,
    )
    seq = run_study(spec, max_workers=1)
    par = run_study(spec, max_workers=2)
    assert np.allclose(
        [r.rmse_overall for r in seq.reports["ng"]],
        [r.rmse_overall for r in par.reports["ng"]],
    )


def test_average_bf_table():
    rows = [
        {"K": 2, "log_bf_vs_ref": -3.0}, {"K": 2, "log_bf_vs_ref": -5.0},
        {"K": 4, "log_bf_vs_ref": 0.0}, {"K": 4, "log_bf_vs_ref": 0.0},
    ]
    tab = average_bf_table(rows)
    assert tab[0]["K"] == 2 and tab[0]["mean_log_bf"] == -4.0
    assert tab[1]["sd_log_bf"] == 0.0
