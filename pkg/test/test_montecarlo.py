import json
import pytest
import numpy as np

from pathlib import Path

from lsi.density import KernelDensityField
from lsi.estimators import EstimatorKind, default_grid, estimate
from lsi.exceptions import ReplicateFailureError
from lsi.montecarlo import (McConfig, estimator_labels, fit_rate, rate_report, reference_truth, replicate_seed,
                            run_replicate, run_study, splitmix64, standardized, theoretical_rates,
                            theoretical_slopes, write_histograms)
from lsi.montecarlo.study import _summarize


EXAMPLE_STUDY = Path(__file__).resolve().parent.parent / "example" / "perimeter_study.json"


def _config(**changes) -> McConfig:
    base = dict(
        truth={"family": "gaussian", "dim": 2},
        level=0.05,
        n_list=[300, 600],
        h_rule={"rule": "fixed", "h": 0.45},
        replicates=2,
        base_seed=17,
        estimators=[{"estimator": "plugin"}, {"estimator": "band"}],
        grid_res=64,
        truth_value=9.5606,
    )
    base.update(changes)
    return McConfig(**base)


# ---------------------------
# Seeds
# ---------------------------

def test_splitmix64_reference_output():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert 0 <= splitmix64(2 ** 64 - 1) < 2 ** 64


def test_replicate_seeds_are_pure_and_distinct():
    assert replicate_seed(7, 3, 1000) == replicate_seed(7, 3, 1000)
    seeds = {replicate_seed(7, r, n) for r in range(50) for n in (500, 1000)}
    assert len(seeds) == 100


# ---------------------------
# Configuration
# ---------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        _config(n_list=[600, 300])
    with pytest.raises(ValueError):
        _config(n_list=[])
    with pytest.raises(ValueError):
        _config(replicates=0)
    with pytest.raises(TypeError):
        _config(replicates=2.0)
    with pytest.raises(ValueError):
        _config(alpha=0.0)
    with pytest.raises(ValueError):
        _config(h_rule={"rule": "silverman"})
    with pytest.raises(ValueError):
        _config(h_rule={"rule": "fixed", "h": -1.0})
    with pytest.raises(ValueError):
        _config(estimators=[{"estimator": "band", "eps": 0.0}])
    with pytest.raises(ValueError):
        _config(truth={"family": "cauchy"})


def test_config_json(tmp_path):
    cfg = _config()
    loaded = McConfig.from_json(cfg.to_json(tmp_path / "study.json"))
    assert loaded.to_dict() == cfg.to_dict()

    data = cfg.to_dict()
    data["repetitions"] = 5
    with pytest.raises(ValueError):
        McConfig.from_dict(data)
    with pytest.raises(FileNotFoundError):
        McConfig.from_json(tmp_path / "missing.json")


def test_example_study_loads():
    cfg = McConfig.from_json(EXAMPLE_STUDY)
    assert cfg.dim == 2
    assert [k.tag for k in cfg.kinds] == ["plugin", "band", "tube"]
    assert cfg.bandwidth(64) == pytest.approx(0.5)


def test_bandwidth_rules():
    assert _config().bandwidth(10 ** 6) == 0.45
    assert _config().h_exponent == 0.0

    cfg = _config(h_rule={"rule": "power", "scale": 2.0})
    assert cfg.h_exponent == pytest.approx(1.0 / 6.0)
    assert cfg.bandwidth(64) == pytest.approx(1.0)


def test_estimator_labels():
    kinds = [EstimatorKind.band(0.1), EstimatorKind.plugin(), EstimatorKind.band(0.2)]
    assert estimator_labels(kinds) == ["band_0", "plugin", "band_2"]


# ---------------------------
# Rates
# ---------------------------

def test_theoretical_slope_for_sixth_root_bandwidth():
    slopes = theoretical_slopes(1.0 / 6.0, 2)
    assert slopes["stochastic"] == pytest.approx(-5.0 / 12.0)
    assert slopes["bias"] == pytest.approx(-1.0 / 3.0)
    assert slopes["second_order"] == pytest.approx(-1.0 / 3.0)


def test_theoretical_rates():
    rates = theoretical_rates(1000, 0.25, 2, nu=2, eps=0.1)
    assert rates["stochastic"] == pytest.approx(1.0 / np.sqrt(250.0))
    assert rates["bias"] == pytest.approx(0.0625)
    assert rates["second_order"] == pytest.approx(1.0 / (1000 * 0.25 ** 4))
    assert rates["alpha"] == pytest.approx(rates["second_order"] + rates["bias"] + rates["stochastic"] + 0.01)
    assert rates["stochastic_q"] == pytest.approx(1.0 / np.sqrt(1000 * 0.25 ** 3))

    known_first = theoretical_rates(1000, 0.25, 2, Q=1)
    assert known_first["stochastic_q"] == pytest.approx(1.0 / np.sqrt(1000 * 0.25 ** 5))
    assert known_first["gamma_1"] == pytest.approx(np.sqrt(np.log(1000) / (1000 * 0.25 ** 4)))

    with pytest.raises(ValueError):
        theoretical_rates(1, 0.25, 2)


def test_fit_rate():
    n = np.array([500, 1000, 2000, 4000])
    slope, intercept = fit_rate(n, 3.0 * n ** -0.4)
    assert slope == pytest.approx(-0.4)
    assert intercept == pytest.approx(np.log(3.0))
    assert fit_rate(n, np.full(4, 0.2))[0] == pytest.approx(0.0, abs=1e-12)

    with pytest.raises(ValueError):
        fit_rate(n, np.zeros(4))
    with pytest.raises(ValueError):
        fit_rate([500], [0.1])


# ---------------------------
# Studies
# ---------------------------

def test_single_replicate_matches_a_direct_run():
    cfg = _config(replicates=1, n_list=[400], variance=False)
    records = run_replicate(cfg, 400, 0, cfg.truth_value)

    sample = cfg.truth_field.sample(400, replicate_seed(17, 0, 400))
    F = KernelDensityField(sample, 0.45, cfg.kernel)
    grid = default_grid(F, 64)
    assert [r["estimator"] for r in records] == ["plugin", "band"]
    assert records[0]["value"] == estimate(F, "unity", 0.05, EstimatorKind.plugin(), grid).value
    assert records[1]["value"] == estimate(F, "unity", 0.05, EstimatorKind.band(), grid).value
    assert records[0]["error"] == pytest.approx(records[0]["value"] - 9.5606)
    assert records[0]["covered"] is None


def test_study_csv_is_reproducible(tmp_path):
    first = run_study(_config())
    second = run_study(_config())

    a = first.write_csv(tmp_path / "a")
    b = second.write_csv(tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    assert "runtime" not in a[0].read_text().splitlines()[0]
    assert "runtime" in first.write_csv(tmp_path / "c", timing=True)[0].read_text().splitlines()[0]

    config = json.loads(first.write_config(tmp_path / "a").read_text())
    assert config["truth_value"] == 9.5606
    assert config["truth_richardson_error"] == 0.0


def test_study_rows():
    result = run_study(_config())
    assert len(result.records) == 2 * 2 * 2
    assert len(result.rows) == 4

    for row in result.rows:
        assert row["replicates"] == 2
        assert row["failures"] == 0
        assert row["variance"] >= 0
        assert 0.0 <= row["coverage"] <= 1.0
    row = result.row(600, "band")
    assert row["mean"] == pytest.approx(result.values(600, "band").mean())
    assert row["bias"] == pytest.approx(row["mean"] - 9.5606)
    with pytest.raises(KeyError):
        result.row(600, "tube")

    assert result.rate_fits == []
    with pytest.raises(ValueError):
        rate_report(result)


def test_reference_truth_on_a_refined_grid():
    cfg = _config(truth_value=None, truth_res=512)
    truth, error = reference_truth(cfg)
    assert truth == pytest.approx(2.0 * np.pi * cfg.truth_field.level_radius(0.05), rel=1e-4)
    assert 0.0 < error < 1e-3


def test_failure_threshold():
    cfg = _config()
    ok = {"status": "ok", "value": 9.5, "eps": None, "covered": 1, "runtime": 0.0, "reason": ""}
    bad = {"status": "failed", "value": None, "eps": None, "covered": None, "runtime": 0.0,
           "reason": "EmptyRegionError: no grid cell"}

    row = _summarize(cfg, 300, "band", [ok] * 9 + [bad], 9.5606)
    assert row["failures"] == 1
    assert row["skewness"] is None

    with pytest.raises(ReplicateFailureError):
        _summarize(cfg, 300, "band", [ok] * 8 + [bad] * 2, 9.5606)


def test_histograms(tmp_path):
    result = run_study(_config(replicates=3, estimators=[{"estimator": "plugin"}]))
    paths = write_histograms(result, tmp_path)
    assert sorted(p.name for p in paths) == ["hist_n300_plugin.svg", "hist_n600_plugin.svg"]
    assert "<svg" in paths[0].read_text()

    z = standardized(np.array([1.0, 2.0, 3.0, 4.0]))
    assert z.mean() == pytest.approx(0.0)
    assert z.std(ddof=1) == pytest.approx(1.0)
    assert standardized(np.ones(4)).size == 0


# ---------------------------
# Desk-scale theory checks
# ---------------------------

def _perimeter_study(**changes) -> McConfig:
    data = json.loads(EXAMPLE_STUDY.read_text())
    data["estimators"] = [{"estimator": "plugin"}]
    data.update(changes)
    return McConfig.from_dict(data)


@pytest.mark.slow
def test_interval_coverage():
    result = run_study(_perimeter_study(n_list=[3000], replicates=200))
    assert 0.80 <= result.row(3000, "plugin")["coverage"] <= 0.97


@pytest.mark.slow
def test_standardized_estimates_look_normal():
    result = run_study(_perimeter_study(n_list=[5000], replicates=200, variance=False))
    row = result.row(5000, "plugin")
    assert abs(row["skewness"]) <= 0.5
    assert abs(row["excess_kurtosis"]) <= 1.0


@pytest.mark.slow
def test_error_rate_in_n():
    cfg = _perimeter_study(variance=False)
    fits = rate_report(run_study(cfg))
    sd = next(f for f in fits if f["curve"] == "sd")
    assert sd["theory_slope"] == pytest.approx(-5.0 / 12.0)
    assert abs(sd["slope"] - sd["theory_slope"]) <= 0.15


@pytest.mark.slow
def test_repeated_estimator_has_flat_difference():
    cfg = _perimeter_study(n_list=[500, 1000, 2000], replicates=5, variance=False,
                           estimators=[{"estimator": "plugin"}, {"estimator": "plugin"}])
    result = run_study(cfg)
    for n in cfg.n_list:
        np.testing.assert_array_equal(result.values(n, "plugin_0"), result.values(n, "plugin_1"))
    gaps = [abs(result.row(n, "plugin_0")["mean"] - result.row(n, "plugin_1")["mean"]) + 1.0 for n in cfg.n_list]
    assert fit_rate(cfg.n_list, gaps)[0] == pytest.approx(0.0, abs=1e-12)
