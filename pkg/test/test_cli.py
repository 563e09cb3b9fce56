import csv
import json
import pytest
import numpy as np

from lsi.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, RunConfig, build_parser, main, run_config


GAUSSIAN_2D = json.dumps({"family": "gaussian", "dim": 2})
GAUSSIAN_3D = json.dumps({"family": "gaussian", "dim": 3})
PERIMETER = 9.5606


def _read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# ---------------------------
# estimate
# ---------------------------

def test_estimate_analytic_perimeter(tmp_path):
    out = tmp_path / "report.json"
    code = main(["estimate", "--field", GAUSSIAN_2D, "--level", "0.05", "--grid-res", "256", "--out", str(out)])
    assert code == EXIT_OK

    report = _read_json(out)
    assert report["value"] == pytest.approx(PERIMETER, rel=1e-2)
    assert report["estimator"] == "plugin"
    assert report["variance"] is None
    assert report["config"]["level"] == 0.05
    assert report["config"]["field"] == {"family": "gaussian", "dim": 2}


def test_estimate_kde_reports_an_interval(tmp_path):
    out = tmp_path / "kde.json"
    code = main(["estimate", "--field", GAUSSIAN_2D, "--n", "800", "--seed", "3", "--bandwidth", "0.5",
                 "--level", "0.05", "--grid-res", "128", "--alpha", "0.1", "--out", str(out)])
    assert code == EXIT_OK

    report = _read_json(out)
    assert report["n"] == 800
    assert report["bandwidth"] == 0.5
    assert report["variance"] > 0
    assert report["ci_lower"] < report["value"] < report["ci_upper"]
    assert report["alpha"] == 0.1


def test_estimate_degenerate_variance_keeps_the_point_estimate(tmp_path, monkeypatch, caplog):
    from lsi.cli import commands
    from lsi.exceptions import DegenerateVarianceError

    def degenerate(*args, **kwargs):
        raise DegenerateVarianceError("gradient is degenerate at 40 of 100 quadrature points")

    monkeypatch.setattr(commands, "variance_hat", degenerate)
    out = tmp_path / "kde.json"
    with caplog.at_level("WARNING", logger="lsi.cli.commands"):
        code = main(["estimate", "--field", GAUSSIAN_2D, "--n", "800", "--seed", "3", "--bandwidth", "0.5",
                     "--level", "0.05", "--grid-res", "128", "--out", str(out)])
    assert code == EXIT_OK

    report = _read_json(out)
    assert np.isfinite(report["value"])
    assert report["variance"] is None
    assert report["ci_lower"] is None and report["ci_upper"] is None
    assert "No confidence interval" in caplog.text


def test_estimate_zero_band_width_is_invalid(capsys):
    code = main(["estimate", "--field", GAUSSIAN_2D, "--level", "0.05", "--grid-res", "64",
                 "--estimator", "band", "--eps", "0"])
    assert code == EXIT_INVALID
    assert "error:" in capsys.readouterr().err


def test_estimate_tiny_bandwidth_leaves_level_unbracketed(tmp_path, capsys):
    sample = tmp_path / "two.csv"
    sample.write_text("x,y\n0.0,0.0\n1.0,1.0\n", encoding="utf-8")

    code = main(["estimate", "--input", str(sample), "--bandwidth", "1e-4", "--level", "0.05"])
    assert code == EXIT_NUMERICAL
    assert "level not bracketed" in capsys.readouterr().err


def test_estimate_missing_sample_file(tmp_path):
    code = main(["estimate", "--input", str(tmp_path / "missing.csv"), "--level", "0.05"])
    assert code == EXIT_INVALID


def test_estimate_requires_a_level():
    assert main(["estimate", "--field", GAUSSIAN_2D]) == EXIT_INVALID


def test_report_config_block_reruns(tmp_path):
    first = tmp_path / "first.json"
    assert main(["estimate", "--field", GAUSSIAN_2D, "--level", "0.05", "--grid-res", "128",
                 "--out", str(first)]) == EXIT_OK

    second = tmp_path / "second.json"
    assert main(["estimate", "--config", str(first), "--estimator", "tube", "--out", str(second)]) == EXIT_OK

    a, b = _read_json(first), _read_json(second)
    assert b["estimator"] == "tube"
    assert b["config"]["grid_res"] == 128
    assert b["config"]["field"] == a["config"]["field"]
    assert b["value"] == pytest.approx(a["value"], rel=1e-2)


def test_mesh_export(tmp_path):
    mesh = tmp_path / "circle.csv"
    code = main(["estimate", "--field", GAUSSIAN_2D, "--level", "0.05", "--grid-res", "64",
                 "--mesh-out", str(mesh), "--out", str(tmp_path / "r.json")])
    assert code == EXIT_OK
    assert mesh.is_file()


# ---------------------------
# Configuration
# ---------------------------

def test_flags_override_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"field": {"family": "gaussian", "dim": 2}, "level": 0.05, "grid_res": 64}),
                    encoding="utf-8")

    args = build_parser().parse_args(["estimate", "--config", str(path), "--level", "0.02"])
    cfg = run_config(args)
    assert cfg.level == 0.02
    assert cfg.grid_res == 64
    assert cfg.estimator == "plugin"


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(input="a.csv", field={"family": "gaussian"})
    with pytest.raises(ValueError):
        RunConfig(n=100)
    with pytest.raises(ValueError):
        RunConfig(alpha=1.5)
    with pytest.raises(ValueError):
        RunConfig(bbox=[0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        RunConfig.from_dict({"levle": 0.05})
    with pytest.raises(TypeError):
        RunConfig.from_dict(["level"])


def test_unknown_config_key_exits_invalid(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"field": {"family": "gaussian"}, "colour": "red"}), encoding="utf-8")
    assert main(["estimate", "--config", str(path), "--level", "0.05"]) == EXIT_INVALID


# ---------------------------
# curvature, euler, minkowski
# ---------------------------

def test_curvature_probe_writes_csv_and_config(tmp_path):
    points = tmp_path / "points.csv"
    np.savetxt(points, [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]], delimiter=",")
    out = tmp_path / "curvature.csv"

    code = main(["curvature", "--field", GAUSSIAN_3D, "--points", str(points), "--out", str(out)])
    assert code == EXIT_OK

    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3
    assert float(rows[0]["mean_curvature"]) == pytest.approx(1.0)
    assert float(rows[1]["gauss_curvature"]) == pytest.approx(0.25)
    assert rows[2]["degenerate"] == "1"
    assert rows[2]["mean_curvature"] == ""

    config = _read_json(tmp_path / "curvature.config.json")
    assert config["field"]["dim"] == 3
    assert config["points"] == str(points)


def test_curvature_needs_points():
    assert main(["curvature", "--field", GAUSSIAN_3D]) == EXIT_INVALID


def test_euler_of_sphere(tmp_path):
    out = tmp_path / "euler.json"
    code = main(["euler", "--field", GAUSSIAN_3D, "--level", "0.02", "--grid-res", "64",
                 "--method", "combinatorial", "--out", str(out)])
    assert code == EXIT_OK

    report = _read_json(out)
    assert report["snapped"] == 2
    assert report["config"]["method"] == "combinatorial"


def test_euler_curve(tmp_path):
    out = tmp_path / "curve.json"
    code = main(["euler", "--field", GAUSSIAN_3D, "--levels", "0.02", "0.2", "--grid-res", "64",
                 "--method", "combinatorial", "--out", str(out)])
    assert code == EXIT_OK
    assert [e["snapped"] for e in _read_json(out)["curve"]] == [2, 0]


def test_minkowski_disc(tmp_path):
    out = tmp_path / "minkowski.json"
    code = main(["minkowski", "--field", GAUSSIAN_2D, "--level", "0.05", "--grid-res", "256", "--out", str(out)])
    assert code == EXIT_OK

    report = _read_json(out)
    r = PERIMETER / (2.0 * np.pi)
    assert report["v0"] == pytest.approx(np.pi * r ** 2, rel=1e-2)
    assert report["v1"] == pytest.approx(PERIMETER / 4.0, rel=1e-2)
    assert report["v2"] == pytest.approx(2.0, rel=1e-2)


# ---------------------------
# simulate, selftest
# ---------------------------

def test_simulate_writes_study_files(tmp_path):
    study = tmp_path / "study.json"
    study.write_text(json.dumps({
        "truth": {"family": "gaussian", "dim": 2},
        "level": 0.05,
        "estimators": [{"estimator": "plugin"}],
        "n_list": [300, 600],
        "h_rule": {"rule": "fixed", "h": 0.45},
        "replicates": 2,
        "base_seed": 5,
        "grid_res": 64,
        "truth_value": PERIMETER,
    }), encoding="utf-8")
    out_dir = tmp_path / "out"

    code = main(["simulate", str(study), "--out-dir", str(out_dir), "--histograms"])
    assert code == EXIT_OK
    for name in ("study.csv", "summary.csv", "config.json", "hist_n300_plugin.svg"):
        assert (out_dir / name).is_file()
    assert not (out_dir / "rates.csv").exists()


def test_simulate_missing_study(tmp_path):
    assert main(["simulate", str(tmp_path / "none.json"), "--out-dir", str(tmp_path)]) == EXIT_INVALID


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    assert "4/4 checks passed" in capsys.readouterr().out
