import csv
import json
import sys
import logging
import numpy as np

from pathlib import Path
from typing import Any, Dict, List, Optional

from lsi.cli.config import RunConfig, to_jsonable
from lsi.density.bundle import gradient_floor
from lsi.density.samples import read_samples
from lsi.estimators.base import cached_level_mesh
from lsi.estimators.functionals import (euler_characteristic, euler_characteristic_curve, minkowski_functionals,
                                        willmore_energy)
from lsi.estimators.inference import confidence_interval, variance_hat
from lsi.estimators.surface_integral import estimate
from lsi.exceptions import DegenerateVarianceError
from lsi.geometry.curvature import curvature_bundle, gauss_curvature_adjugate
from lsi.montecarlo.config import McConfig
from lsi.montecarlo.plots import write_histograms
from lsi.montecarlo.study import rate_report, run_study
from lsi.surface.mesh import export_mesh
from lsi.types import Report, ReportRows


logger = logging.getLogger(__name__)


def _emit_json(report: Report, out: Optional[str]) -> None:
    text = json.dumps(to_jsonable(report), indent=2)
    if out is None:
        print(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    print(f"Saved report to '{path}'")


def _emit_csv(rows: ReportRows, fields: List[str], cfg: RunConfig) -> None:
    """CSV to --out (with the config echoed to a sibling .config.json) or stdout."""
    if cfg.out is None:
        writer = csv.DictWriter(sys.stdout, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
        return

    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    config_path = path.with_suffix(".config.json")
    config_path.write_text(json.dumps(to_jsonable(cfg.to_dict()), indent=2) + "\n", encoding="utf-8")
    print(f"Saved {len(rows)} rows to '{path}'")


def _export(cfg: RunConfig, F, level: float, grid) -> None:
    if cfg.mesh_out is not None:
        path = export_mesh(cached_level_mesh(F, level, grid), cfg.mesh_out)
        print(f"Saved level mesh to '{path}'")


# ---------------------------
# Subcommands
# ---------------------------

def cmd_estimate(cfg: RunConfig) -> Report:
    level = cfg.require_level()
    F = cfg.density()
    grid = cfg.grid(F)

    report = estimate(F, cfg.integrand, level, cfg.kind, grid)
    sigma2 = None
    if cfg.variance and F.n is not None:
        try:
            sigma2 = variance_hat(F, cfg.integrand, level, cfg.tau, grid)
            report = confidence_interval(report, sigma2, cfg.alpha)
        except DegenerateVarianceError as e:
            logger.warning("No confidence interval: %s", e)

    out = report.to_dict()
    out["variance"] = sigma2
    out["config"] = cfg.to_dict()

    line = f"{report.kind.tag} estimate at c={level:g}: {report.value:.10g}"
    if report.ci is not None:
        line += f"  [{report.ci[0]:.6g}, {report.ci[1]:.6g}] at alpha={report.alpha:g}"
    print(line)

    _export(cfg, F, level, grid)
    _emit_json(out, cfg.out)
    return out


def cmd_curvature(cfg: RunConfig) -> ReportRows:
    """Curvature probe at the points of --points (same formats as sample files)."""
    if cfg.points is None:
        raise ValueError("the curvature probe needs a point list (--points)")
    F = cfg.density()
    points = read_samples(cfg.points).coords
    if points.shape[1] != F.dim:
        raise ValueError(f"points are {points.shape[1]}-dimensional, the field is {F.dim}-dimensional")

    bundle = F.deriv_bundle(points).as_batch()
    floors = gradient_floor(1.0) * np.maximum(1.0, np.abs(bundle.value))
    ok = np.atleast_1d(bundle.grad_norm) >= floors

    d = F.dim
    fields = ([f"x{i}" for i in range(d)] + ["value", "grad_norm", "mean_curvature", "gauss_curvature",
              "gauss_curvature_adjugate"] + [f"k{i + 1}" for i in range(d - 1)]
              + [f"normal{i}" for i in range(d)] + ["degenerate"])

    rows = [{f"x{i}": float(p[i]) for i in range(d)} for p in points]
    for row, value, norm, good in zip(rows, bundle.value, bundle.grad_norm, ok):
        row.update(value=float(value), grad_norm=float(norm), degenerate=int(not good))

    if ok.any():
        index = np.flatnonzero(ok)
        good = bundle.take(index)
        geometry = curvature_bundle(good)
        adjugate = gauss_curvature_adjugate(good)
        for k, i in enumerate(index):
            rows[i].update(mean_curvature=float(geometry.mean[k]), gauss_curvature=float(geometry.gauss[k]),
                           gauss_curvature_adjugate=float(adjugate[k]))
            rows[i].update({f"k{j + 1}": float(geometry.principal[k, j]) for j in range(d - 1)})
            rows[i].update({f"normal{j}": float(geometry.normal[k, j]) for j in range(d)})
    if not ok.all():
        logger.warning("%d of %d points have a degenerate gradient; curvature left blank",
                       int((~ok).sum()), ok.size)

    _emit_csv(rows, fields, cfg)
    return rows


def cmd_euler(cfg: RunConfig) -> Report:
    F = cfg.density()
    grid = cfg.grid(F)
    method = cfg.euler_method

    if cfg.levels:
        curve = euler_characteristic_curve(F, cfg.levels, method, grid)
        out: Report = {"method": method.tag, "curve": [e.to_dict() for e in curve], "config": cfg.to_dict()}
        for e in curve:
            print(f"c={e.level:g}: chi={e.snapped} (raw {e.raw:.4f})")
    else:
        level = cfg.require_level()
        result = euler_characteristic(F, level, method, grid)
        out = result.to_dict()
        out["config"] = cfg.to_dict()
        print(f"Euler characteristic ({method.tag}) at c={level:g}: {result.snapped} (raw {result.raw:.6f})")
        _export(cfg, F, level, grid)

    _emit_json(out, cfg.out)
    return out


def cmd_minkowski(cfg: RunConfig) -> Report:
    level = cfg.require_level()
    F = cfg.density()
    grid = cfg.grid(F)

    report = minkowski_functionals(F, level, grid)
    out = report.to_dict()
    if F.dim == 3:
        out["willmore"] = willmore_energy(F, level, grid)
    out["config"] = cfg.to_dict()

    print("Minkowski functionals at c=%g: %s" % (level, ", ".join(f"V{j}={v:.6g}" for j, v in enumerate(report.values))))
    _export(cfg, F, level, grid)
    _emit_json(out, cfg.out)
    return out


def cmd_simulate(study_path: str, out_dir: str, histograms: bool = False, timing: bool = False) -> Dict[str, Any]:
    cfg = McConfig.from_json(study_path)
    result = run_study(cfg)

    paths = result.write_csv(out_dir, timing=timing)
    paths.append(result.write_config(out_dir))
    if len(cfg.n_list) >= 3:
        rate_report(result, Path(out_dir) / "rates.csv")
        paths.append(Path(out_dir) / "rates.csv")
    if histograms:
        paths.extend(write_histograms(result, out_dir))

    for row in result.rows:
        coverage = "-" if row["coverage"] is None else f"{row['coverage']:.3f}"
        print(f"n={row['n']:<7d} {row['estimator']:<10s} mean={row['mean']:.6g}  sd={row['sd']:.3g}  "
              f"bias={row['bias']:+.3g}  coverage={coverage}")
    print(f"Saved {len(paths)} files to '{out_dir}'")
    return {"truth": result.truth, "truth_error": result.truth_error, "files": [str(p) for p in paths]}
