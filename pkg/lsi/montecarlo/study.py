import csv
import json
import time
import logging
import numpy as np

from dataclasses import dataclass, field
from pathlib import Path
from scipy import stats
from typing import Any, Dict, List, Optional, Sequence, Tuple

from lsi.density.kde import KernelDensityField
from lsi.estimators.base import EstimatorKind, default_grid
from lsi.estimators.inference import confidence_interval, variance_hat
from lsi.estimators.surface_integral import estimate
from lsi.exceptions import DegenerateVarianceError, LevelSetError, ReplicateFailureError
from lsi.integrands import as_integrand
from lsi.montecarlo.config import McConfig
from lsi.parallel import ordered_map
from lsi.surface.grid import DEFAULT_RES
from lsi.types import PathLike, Report, ReportRows


logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
MAX_FAILURE_RATE = 0.1
TRUTH_REFINEMENT = 4
TRUTH_RES_CAP: Dict[int, int] = {2: 2048, 3: 192}

RECORD_FIELDS = [
    "n", "replicate", "seed", "bandwidth", "estimator", "eps", "value", "error",
    "std_err", "ci_lower", "ci_upper", "covered", "status", "reason", "runtime",
]
SUMMARY_FIELDS = [
    "n", "estimator", "eps", "bandwidth", "replicates", "failures", "truth", "mean", "variance", "sd",
    "bias", "rmse", "coverage", "skewness", "excess_kurtosis", "mean_runtime",
]
TIMING_FIELDS = ("runtime", "mean_runtime")


# ---------------------------
# Seeding
# ---------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def replicate_seed(base_seed: int, replicate: int, n: int = 0) -> int:
    """Seed of replicate r at sample size n; a pure function of its arguments."""
    return splitmix64(splitmix64((int(base_seed) & MASK64) ^ splitmix64(int(n))) ^ int(replicate))


# ---------------------------
# Rates
# ---------------------------

def theoretical_rates(n: float,
                      h: float,
                      dim: int,
                      nu: int = 2,
                      eps: float = 0.0,
                      Q: int = 0) -> Dict[str, float]:
    """
    Error-rate components at sample size n and bandwidth h.

    Known integrands: 1/(n h^(d+2)), h^nu, 1/sqrt(n h) and eps^2, summed into
    `alpha`. Unknown integrands built from derivatives up to order Q:
    1/sqrt(n h^(1+2 l_Q)) and 1/(n h^(d+2 l_(Q-1))) with l_Q = 1 for Q <= 0
    and 2 otherwise, summed with h^nu and eps^2 into `alpha_q`. `gamma_k` is
    the uniform deviation sqrt(log n / (n h^(d+2k))) of the k-th derivatives.
    """
    n = float(n)
    h = float(h)
    if n <= 1 or h <= 0:
        raise ValueError("theoretical rates need n > 1 and h > 0")

    def l(q: int) -> int:
        return 1 if q <= 0 else 2

    out = {
        "n": n,
        "h": h,
        "second_order": 1.0 / (n * h ** (dim + 2)),
        "bias": h ** nu,
        "stochastic": 1.0 / np.sqrt(n * h),
        "discretization": float(eps) ** 2,
        "stochastic_q": 1.0 / np.sqrt(n * h ** (1 + 2 * l(Q))),
        "second_order_q": 1.0 / (n * h ** (dim + 2 * l(Q - 1))),
    }
    out["alpha"] = out["second_order"] + out["bias"] + out["stochastic"] + out["discretization"]
    out["alpha_q"] = out["stochastic_q"] + out["second_order_q"] + out["bias"] + out["discretization"]
    for k in range(3):
        out[f"gamma_{k}"] = float(np.sqrt(np.log(n) / (n * h ** (dim + 2 * k))))
    return out


def theoretical_slopes(h_exponent: float, dim: int, nu: int = 2) -> Dict[str, float]:
    """Slopes in n of the rate components for h proportional to n^-a."""
    a = float(h_exponent)
    return {
        "stochastic": -(1.0 - a) / 2.0,
        "bias": -nu * a,
        "second_order": -(1.0 - (dim + 2) * a),
    }


def fit_rate(n: Sequence[float], errors: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line through (log n, log error): (slope, intercept)."""
    n = np.asarray(n, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if n.size < 2:
        raise ValueError("a rate fit needs at least two sample sizes")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ValueError("rate fits need positive finite errors")
    slope, intercept = np.polyfit(np.log(n), np.log(errors), 1)
    return float(slope), float(intercept)


# ---------------------------
# Study
# ---------------------------

@dataclass
class McResult:
    config: McConfig
    truth: float
    truth_error: float
    records: ReportRows
    rows: ReportRows
    rate_fits: ReportRows = field(default_factory=list)
    theory: ReportRows = field(default_factory=list)

    def row(self, n: int, estimator: str) -> Report:
        for row in self.rows:
            if row["n"] == n and row["estimator"] == estimator:
                return row
        raise KeyError(f"no summary row for n={n}, estimator={estimator}")

    def values(self, n: int, estimator: str) -> np.ndarray:
        """Successful replicate values in replicate order."""
        return np.array([r["value"] for r in self.records
                         if r["n"] == n and r["estimator"] == estimator and r["status"] == "ok"])

    def write_csv(self, out_dir: PathLike, timing: bool = False) -> List[Path]:
        """
        study.csv (one row per replicate and estimator) and summary.csv.
        Run times are left out unless `timing`, so that equal configurations
        give byte-identical files.
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        paths = []
        for name, fields, rows in (("study.csv", RECORD_FIELDS, self.records),
                                   ("summary.csv", SUMMARY_FIELDS, self.rows)):
            if not timing:
                fields = [f for f in fields if f not in TIMING_FIELDS]
            path = out_dir / name
            _write_rows(path, fields, rows)
            paths.append(path)
            logger.info("Saved %s", path)
        return paths

    def write_config(self, out_dir: PathLike) -> Path:
        path = Path(out_dir) / "config.json"
        block = self.config.to_dict()
        block["truth_value"] = self.truth
        block["truth_richardson_error"] = self.truth_error
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(block, f, indent=2)
        return path


def estimator_labels(kinds: Sequence[EstimatorKind]) -> List[str]:
    """Estimator tags, suffixed with their position when a tag repeats."""
    tags = [k.tag for k in kinds]
    return [t if tags.count(t) == 1 else f"{t}_{i}" for i, t in enumerate(tags)]


def _write_rows(path: Path, fields: List[str], rows: ReportRows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(row.get(k)) for k in fields})


def _format(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def reference_truth(cfg: McConfig) -> Tuple[float, float]:
    """
    Plug-in value of the integral on the analytic truth at a refined grid
    and its Richardson error estimate |T_r - T_(r/2)| / 3.
    """
    if cfg.truth_value is not None:
        return float(cfg.truth_value), 0.0

    truth = cfg.truth_field
    d = truth.dim
    res = cfg.truth_res
    if res is None:
        base = cfg.grid_res or DEFAULT_RES[d]
        res = min(TRUTH_REFINEMENT * base, TRUTH_RES_CAP[d])

    grid = cfg.grid_spec or default_grid(truth)
    g = as_integrand(cfg.integrand)
    fine = estimate(truth, g, cfg.level, EstimatorKind.plugin(), grid.with_res(res)).value
    coarse = estimate(truth, g, cfg.level, EstimatorKind.plugin(), grid.with_res(max(8, res // 2))).value
    error = abs(fine - coarse) / 3.0

    logger.info("Reference value %.10g at res %d (Richardson error %.2g)", fine, res, error)
    return float(fine), float(error)


def run_replicate(cfg: McConfig, n: int, replicate: int, truth: float) -> ReportRows:
    """One sample of size n: a KDE and every configured estimator on it."""
    seed = replicate_seed(cfg.base_seed, replicate, n)
    h = cfg.bandwidth(n)
    g = as_integrand(cfg.integrand)

    sample = cfg.truth_field.sample(n, seed)
    F = KernelDensityField(sample, h, cfg.kernel)
    grid = cfg.grid_spec or default_grid(F, cfg.grid_res)

    variance: Optional[float] = None
    variance_reason = ""
    if cfg.variance:
        try:
            variance = variance_hat(F, g, cfg.level, cfg.tau, grid)
        except LevelSetError as e:
            variance_reason = f"variance: {e}"

    records = []
    for label, kind in zip(estimator_labels(cfg.kinds), cfg.kinds):
        record: Report = {
            "n": n, "replicate": replicate, "seed": seed, "bandwidth": h, "estimator": label,
            "eps": kind.eps, "value": None, "error": None, "std_err": None, "ci_lower": None,
            "ci_upper": None, "covered": None, "status": "ok", "reason": variance_reason, "runtime": 0.0,
        }
        start = time.perf_counter()
        try:
            report = estimate(F, g, cfg.level, kind, grid)
            if variance is not None:
                try:
                    report = confidence_interval(report, variance, cfg.alpha)
                except DegenerateVarianceError as e:
                    record["reason"] = f"variance: {e}"
        except LevelSetError as e:
            record["status"] = "failed"
            record["reason"] = f"{type(e).__name__}: {e}"
            logger.warning("Replicate %d (n=%d, %s) failed: %s", replicate, n, label, e)
        else:
            record["eps"] = report.kind.eps
            record["value"] = report.value
            record["error"] = report.value - truth
            if report.ci is not None:
                record["std_err"] = report.std_err
                record["ci_lower"], record["ci_upper"] = report.ci
                record["covered"] = int(report.ci[0] <= truth <= report.ci[1])
        record["runtime"] = time.perf_counter() - start
        records.append(record)
    return records


def _moments(values: np.ndarray) -> Tuple[Optional[float], Optional[float]]:
    if values.size < 3 or np.std(values) == 0.0:
        return None, None
    return float(stats.skew(values)), float(stats.kurtosis(values, fisher=True))


def _summarize(cfg: McConfig, n: int, tag: str, records: ReportRows, truth: float) -> Report:
    ok = [r for r in records if r["status"] == "ok"]
    failures = len(records) - len(ok)
    if failures > MAX_FAILURE_RATE * len(records):
        reasons = sorted({r["reason"] for r in records if r["status"] != "ok"})
        raise ReplicateFailureError(f"{failures} of {len(records)} replicates failed at n={n} for {tag}: "
                                    f"{'; '.join(reasons)}")

    values = np.array([r["value"] for r in ok], dtype=float)
    covered = [r["covered"] for r in ok if r["covered"] is not None]
    variance = float(np.var(values, ddof=1)) if values.size > 1 else 0.0
    skewness, kurtosis = _moments(values)

    return {
        "n": n,
        "estimator": tag,
        "eps": ok[0]["eps"] if ok else None,
        "bandwidth": cfg.bandwidth(n),
        "replicates": len(records),
        "failures": failures,
        "truth": truth,
        "mean": float(values.mean()) if values.size else None,
        "variance": variance,
        "sd": float(np.sqrt(variance)),
        "bias": float(values.mean() - truth) if values.size else None,
        "rmse": float(np.sqrt(np.mean((values - truth) ** 2))) if values.size else None,
        "coverage": float(np.mean(covered)) if covered else None,
        "skewness": skewness,
        "excess_kurtosis": kurtosis,
        "mean_runtime": float(np.mean([r["runtime"] for r in records])),
    }


RATE_CURVES = {"abs_bias": "bias", "rmse": "stochastic", "sd": "stochastic"}


def _rate_fits(cfg: McConfig, rows: ReportRows) -> ReportRows:
    slopes = theoretical_slopes(cfg.h_exponent, cfg.dim, cfg.kernel_order)
    bias_slope = max(slopes["bias"], slopes["second_order"])

    fits = []
    for tag in dict.fromkeys(r["estimator"] for r in rows):
        mine = [r for r in rows if r["estimator"] == tag and r["mean"] is not None]
        for curve, term in RATE_CURVES.items():
            key = "bias" if curve == "abs_bias" else curve
            points = [(r["n"], abs(r[key])) for r in mine if r[key] is not None and abs(r[key]) > 0]
            fit = {"estimator": tag, "curve": curve, "points": len(points), "slope": None, "intercept": None,
                   "theory_slope": bias_slope if term == "bias" else slopes[term], "theory_term": term}
            if len(points) >= 2:
                fit["slope"], fit["intercept"] = fit_rate(*zip(*points))
            fits.append(fit)
    return fits


def _theory(cfg: McConfig) -> ReportRows:
    rows = []
    for label, kind in zip(estimator_labels(cfg.kinds), cfg.kinds):
        for n in cfg.n_list:
            eps = kind.eps or 0.0
            rates = theoretical_rates(n, cfg.bandwidth(n), cfg.dim, cfg.kernel_order, eps)
            rows.append({"estimator": label, **rates})
    return rows


def run_study(cfg: McConfig) -> McResult:
    """
    Every (n, replicate) pair runs on the worker pool; records and summaries
    are assembled in (n, replicate, estimator) order.
    """
    if not isinstance(cfg, McConfig):
        raise TypeError("cfg must be an McConfig")

    truth, truth_error = reference_truth(cfg)
    jobs = [(n, r) for n in cfg.n_list for r in range(cfg.replicates)]
    logger.info("Running %d replicates over n=%s", len(jobs), cfg.n_list)

    batches = ordered_map(lambda job: run_replicate(cfg, job[0], job[1], truth), jobs)
    records = [record for batch in batches for record in batch]

    rows = []
    for n in cfg.n_list:
        for label in estimator_labels(cfg.kinds):
            mine = [r for r in records if r["n"] == n and r["estimator"] == label]
            rows.append(_summarize(cfg, n, label, mine, truth))

    result = McResult(config=cfg, truth=truth, truth_error=truth_error, records=records, rows=rows,
                      theory=_theory(cfg))
    if len(cfg.n_list) >= 3:
        result.rate_fits = _rate_fits(cfg, rows)
    return result


def rate_report(res: McResult, path: Optional[PathLike] = None) -> ReportRows:
    """Fitted slopes next to the theoretical slope of the matching rate term; CSV when `path` is given."""
    sizes = sorted({row["n"] for row in res.rows})
    if len(sizes) < 3:
        raise ValueError(f"a rate report needs at least three sample sizes, got {len(sizes)}")

    fits = res.rate_fits or _rate_fits(res.config, res.rows)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_rows(path, ["estimator", "curve", "points", "slope", "intercept", "theory_slope", "theory_term"],
                    fits)
        logger.info("Saved %s", path)
    return fits
