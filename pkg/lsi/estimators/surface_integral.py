import logging
import numpy as np

from itertools import product
from math import factorial
from typing import Any, Callable, Dict, Optional, Tuple

from lsi.density.base import DensityField
from lsi.estimators.base import EstimateReport, EstimatorKind, cached_level_mesh, default_grid
from lsi.exceptions import EmptyRegionError, LevelNotBracketedError
from lsi.integrands import Integrand, as_integrand
from lsi.surface.grid import GridSpec
from lsi.surface.mesh import LevelMesh, mesh_integral
from lsi.types import Points, Values


logger = logging.getLogger(__name__)

BAND_EPS_FACTOR = 10.0
BAND_EPS_CELLS = 3.0
BAND_EPS_LEVEL_CAP = 0.5
TUBE_EPS_CELLS = 3.0
COLLAPSE_RATIO = 1e-3


# ---------------------------
# Window membership
# ---------------------------

def _uniform_sum_cdf_exact(s: Values, widths: np.ndarray) -> Values:
    """CDF of a sum of independent U(0, w_i), all w_i > 0."""
    q = widths.shape[1]
    total = np.zeros_like(s)
    for subset in product((0, 1), repeat=q):
        subset = np.asarray(subset)
        shift = widths @ subset
        total += (-1.0) ** subset.sum() * np.clip(s - shift, 0.0, None) ** q
    return np.clip(total / (factorial(q) * np.prod(widths, axis=1)), 0.0, 1.0)


def uniform_sum_cdf(s: Values, widths: np.ndarray) -> Values:
    """
    CDF at s of a sum of independent U(0, w_i) variables, row-wise.
    Widths below COLLAPSE_RATIO times the largest are treated as point masses.
    """
    s = np.asarray(s, dtype=float)
    w = -np.sort(-np.abs(np.asarray(widths, dtype=float)), axis=1)
    w = np.where(w < COLLAPSE_RATIO * w[:, :1], 0.0, w)
    rank = np.sum(w > 0, axis=1)

    out = (s >= 0).astype(float)
    for q in range(1, w.shape[1] + 1):
        sel = rank == q
        if sel.any():
            out[sel] = _uniform_sum_cdf_exact(s[sel], w[sel, :q])
    return out


def window_fraction(offset: Values, slope: np.ndarray, step: np.ndarray, eps: float) -> Values:
    """
    Fraction of each grid cell where |offset + slope . u| <= eps, u uniform over
    the cell (centered), i.e. the window fraction under a local linear model.
    """
    widths = np.abs(slope) * step
    half = 0.5 * widths.sum(axis=1)
    upper = uniform_sum_cdf(eps - offset + half, widths)
    lower = uniform_sum_cdf(-eps - offset + half, widths)
    return np.clip(upper - lower, 0.0, 1.0)


# ---------------------------
# Defaults
# ---------------------------

def default_band_eps(F: DensityField, level: float, grid: GridSpec) -> float:
    """
    max(min(10 c h^2, c / 2), 3 cells of field variation), the variation
    measured by the median gradient norm over cells near the level set.
    """
    values, grads, _ = F.evaluate_grid(grid, "centers", order=1)
    values = values.reshape(-1)
    norms = np.linalg.norm(grads.reshape(-1, grid.dim), axis=1)
    cell = float(np.max(grid.step))
    near = np.abs(values - level) <= 2.0 * norms * cell
    variation = float(np.median(norms[near])) * cell if near.any() else 0.0

    eps = BAND_EPS_CELLS * variation
    if F.bandwidth is not None:
        eps = max(eps, min(BAND_EPS_FACTOR * level * F.bandwidth ** 2, BAND_EPS_LEVEL_CAP * level))
    if not eps > 0:
        raise EmptyRegionError("cannot size a default band: the field is flat near the level set")
    return eps


def default_tube_eps(grid: GridSpec) -> float:
    return TUBE_EPS_CELLS * float(np.max(grid.step))


def resolve_eps(kind: EstimatorKind, F: DensityField, level: float, grid: GridSpec) -> EstimatorKind:
    if kind.is_plugin or kind.eps is not None:
        return kind
    if kind.tag == EstimatorKind.BAND:
        return kind.with_eps(default_band_eps(F, level, grid))
    return kind.with_eps(default_tube_eps(grid))


# ---------------------------
# Region sums
# ---------------------------

def _check_centers_bracket(values: np.ndarray, level: float) -> None:
    if not values.min() < level < values.max():
        raise LevelNotBracketedError(
            f"level not bracketed: c={level:g} lies outside the field range "
            f"({values.min():g}, {values.max():g}) on the grid"
        )


def band_weights(F: DensityField, level: float, grid: GridSpec, eps: float,
                 membership: str = "fraction") -> Tuple[np.ndarray, Values]:
    """
    Cells meeting the level window [c - eps, c + eps] and their weights
    |grad F| * cell_volume * fraction.

    :return: Tuple (flat cell indices, weights)
    """
    values, grads, _ = F.evaluate_grid(grid, "centers", order=1)
    values = values.reshape(-1)
    grads = grads.reshape(-1, grid.dim)
    _check_centers_bracket(values, level)

    offset = values - level
    if membership == "center":
        frac = (np.abs(offset) <= eps).astype(float)
    else:
        reach = 0.5 * np.abs(grads) @ grid.step
        cells = np.flatnonzero(np.abs(offset) <= eps + reach)
        frac = np.zeros(values.size)
        frac[cells] = window_fraction(offset[cells], grads[cells], grid.step, eps)

    cells = np.flatnonzero(frac > 0)
    if cells.size == 0:
        raise EmptyRegionError(f"no grid cell lies in the band |F - c| <= {eps:g}; eps is below the grid resolution")
    weights = np.linalg.norm(grads[cells], axis=1) * grid.cell_volume * frac[cells]
    return cells, weights


def tube_weights(F: DensityField, level: float, grid: GridSpec, eps: float,
                 membership: str = "fraction") -> Tuple[np.ndarray, Values, Values, Points]:
    """
    Cells within distance eps of the estimated level set with weights
    cell_volume * fraction.

    :return: Tuple (flat cell indices, weights, distances, closest mesh points)
    """
    mesh = cached_level_mesh(F, level, grid)
    index = mesh.distance_index()
    radius = eps + 0.5 * float(np.linalg.norm(grid.step))
    dist, foot = index.grid_distances(grid, radius if membership == "fraction" else eps)

    reached = np.flatnonzero(np.isfinite(dist))
    centers = grid.cell_centers()[reached]
    d = dist[reached]

    if membership == "center":
        frac = (d <= eps).astype(float)
    else:
        direction = centers - foot[reached]
        length = np.linalg.norm(direction, axis=1)
        tiny = length < 1e-12 * float(np.max(grid.step))
        if tiny.any():
            g = F.evaluate(centers[tiny], order=1)[1]
            direction[tiny] = g
            length[tiny] = np.linalg.norm(g, axis=1)
        slope = direction / np.maximum(length, 1e-300)[:, None]
        frac = window_fraction(d, slope, grid.step, eps)

    keep = frac > 0
    if not keep.any():
        raise EmptyRegionError(f"no grid cell lies within distance {eps:g} of the level set; eps is below the grid resolution")
    cells = reached[keep]
    return cells, grid.cell_volume * frac[keep], d[keep], foot[cells]


# ---------------------------
# Estimators
# ---------------------------

def _integrand_values(g: Integrand, F: DensityField, points: Points) -> Values:
    bundle = F.deriv_bundle(points) if g.needs_bundle else None
    return g.values(F, points, bundle)


def plugin_value(F: DensityField, g: Integrand, level: float, grid: GridSpec) -> Tuple[float, LevelMesh]:
    mesh = cached_level_mesh(F, level, grid)
    values = g.values(F, mesh.vertices, mesh.bundle)
    return mesh_integral(mesh, values), mesh


def estimate(F: DensityField,
             g: Any,
             level: float,
             kind: Optional[EstimatorKind] = None,
             grid: Optional[GridSpec] = None) -> EstimateReport:
    """
    Surface integral of g over {F = c} by the plug-in, band or tube estimator.

    Plugin integrates g over the extracted level mesh. Band sums
    g |grad F| over the cells with |F - c| <= eps, Tube sums g over the cells
    within distance eps of the level mesh; both divide by 2 eps.

    :param F: Density field (KDE or analytic)
    :param g: Integrand: an Integrand, a PhiExpr, a name, a number or a callable of x
    :param level: Level c
    :param kind: Estimator; Plugin when omitted
    :param grid: Sampling grid; sized from the field when omitted
    :return: EstimateReport
    """
    g = as_integrand(g)
    kind = EstimatorKind.plugin() if kind is None else kind
    if not isinstance(kind, EstimatorKind):
        raise TypeError("kind must be an EstimatorKind")
    grid = default_grid(F) if grid is None else grid
    level = float(level)

    kind = resolve_eps(kind, F, level, grid)
    diagnostics: Dict[str, Any] = {"grid_res": list(grid.res)}

    if kind.is_plugin:
        value, mesh = plugin_value(F, g, level, grid)
        diagnostics["mesh_measure"] = mesh.total_measure
        diagnostics["min_grad_on_mesh"] = mesh.min_grad
        diagnostics["band_cell_count"] = None
    elif kind.tag == EstimatorKind.BAND:
        cells, weights = band_weights(F, level, grid, kind.eps, kind.membership)
        centers = grid.cell_centers()[cells]
        value = float(np.sum(_integrand_values(g, F, centers) * weights)) / (2.0 * kind.eps)
        diagnostics["band_cell_count"] = int(cells.size)
        diagnostics["mesh_measure"] = None
        diagnostics["min_grad_on_mesh"] = None
    else:
        cells, weights, _, _ = tube_weights(F, level, grid, kind.eps, kind.membership)
        mesh = cached_level_mesh(F, level, grid)
        centers = grid.cell_centers()[cells]
        value = float(np.sum(_integrand_values(g, F, centers) * weights)) / (2.0 * kind.eps)
        diagnostics["band_cell_count"] = int(cells.size)
        diagnostics["mesh_measure"] = mesh.total_measure
        diagnostics["min_grad_on_mesh"] = mesh.min_grad

    logger.debug("%s estimate at c=%g: %.10g", kind.tag, level, value)
    return EstimateReport(
        kind=kind,
        value=value,
        level=level,
        bandwidth=F.bandwidth,
        n=F.n,
        diagnostics=diagnostics,
    )


def level_average(F: DensityField,
                  g: Any,
                  level: float,
                  eps: float,
                  grid: Optional[GridSpec] = None,
                  points: int = 9) -> float:
    """Average of Plugin estimates over `points` levels evenly spread in [c - eps, c + eps]."""
    g = as_integrand(g)
    grid = default_grid(F) if grid is None else grid
    levels = np.linspace(level - eps, level + eps, points)
    return float(np.mean([plugin_value(F, g, c, grid)[0] for c in levels]))


def region_sum(F: DensityField,
               level: float,
               grid: GridSpec,
               eps: float,
               func: Callable[[Points, Values, Points], Values],
               membership: str = "fraction") -> float:
    """
    (2 eps)^-1 sum over the eps-tube of func(centers, distances, feet) * weight.
    Shared by estimators that integrate quantities tied to the nearest level-set point.
    """
    cells, weights, dist, feet = tube_weights(F, level, grid, eps, membership)
    centers = grid.cell_centers()[cells]
    return float(np.sum(func(centers, dist, feet) * weights)) / (2.0 * eps)
