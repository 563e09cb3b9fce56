import logging
import numpy as np

from dataclasses import dataclass, asdict
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from typing import Any, Dict, Optional, Tuple

from lsi.density.base import DensityField
from lsi.exceptions import DegenerateGradientError, NoBracketError
from lsi.density.bundle import gradient_floor
from lsi.surface.grid import GridSpec
from lsi.surface.mesh import extract_level_mesh, level_tolerance, mesh_integral
from lsi.types import Point, Points, ProjectionResult


logger = logging.getLogger(__name__)

BRACKET_DOUBLINGS = 10
INJECTIVITY_TOL = 1e-6


def default_t_max(F: DensityField) -> float:
    return 10.0 * F.bandwidth if F.bandwidth else 1.0


def project_to_level(F: DensityField,
                     x: Point,
                     level: float,
                     t_max: Optional[float] = None,
                     direction: Optional[np.ndarray] = None) -> ProjectionResult:
    """
    Move x along the line x + t N(x) onto {F = level}, N = grad F / |grad F| at x.

    The bracket is searched outwards on both sides (t = +-t_max 2^-k, k
    decreasing), the first sign change found closest to x wins and Brent's
    method refines it.

    :param F: Field
    :param x: Start point
    :param level: Level c
    :param t_max: Search half-width; 10h for KDE fields, else 1
    :param direction: Optional fixed direction replacing N(x)
    :return: Tuple (t, foot)
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    level = float(level)
    tol = level_tolerance(level)
    t_max = default_t_max(F) if t_max is None else float(t_max)
    if t_max <= 0:
        raise ValueError("t_max must be > 0")

    f0 = F.value(x) - level
    if abs(f0) <= tol:
        return 0.0, x.copy()

    if direction is None:
        direction = F.grad(x)
    direction = np.asarray(direction, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(direction))
    if norm < gradient_floor(1.0):
        raise DegenerateGradientError(f"cannot project: gradient norm {norm:.3g} at {x.tolist()} is degenerate")
    unit = direction / norm

    ts = t_max * 2.0 ** -np.arange(BRACKET_DOUBLINGS, -1, -1)
    signed = np.concatenate([ts, -ts])
    values = F.evaluate(x + signed[:, None] * unit, order=0)[0] - level
    up, down = values[:ts.size], values[ts.size:]

    bracket = None
    for k in range(ts.size):
        prev_t = ts[k - 1] if k else 0.0
        candidates = []
        for sign, side in ((1.0, up), (-1.0, down)):
            near = side[k - 1] if k else f0
            if np.sign(side[k]) != np.sign(near):
                guess = prev_t + (ts[k] - prev_t) * abs(near) / (abs(near) + abs(side[k]))
                candidates.append((guess, tuple(sorted((sign * prev_t, sign * ts[k])))))
        if candidates:
            bracket = min(candidates)[1]
            break

    if bracket is None:
        raise NoBracketError(f"no crossing of level {level:g} within |t| <= {t_max:g} of {x.tolist()}")

    def phi(t: float) -> float:
        return F.value(x + t * unit) - level

    t = brentq(phi, bracket[0], bracket[1], xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    foot = x + t * unit

    residual = abs(F.value(foot) - level)
    if residual > tol:
        logger.warning("Projection residual %.3g exceeds the level tolerance %.3g", residual, tol)
    return float(t), foot


@dataclass
class BijectivityReport:
    n_starts: int
    n_failed: int
    min_foot_separation: float
    injective: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def projection_bijectivity(F: DensityField,
                           starts: Points,
                           level: float,
                           t_max: Optional[float] = None) -> BijectivityReport:
    """
    Project distinct start points onto the level set and check that no two
    feet coincide. Reported, not asserted: small bandwidths break it.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    feet, failed = [], 0
    for x in starts:
        try:
            feet.append(project_to_level(F, x, level, t_max)[1])
        except (NoBracketError, DegenerateGradientError) as e:
            failed += 1
            logger.debug("Projection failed: %s", e)

    if len(feet) < 2:
        separation = np.inf
    else:
        dist, _ = cKDTree(np.asarray(feet)).query(np.asarray(feet), k=2)
        separation = float(dist[:, 1].min())

    report = BijectivityReport(
        n_starts=starts.shape[0],
        n_failed=failed,
        min_foot_separation=separation,
        injective=bool(separation > INJECTIVITY_TOL),
    )
    if not report.injective:
        logger.warning("Projection feet coincide (min separation %.3g); the projection is not one-to-one",
                       separation)
    return report


def symmetric_difference_volume(F: DensityField,
                                G: DensityField,
                                level: float,
                                grid: GridSpec) -> Tuple[float, float]:
    """
    Volume of {F >= c} xor {G >= c} on the grid, and its first-order surface
    approximation: the integral of |F - G| / |grad G| over {G = c}.
    """
    f = F.evaluate_grid(grid, "centers", order=0)[0]
    g = G.evaluate_grid(grid, "centers", order=0)[0]
    volume = float(np.sum((f >= level) != (g >= level)) * grid.cell_volume)

    mesh = extract_level_mesh(G, level, grid)
    gap = np.abs(F.evaluate(mesh.vertices, order=0)[0] - level)
    approx = mesh_integral(mesh, gap / mesh.grad_norms)
    return volume, approx
