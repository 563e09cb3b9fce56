import logging
import numpy as np

from dataclasses import dataclass, field, asdict
from math import comb, gamma, pi
from typing import Any, Dict, List, Optional, Sequence

from lsi.density.base import DensityField
from lsi.estimators.base import EstimatorKind, cached_level_mesh, default_grid
from lsi.estimators.surface_integral import default_band_eps, default_tube_eps, estimate, region_sum
from lsi.exceptions import EmptyLevelSetError, LevelNotBracketedError
from lsi.geometry.curvature import curvature_bundle, parallel_curvature
from lsi.geometry.phi import named, unity
from lsi.surface.grid import GridSpec
from lsi.surface.mesh import mesh_components, mesh_euler_characteristic


logger = logging.getLogger(__name__)


def gauss_bonnet_constant(dim: int) -> float:
    """s_d = 1 * 3 * ... * (d - 2) / (2 pi)^((d - 1) / 2), d odd."""
    if dim % 2 == 0:
        raise ValueError(f"the Gauss-Bonnet constant needs odd d, got {dim}")
    numerator = float(np.prod(np.arange(1, dim - 1, 2))) if dim > 2 else 1.0
    return numerator / (2.0 * pi) ** ((dim - 1) / 2)


def unit_ball_volume(j: int) -> float:
    return pi ** (j / 2) / gamma(j / 2 + 1)


# ---------------------------
# Euler characteristic
# ---------------------------

class EulerMethod:
    PLUGIN_GB = "plugin_gb"
    BAND_GB = "band_gb"
    PARALLEL_GB = "parallel_gb"
    COMBINATORIAL = "combinatorial"
    TAGS = (PLUGIN_GB, BAND_GB, PARALLEL_GB, COMBINATORIAL)

    def __init__(self, tag: str, eps: Optional[float] = None) -> None:
        if not isinstance(tag, str):
            raise TypeError("tag must be a string")
        tag = tag.lower()
        if tag not in self.TAGS:
            raise ValueError(f"Unknown Euler method {tag!r}. Choose from: {', '.join(self.TAGS)}")
        if eps is not None:
            eps = float(eps)
            if tag in (self.PLUGIN_GB, self.COMBINATORIAL):
                raise ValueError(f"{tag} takes no eps")
            if not eps > 0:
                raise ValueError(f"eps must be > 0, got {eps}")
        self.tag = tag
        self.eps = eps

    def to_dict(self) -> Dict[str, Any]:
        return {"method": self.tag, "eps": self.eps}

    def __repr__(self) -> str:
        return f"EulerMethod({self.tag}, eps={self.eps})"


@dataclass
class EulerEstimate:
    method: str
    level: float
    raw: float
    snapped: int
    eps: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def deviation(self) -> float:
        return abs(self.raw - self.snapped)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["deviation"] = self.deviation
        diagnostics = out.pop("diagnostics")
        out.update(diagnostics)
        return out


def _parallel_gb(F: DensityField, level: float, grid: GridSpec, eps: float) -> float:
    """Tube average of the Gauss curvature of the parallel surfaces through each cell."""
    def sharp(centers, dist, feet):
        side = np.sign(level - F.evaluate(centers, order=0)[0])
        principal = curvature_bundle(F.deriv_bundle(feet)).principal
        return parallel_curvature(principal, side * dist)[0]

    return region_sum(F, level, grid, eps, sharp)


def euler_characteristic(F: DensityField,
                         level: float,
                         method: Any = EulerMethod.PLUGIN_GB,
                         grid: Optional[GridSpec] = None) -> EulerEstimate:
    """
    Euler characteristic of {F = c} in d=3.

    The Gauss-Bonnet methods integrate the Gauss curvature (plug-in, band or
    parallel-tube average) and scale by s_d; the combinatorial method counts
    V - E + F on the level mesh. The raw value and its nearest integer are
    both reported.
    """
    if not isinstance(method, EulerMethod):
        method = EulerMethod(method)
    if F.dim % 2 == 0:
        raise ValueError(f"Euler characteristic by Gauss-Bonnet needs odd d, got d={F.dim}")

    grid = default_grid(F) if grid is None else grid
    level = float(level)
    s_d = gauss_bonnet_constant(F.dim)
    mesh = cached_level_mesh(F, level, grid)
    diagnostics: Dict[str, Any] = {"components": mesh_components(mesh)}
    eps = method.eps

    if method.tag == EulerMethod.PLUGIN_GB:
        raw = s_d * estimate(F, named("gauss_curvature"), level, EstimatorKind.plugin(), grid).value
    elif method.tag == EulerMethod.BAND_GB:
        eps = default_band_eps(F, level, grid) if eps is None else eps
        raw = s_d * estimate(F, named("gauss_curvature"), level, EstimatorKind.band(eps), grid).value
    elif method.tag == EulerMethod.PARALLEL_GB:
        eps = default_tube_eps(grid) if eps is None else eps
        raw = s_d * _parallel_gb(F, level, grid, eps)
    else:
        raw = float(mesh_euler_characteristic(mesh))

    result = EulerEstimate(method=method.tag, level=level, raw=float(raw), snapped=int(round(raw)),
                           eps=eps, diagnostics=diagnostics)
    if result.deviation > 0.15:
        logger.warning("Euler estimate %.4f is %.3f from the nearest integer", raw, result.deviation)
    return result


def euler_characteristic_curve(F: DensityField,
                               levels: Sequence[float],
                               method: Any = EulerMethod.PLUGIN_GB,
                               grid: Optional[GridSpec] = None) -> List[EulerEstimate]:
    """Euler characteristic across levels; empty level sets count as 0."""
    grid = default_grid(F) if grid is None else grid
    curve = []
    for c in levels:
        try:
            curve.append(euler_characteristic(F, c, method, grid))
        except (LevelNotBracketedError, EmptyLevelSetError) as e:
            logger.info("Level %g has an empty level set on the grid: %s", c, e)
            tag = method.tag if isinstance(method, EulerMethod) else str(method)
            curve.append(EulerEstimate(method=tag, level=float(c), raw=0.0, snapped=0,
                                       diagnostics={"empty": True}))
    return curve


# ---------------------------
# Minkowski functionals
# ---------------------------

@dataclass
class MinkowskiReport:
    level: float
    values: List[float]
    surface_integrals: List[float]

    @property
    def dim(self) -> int:
        return len(self.values) - 1

    @property
    def volume(self) -> float:
        return self.values[0]

    @property
    def measure(self) -> float:
        """Perimeter (d=2) or area (d=3) of the level set."""
        return self.surface_integrals[0]

    @property
    def contour_index(self) -> float:
        """Perimeter / sqrt(area); 2 sqrt(pi) for a disc. d=2 only."""
        if self.dim != 2:
            raise ValueError("contour index is defined for d=2")
        return self.measure / np.sqrt(self.volume)

    def to_dict(self) -> Dict[str, Any]:
        out = {"level": self.level}
        for j, v in enumerate(self.values):
            out[f"v{j}"] = v
        if self.dim == 2:
            out["contour_index"] = self.contour_index
        return out


def minkowski_functionals(F: DensityField, level: float, grid: Optional[GridSpec] = None) -> MinkowskiReport:
    """
    V_0 = volume of {F >= c}; V_j = (omega_j C(d, j))^-1 times the surface
    integral of F_j (the (j-1)-th elementary symmetric polynomial of the
    principal curvatures), omega_j the volume of the unit j-ball.
    """
    grid = default_grid(F) if grid is None else grid
    level = float(level)
    d = F.dim

    centers = F.evaluate_grid(grid, "centers", order=0)[0]
    volume = float(np.sum(centers >= level) * grid.cell_volume)

    values, integrals = [volume], []
    for j in range(1, d + 1):
        expr = unity() if j == 1 else named(f"minkowski_F{j}")
        integral = estimate(F, expr, level, EstimatorKind.plugin(), grid).value
        integrals.append(integral)
        values.append(integral / (unit_ball_volume(j) * comb(d, j)))

    return MinkowskiReport(level=level, values=values, surface_integrals=integrals)


def willmore_energy(F: DensityField, level: float, grid: Optional[GridSpec] = None) -> float:
    """Integral of H^2 over {F = c}."""
    return estimate(F, named("willmore"), level, EstimatorKind.plugin(), grid).value
