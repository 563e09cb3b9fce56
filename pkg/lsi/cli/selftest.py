import logging
import numpy as np

from dataclasses import dataclass
from typing import Callable, List, Tuple

from lsi.density.analytic import GaussianField
from lsi.estimators.base import EstimatorKind, default_grid
from lsi.estimators.functionals import EulerMethod, euler_characteristic
from lsi.estimators.surface_integral import estimate
from lsi.geometry.curvature import curvature_bundle, gauss_curvature_adjugate
from lsi.kernels.base import make_kernel


logger = logging.getLogger(__name__)

MOMENT_TOL = 1e-8
CURVATURE_TOL = 1e-8
PERIMETER_TOL = 3e-3
GB_RES = 96


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_kernel_moments() -> Tuple[bool, str]:
    worst = 0.0
    for d in (2, 3):
        for order in (2, 4):
            k = make_kernel(d, order)
            worst = max(worst, max(k.moment_norm(l) for l in range(1, order)))
    return worst <= MOMENT_TOL, f"max vanishing moment {worst:.2e}"


def check_sphere_curvature() -> Tuple[bool, str]:
    field = GaussianField(3, sigma=1.0)
    level = 0.02
    r = field.level_radius(level)

    rng = np.random.default_rng(7)
    directions = rng.standard_normal((32, 3))
    points = r * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    bundle = field.deriv_bundle(points)
    geometry = curvature_bundle(bundle)
    errors = [
        np.max(np.abs(geometry.mean - 1.0 / r)),
        np.max(np.abs(geometry.gauss - 1.0 / r ** 2)),
        np.max(np.abs(gauss_curvature_adjugate(bundle) - 1.0 / r ** 2)),
    ]
    worst = float(max(errors))
    return worst <= CURVATURE_TOL, f"max deviation from 1/r, 1/r^2: {worst:.2e}"


def check_circle_perimeter() -> Tuple[bool, str]:
    field = GaussianField(2, sigma=1.0)
    level = 0.05
    exact = 2.0 * np.pi * field.level_radius(level)
    value = estimate(field, "unity", level, EstimatorKind.plugin(), default_grid(field, 512)).value
    rel = abs(value - exact) / exact
    return rel <= PERIMETER_TOL, f"perimeter {value:.6f} vs {exact:.6f} (rel {rel:.1e})"


def check_gauss_bonnet() -> Tuple[bool, str]:
    field = GaussianField(3, sigma=1.0)
    grid = default_grid(field, GB_RES)
    integral = euler_characteristic(field, 0.02, EulerMethod(EulerMethod.PLUGIN_GB), grid)
    combinatorial = euler_characteristic(field, 0.02, EulerMethod(EulerMethod.COMBINATORIAL), grid)
    passed = integral.snapped == 2 and combinatorial.snapped == 2
    return passed, f"raw {integral.raw:.4f}, snapped {integral.snapped}, mesh {combinatorial.snapped}"


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("kernel moments", check_kernel_moments),
    ("sphere curvature", check_sphere_curvature),
    ("circle perimeter", check_circle_perimeter),
    ("gauss-bonnet snap", check_gauss_bonnet),
]


def run_selftest() -> List[CheckResult]:
    results = []
    for name, check in CHECKS:
        try:
            passed, detail = check()
        except Exception as e:
            logger.exception("Self-test check %r raised", name)
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(CheckResult(name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {name:<18s} {detail}")
    return results
