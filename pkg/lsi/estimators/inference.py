import logging
import numpy as np

from scipy.stats import norm
from typing import Any, Optional

from lsi.density.base import DensityField
from lsi.density.bundle import vech_indices
from lsi.estimators.base import EstimateReport, EstimatorKind, cached_level_mesh, default_grid
from lsi.estimators.surface_integral import estimate
from lsi.exceptions import DegenerateVarianceError, MalformedExpressionError
from lsi.geometry.curvature import unit_normal, weight_wg
from lsi.geometry.phi import PhiExpr, as_phi, phi_gradient
from lsi.integrands import Integrand, PhiIntegrand, as_integrand
from lsi.kernels.base import KernelSpec, gauss_legendre, QUADRATURE_NODES
from lsi.surface.grid import GridSpec
from lsi.surface.mesh import mesh_integral


logger = logging.getLogger(__name__)

DEGENERATE_FRACTION = 0.01


class WeightSquaredIntegrand(Integrand):
    """
    w_g^2 for an integrand g, with w_g built from the field's own derivatives.
    Points with a degenerate gradient contribute zero; more than 1% of them is
    an error.
    """

    needs_bundle = True

    def __init__(self, g: Integrand, level: float, fd_step: Optional[float] = None) -> None:
        self.g = g
        self.level = float(level)
        self.fd_step = fd_step
        self.name = "wg_squared"

    def values(self, field, points, bundle=None):
        points = np.asarray(points, dtype=float)
        if bundle is None:
            bundle = field.deriv_bundle(points)
        bundle = bundle.as_batch()

        bad = bundle.degenerate_mask(self.level)
        if bad.mean() > DEGENERATE_FRACTION:
            raise DegenerateVarianceError(
                f"gradient is degenerate at {int(bad.sum())} of {bad.size} quadrature points "
                f"({100.0 * bad.mean():.1f}% > {100.0 * DEGENERATE_FRACTION:.0f}%)"
            )

        out = np.zeros(points.shape[0])
        ok = ~bad
        if ok.any():
            b = bundle.take(ok)
            g_val = self.g.values(field, points[ok], b)
            g_grad = self.g.gradients(field, points[ok], b, self.fd_step)
            out[ok] = weight_wg(b, g_val, g_grad) ** 2
        return out


def variance_hat(F: DensityField,
                 g: Any,
                 level: float,
                 tau: Optional[float] = None,
                 grid: Optional[GridSpec] = None,
                 kernel: Optional[KernelSpec] = None,
                 kind: Optional[EstimatorKind] = None) -> float:
    """
    Plug-in asymptotic variance c R(K) lambda(F, w_g^2).

    :param F: Density field
    :param g: Integrand with a gradient (closed form or finite differences)
    :param level: Level c
    :param tau: Tube half-width; 0 integrates over the level mesh. Defaults to h
    :param grid: Sampling grid
    :param kernel: Kernel; the field's own kernel when omitted
    :param kind: Estimator for the functional lambda; replaces tau when given
    :return: sigma^2 estimate
    """
    g = as_integrand(g)
    grid = default_grid(F) if grid is None else grid
    kernel = F.kernel if kernel is None else kernel
    if kernel is None:
        raise ValueError("variance_hat needs a kernel for a field without one")

    if kind is not None:
        if tau is not None:
            raise ValueError("pass either tau or kind, not both")
        if not isinstance(kind, EstimatorKind):
            raise TypeError("kind must be an EstimatorKind")
    else:
        if tau is None:
            tau = F.bandwidth or 0.0
        tau = float(tau)
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        kind = EstimatorKind.plugin() if tau == 0.0 else EstimatorKind.tube(tau)

    fd_step = float(np.min(grid.step)) / 4.0 if isinstance(g, PhiIntegrand) else None
    weight = WeightSquaredIntegrand(g, level, fd_step)

    functional = estimate(F, weight, level, kind, grid).value
    sigma2 = float(level) * kernel.roughness() * functional
    logger.debug("variance estimate (%r): %.8g", kind, sigma2)
    return sigma2


def normal_quantile(alpha: float) -> float:
    """z_{alpha/2} = Phi^-1(1 - alpha/2)."""
    return float(norm.ppf(1.0 - 0.5 * alpha))


def confidence_interval(report: EstimateReport,
                        variance: float,
                        alpha: float = 0.05,
                        bandwidth: Optional[float] = None,
                        n: Optional[int] = None) -> EstimateReport:
    """
    value -+ z_{alpha/2} sigma / sqrt(n h).

    :param report: Point estimate
    :param variance: sigma^2 estimate (> 0)
    :param alpha: Miscoverage level in (0, 1)
    :param bandwidth: h; taken from the report when omitted
    :param n: Sample size; taken from the report when omitted
    :return: Report with std_err, ci and alpha filled in
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not np.isfinite(variance) or variance <= 0.0:
        raise DegenerateVarianceError(f"variance estimate {variance:g} is not positive; no interval exists")

    h = report.bandwidth if bandwidth is None else float(bandwidth)
    n = report.n if n is None else int(n)
    if h is None or n is None:
        raise ValueError("confidence intervals need the sample size n and the bandwidth h")
    if h <= 0 or n <= 0:
        raise ValueError("n and h must be positive")

    std_err = float(np.sqrt(variance / (n * h)))
    half = normal_quantile(alpha) * std_err
    return report.with_interval(std_err, (report.value - half, report.value + half), alpha)


# ---------------------------
# Unknown integrands
# ---------------------------

def slice_response(kernel: KernelSpec, normals: np.ndarray, coeffs: np.ndarray, l: int, t: np.ndarray) -> np.ndarray:
    """
    Integral of coeffs . d_{K,l}(t N + v) over v orthogonal to N, one row per
    (normal, coeffs) pair and one column per offset t. For l=2 the coefficients
    follow the vech order of the Hessian.
    """
    if l not in (1, 2):
        raise ValueError(f"l must be 1 or 2, got {l}")

    d = kernel.dim
    t = np.asarray(t, dtype=float).reshape(-1)
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))

    j1 = kernel.slice_integral(t, lambda r: kernel.radial(r, 1))
    if l == 1:
        return np.einsum("ij,ij->i", coeffs, normals)[:, None] * (2.0 * t * j1)[None, :]

    j2 = kernel.slice_integral(t, lambda r: kernel.radial(r, 2))
    j3 = kernel.slice_integral(t, lambda r: kernel.radial(r, 2), rho_power=2)
    a0, a1 = _contractions(coeffs, normals, d)
    alpha = 2.0 * j1 + 4.0 * j3 / (d - 1)
    beta = 4.0 * t ** 2 * j2 - 4.0 * j3 / (d - 1)
    return a0[:, None] * alpha[None, :] + a1[:, None] * beta[None, :]


def _contractions(coeffs: np.ndarray, normals: np.ndarray, d: int):
    """(a : I, a : N N^T) for vech coefficient rows a."""
    a0 = np.zeros(coeffs.shape[0])
    a1 = np.zeros(coeffs.shape[0])
    for k, (i, j) in enumerate(vech_indices(d)):
        if i == j:
            a0 += coeffs[:, k]
        a1 += coeffs[:, k] * normals[:, i] * normals[:, j]
    return a0, a1


def variance_hat_unknown(F: DensityField,
                         expr: Any,
                         level: float,
                         grid: Optional[GridSpec] = None,
                         kernel: Optional[KernelSpec] = None,
                         l: int = 1) -> float:
    """
    sigma_l^2 = c lambda(F, m_{K,l}) for a plug-in integrand phi(d_F).

    m_{K,l}(x) is the integral over t of the squared slice response of
    grad_l phi . d_{K,l}(t N + v) over the affine tangent slices. Spherical
    symmetry of K reduces each slice to the one-dimensional integrals of
    k' and k'' tabulated once per kernel.
    """
    if l not in (1, 2):
        raise ValueError(f"l must be 1 or 2, got {l}")

    expr = as_phi(expr)
    if not isinstance(expr, PhiExpr):
        raise TypeError("expr must be a PhiExpr")
    if not (expr.uses_first() or expr.uses_second()):
        raise MalformedExpressionError("the expression must depend on derivatives of the density")
    if l == 2 and not expr.uses_second():
        logger.warning("Expression does not use second derivatives; sigma_2^2 is zero")
        return 0.0

    grid = default_grid(F) if grid is None else grid
    kernel = F.kernel if kernel is None else kernel
    if kernel is None:
        raise ValueError("variance_hat_unknown needs a kernel for a field without one")

    mesh = cached_level_mesh(F, level, grid)
    bundle = mesh.bundle
    normals = unit_normal(bundle)
    grad1, grad2 = phi_gradient(expr, bundle, mesh.vertices)

    t, w = gauss_legendre(QUADRATURE_NODES)
    response = slice_response(kernel, normals, grad1 if l == 1 else grad2, l, t)
    m_hat = response ** 2 @ w

    return float(level) * mesh_integral(mesh, m_hat)
