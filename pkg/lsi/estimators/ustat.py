import logging
import numpy as np

from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple

from lsi.density.base import DensityField
from lsi.density.bundle import DerivBundle
from lsi.density.kde import KernelDensityField
from lsi.estimators.base import cached_level_mesh, default_grid
from lsi.exceptions import MalformedExpressionError
from lsi.geometry.phi import PhiExpr, as_phi
from lsi.surface.grid import GridSpec
from lsi.surface.mesh import mesh_integral


logger = logging.getLogger(__name__)

MAX_PAIRS = 200


@dataclass(frozen=True)
class UStatEstimate:
    value: float
    n: int
    bandwidth: float
    mean_pairs: float
    max_pairs: int


def _check_index(index: Sequence[int], dim: int) -> Tuple[int, int]:
    try:
        i, j = (int(k) for k in index)
    except (TypeError, ValueError) as e:
        raise ValueError(f"a second-derivative index is a pair (i, j), got {index!r}") from e
    if not (0 <= i < dim and 0 <= j < dim):
        raise ValueError(f"derivative index {(i, j)} out of range for d={dim}")
    return i, j


def _check_first_order(expr: PhiExpr) -> PhiExpr:
    if expr.uses_second():
        raise MalformedExpressionError("the leave-out factor may use the density and its gradient only")
    if expr.needs_points():
        raise MalformedExpressionError("the leave-out factor must be a function of the derivatives alone")
    return expr


def ustat_integrand_estimate(F: KernelDensityField,
                             expr: Any,
                             beta1: Sequence[int],
                             beta2: Sequence[int],
                             level: float,
                             reference: DensityField,
                             grid: Optional[GridSpec] = None,
                             max_pairs: int = MAX_PAIRS,
                             seed: int = 0) -> UStatEstimate:
    """
    Surface integral over the reference level set {f = c} of the U-statistic

        g(x) = 1/(n(n-1)) sum_{i != j} phi(d*_{-ij}(x)) K_b1(x, X_i) K_b2(x, X_j)

    where K_b is the kernel's second derivative of index b scaled by h^-(d+2)
    and d*_{-ij} the leave-two-out density and gradient. Only points within h
    of x contribute; when those give more than `max_pairs` ordered pairs, a
    seeded random subset stands in for them, rescaled to the full count.
    """
    if not isinstance(F, KernelDensityField):
        raise TypeError("the U-statistic estimate needs a KernelDensityField")
    n = F.n
    if n < 3:
        raise ValueError(f"the U-statistic estimate needs n >= 3, got n={n}")
    if max_pairs < 1:
        raise ValueError("max_pairs must be >= 1")

    expr = _check_first_order(as_phi(expr))
    d = F.dim
    b1 = _check_index(beta1, d)
    b2 = _check_index(beta2, d)

    grid = default_grid(reference) if grid is None else grid
    mesh = cached_level_mesh(reference, level, grid)

    h = F.bandwidth
    kernel = F.kernel
    points = F.active_points
    rows, cols = F.neighbours(mesh.vertices)
    starts = np.searchsorted(rows, np.arange(mesh.n_vertices + 1))

    values, grads, _ = F.evaluate(mesh.vertices, order=1)
    rng = np.random.default_rng(seed)

    scale_value = 1.0 / h ** d
    scale_grad = 1.0 / h ** (d + 1)
    scale_hess = 1.0 / h ** (d + 2)

    g_hat = np.zeros(mesh.n_vertices)
    pair_counts = np.zeros(mesh.n_vertices, dtype=np.int64)
    for v in range(mesh.n_vertices):
        near = cols[starts[v]:starts[v + 1]]
        k = near.size
        if k < 2:
            continue

        total = k * (k - 1)
        if total <= max_pairs:
            first, second = np.nonzero(~np.eye(k, dtype=bool))
            weight = 1.0
        else:
            first = rng.integers(0, k, size=max_pairs)
            second = (first + rng.integers(1, k, size=max_pairs)) % k
            weight = total / max_pairs
        pair_counts[v] = first.size

        u = (mesh.vertices[v] - points[near]) / h
        kv, kg, kh = kernel.evaluate(u, order=2)

        lo_value = (n * values[v] - scale_value * (kv[first] + kv[second])) / (n - 2)
        lo_grad = (n * grads[v] - scale_grad * (kg[first] + kg[second])) / (n - 2)
        bundle = DerivBundle(lo_value, lo_grad, np.zeros((first.size, d, d)))
        phi = expr.evaluate(bundle)

        factors = scale_hess ** 2 * kh[first, b1[0], b1[1]] * kh[second, b2[0], b2[1]]
        g_hat[v] = weight * float(np.sum(phi * factors)) / (n * (n - 1))

    value = mesh_integral(mesh, g_hat)
    logger.debug("U-statistic estimate %.6g over %d vertices (mean %.1f pairs)",
                 value, mesh.n_vertices, pair_counts.mean())
    return UStatEstimate(value=value, n=n, bandwidth=h, mean_pairs=float(pair_counts.mean()),
                         max_pairs=int(max_pairs))


def plugin_integrand_estimate(F: DensityField,
                              expr: Any,
                              beta1: Sequence[int],
                              beta2: Sequence[int],
                              level: float,
                              reference: DensityField,
                              grid: Optional[GridSpec] = None) -> float:
    """
    Plug-in counterpart: phi(d_F(x)) times the two Hessian entries of F,
    integrated over the reference level set.
    """
    expr = _check_first_order(as_phi(expr))
    b1 = _check_index(beta1, F.dim)
    b2 = _check_index(beta2, F.dim)

    grid = default_grid(reference) if grid is None else grid
    mesh = cached_level_mesh(reference, level, grid)
    bundle = F.deriv_bundle(mesh.vertices)
    g = expr.evaluate(bundle) * bundle.hess[:, b1[0], b1[1]] * bundle.hess[:, b2[0], b2[1]]
    return mesh_integral(mesh, g)
