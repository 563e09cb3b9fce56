import logging
import numpy as np

from dataclasses import dataclass
from typing import Optional, Union

from lsi.density.base import DensityField
from lsi.estimators.base import cached_level_mesh, default_grid
from lsi.exceptions import DegenerateBandwidthError
from lsi.kernels.base import KernelSpec, make_kernel
from lsi.surface.grid import GridSpec
from lsi.surface.mesh import mesh_integral


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandwidthSelection:
    """
    Minimizer of the surface-integrated mean squared error
    risk(h) = h^4 B + A / (n h^d).
    """

    h_opt: float
    variance_term: float
    bias_term: float
    n: int
    dim: int

    def risk(self, h: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        h = np.asarray(h, dtype=float)
        out = h ** 4 * self.bias_term + self.variance_term / (self.n * h ** self.dim)
        return float(out) if out.ndim == 0 else out

    def with_n(self, n: int) -> "BandwidthSelection":
        return _select(self.variance_term, self.bias_term, n, self.dim)


def _select(a: float, b: float, n: int, dim: int) -> BandwidthSelection:
    h = (dim * a / (4.0 * b * n)) ** (1.0 / (dim + 4))
    return BandwidthSelection(h_opt=float(h), variance_term=a, bias_term=b, n=int(n), dim=dim)


def bandwidth_opt(F_pilot: DensityField,
                  level: float,
                  grid: Optional[GridSpec] = None,
                  kernel: Optional[KernelSpec] = None,
                  n: Optional[int] = None) -> BandwidthSelection:
    """
    Closed-form bandwidth for level-set estimation from a pilot field.

    A = integral of c R2(K) / |grad f| and B = integral of b(x)^2 / |grad f|
    over the pilot's level set, with b = mu_2 / 2 * Laplacian f the leading
    smoothing bias and R2(K) the integral of K^2.

    :param F_pilot: Pilot density (KDE or analytic)
    :param level: Level c
    :param grid: Sampling grid
    :param kernel: Order-2 kernel; the pilot's, else the default of its dimension
    :param n: Sample size; the pilot's when omitted
    """
    if kernel is None:
        kernel = F_pilot.kernel or make_kernel(F_pilot.dim)
    if kernel.order != 2:
        raise ValueError(f"bandwidth selection uses the second-order bias expansion; kernel order is {kernel.order}")

    n = F_pilot.n if n is None else n
    if n is None:
        raise ValueError("sample size n is required for an analytic pilot")
    if int(n) < 1:
        raise ValueError(f"n must be positive, got {n}")

    grid = default_grid(F_pilot) if grid is None else grid
    mesh = cached_level_mesh(F_pilot, level, grid)
    norms = mesh.grad_norms

    laplacian = np.trace(mesh.bundle.hess, axis1=1, axis2=2)
    bias = 0.5 * kernel.second_moment() * laplacian

    a = mesh_integral(mesh, float(level) * kernel.l2_norm_squared() / norms)
    b = mesh_integral(mesh, bias ** 2 / norms)
    if not (np.isfinite(b) and b > 0):
        raise DegenerateBandwidthError(f"bias functional is {b:g}; the Hessian vanishes on the level set")

    selection = _select(a, b, int(n), F_pilot.dim)
    logger.info("Bandwidth selection: h_opt=%.5g (A=%.5g, B=%.5g, n=%d)", selection.h_opt, a, b, n)
    return selection
