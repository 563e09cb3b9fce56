import logging
import numpy as np

from functools import lru_cache
from itertools import combinations_with_replacement
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from scipy.special import beta, gamma
from typing import Callable, List, Optional, Tuple

from lsi.types import FieldEvaluation


logger = logging.getLogger(__name__)

QUADRATURE_NODES = 64


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=8)
def ball_quadrature(dim: int, n: int = QUADRATURE_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tensor-product Gauss-Legendre rule on the closed unit ball.

    Each axis is integrated over the chord left by the previous axes, so a
    radial polynomial times (1 - |u|^2)^s is integrated to machine precision.

    :param dim: Ball dimension (2 or 3)
    :param n: Nodes per axis
    :return: Tuple of (points, weights) with shapes (n**dim, dim) and (n**dim,)
    """
    if dim not in (2, 3):
        raise ValueError("ball quadrature is available for dim 2 and 3 only")

    nodes, weights = gauss_legendre(n)

    points = np.zeros((1, 0))
    w = np.ones(1)
    remaining = np.ones(1)

    for _ in range(dim):
        half = np.sqrt(np.clip(remaining, 0.0, None))
        coord = half[:, None] * nodes[None, :]
        w = (w * half)[:, None] * weights[None, :]

        points = np.concatenate(
            [np.repeat(points, n, axis=0), coord.reshape(-1, 1)], axis=1
        )
        remaining = (remaining[:, None] - coord ** 2).reshape(-1)
        w = w.reshape(-1)

    points.setflags(write=False)
    w.setflags(write=False)
    return points, w


class KernelSpec:
    """
    Compactly supported spherically symmetric kernel
    K(u) = c * p(|u|^2) * (1 - |u|^2)^s on the unit ball.

    p has degree order/2 - 1 and is fixed by requiring the radial moments of
    orders 2, 4, ..., order-2 to vanish; c normalizes the integral to one.
    Instances are immutable.
    """

    def __init__(self,
                 dim: int,
                 order: int = 2,
                 smoothness: int = 5) -> None:
        """
        :param dim: Dimension d >= 2
        :param order: Even kernel order nu >= 2
        :param smoothness: Profile exponent s >= 5
        """
        self._dim = self._check_int("dim", dim, 2)
        self._order = self._check_int("order", order, 2)
        self._smoothness = self._check_int("smoothness", smoothness, 5)

        if self._order % 2:
            raise ValueError("order must be even (odd moments vanish by symmetry)")

        self._radial_coeffs, self._norm_const = self._solve_moment_system()

        base = Polynomial(self._radial_coeffs) * Polynomial([1.0, -1.0]) ** self._smoothness
        self._profile = self._norm_const * base
        self._profile_d1 = self._profile.deriv(1)
        self._profile_d2 = self._profile.deriv(2)

    @staticmethod
    def _check_int(name: str, value: int, minimum: int) -> int:
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise TypeError(f"{name} must be an integer")

        if value < minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {value}")

        return int(value)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def order(self) -> int:
        return self._order

    @property
    def smoothness(self) -> int:
        return self._smoothness

    @property
    def radial_coeffs(self) -> List[float]:
        return [float(a) for a in self._radial_coeffs]

    @property
    def norm_const(self) -> float:
        return float(self._norm_const)

    def radial_moment(self, q: int) -> float:
        """Integral of |u|^(2q) (1 - |u|^2)^s over the unit ball."""
        d = self._dim
        return float(np.pi ** (d / 2) / gamma(d / 2) * beta(q + d / 2, self._smoothness + 1))

    def _solve_moment_system(self) -> Tuple[np.ndarray, float]:
        m = self._order // 2 - 1
        hankel = np.array([[self.radial_moment(j + k) for k in range(m + 1)]
                           for j in range(m + 1)])
        rhs = np.zeros(m + 1)
        rhs[0] = 1.0

        try:
            b = linalg.solve(hankel, rhs, assume_a="sym")
        except linalg.LinAlgError as e:
            raise RuntimeError(f"moment system for order {self._order} is singular") from e

        top = sum(b[k] * self.radial_moment(m + 1 + k) for k in range(m + 1))
        if not np.isfinite(top) or abs(top) < 1e-14:
            raise RuntimeError(f"order-{self._order} moment of the kernel vanishes")

        norm_const = b[0] if b[0] != 0.0 else 1.0
        return b / norm_const, float(norm_const)

    def radial(self, t_sq: np.ndarray, derivative: int = 0) -> np.ndarray:
        """Radial profile k(t) with K(u) = k(|u|^2), or its t-derivatives, zero for t >= 1."""
        t_sq = np.asarray(t_sq, dtype=float)
        poly = (self._profile, self._profile_d1, self._profile_d2)[derivative]
        return np.where(t_sq < 1.0, poly(t_sq), 0.0)

    def evaluate(self, u: np.ndarray, order: int = 2) -> FieldEvaluation:
        """
        Kernel value and analytic derivatives at a batch of points.

        :param u: Points of shape (m, d)
        :param order: Highest derivative order to return (0, 1 or 2)
        :return: Tuple (values (m,), grads (m, d) or None, hessians (m, d, d) or None)
        """
        u = np.asarray(u, dtype=float)
        if u.ndim != 2 or u.shape[1] != self._dim:
            raise ValueError(f"expected points of shape (m, {self._dim}), got {u.shape}")

        t_sq = np.einsum("ij,ij->i", u, u)
        values = self.radial(t_sq)

        grads = hessians = None
        if order >= 1:
            k1 = self.radial(t_sq, 1)
            grads = 2.0 * k1[:, None] * u
        if order >= 2:
            k2 = self.radial(t_sq, 2)
            hessians = 4.0 * k2[:, None, None] * np.einsum("ij,ik->ijk", u, u)
            hessians += 2.0 * k1[:, None, None] * np.eye(self._dim)[None, :, :]

        return values, grads, hessians

    def value(self, u: np.ndarray) -> float:
        return float(self.evaluate(np.reshape(u, (1, -1)), order=0)[0][0])

    def grad(self, u: np.ndarray) -> np.ndarray:
        return self.evaluate(np.reshape(u, (1, -1)), order=1)[1][0]

    def hess(self, u: np.ndarray) -> np.ndarray:
        return self.evaluate(np.reshape(u, (1, -1)), order=2)[2][0]

    def moment_norm(self, l: int) -> float:
        """
        Max-norm of the moment tensor of order l, by quadrature over the ball.
        Diagnostic only.
        """
        if not 0 <= l <= self._order:
            raise ValueError(f"moment order must lie in [0, {self._order}]")

        points, weights = ball_quadrature(self._dim)
        wk = weights * self.radial(np.einsum("ij,ij->i", points, points))

        best = 0.0
        for index in combinations_with_replacement(range(self._dim), l):
            integrand = wk.copy()
            for axis in index:
                integrand *= points[:, axis]
            best = max(best, abs(float(np.sum(integrand))))

        return best

    def second_moment(self) -> float:
        """mu_2 with int u u^T K(u) du = mu_2 I."""
        return self.norm_const * float(
            sum(a * self.radial_moment(k + 1) for k, a in enumerate(self._radial_coeffs))
        ) / self._dim

    def l2_norm_squared(self) -> float:
        points, weights = ball_quadrature(self._dim)
        k = self.radial(np.einsum("ij,ij->i", points, points))
        return float(np.sum(weights * k * k))

    def slice_integral(self,
                       t: np.ndarray,
                       func: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                       rho_power: int = 0) -> np.ndarray:
        """
        Integral of func(t^2 + |v|^2) * |v|^rho_power over the hyperplane
        {t e + v : v orthogonal to e}, for any unit vector e.

        :param t: Offsets of the hyperplanes from the origin
        :param func: Function of the squared radius, defaults to the profile k
        :param rho_power: Extra even power of the in-plane radius
        :return: Slice integrals with the shape of t
        """
        if func is None:
            func = self.radial

        t = np.asarray(t, dtype=float)
        d = self._dim
        sphere = 2.0 * np.pi ** ((d - 1) / 2) / gamma((d - 1) / 2)

        nodes, weights = gauss_legendre(QUADRATURE_NODES)
        half = 0.5 * np.sqrt(np.clip(1.0 - t ** 2, 0.0, None))
        rho = half[..., None] * (nodes + 1.0)
        integrand = func(t[..., None] ** 2 + rho ** 2) * rho ** (d - 2 + rho_power)

        return sphere * half * np.sum(weights * integrand, axis=-1)

    def roughness(self) -> float:
        """R(K): integral over t of the squared hyperplane slice integral."""
        nodes, weights = gauss_legendre(QUADRATURE_NODES)
        slices = self.slice_integral(nodes)
        return float(np.sum(weights * slices ** 2))

    def to_dict(self) -> dict:
        return {
            "dim": self._dim,
            "order": self._order,
            "smoothness": self._smoothness,
            "radial_coeffs": self.radial_coeffs,
            "norm_const": self.norm_const,
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KernelSpec):
            return NotImplemented
        return (self._dim, self._order, self._smoothness) == (other._dim, other._order, other._smoothness)

    def __hash__(self) -> int:
        return hash((self._dim, self._order, self._smoothness))

    def __repr__(self) -> str:
        return f"KernelSpec(dim={self._dim}, order={self._order}, smoothness={self._smoothness})"


@lru_cache(maxsize=32)
def make_kernel(dim: int, order: int = 2, smoothness: int = 5) -> KernelSpec:
    return KernelSpec(dim, order, smoothness)
