import logging
import numpy as np

from typing import Any, Dict, List, Optional, Sequence, Union

from lsi.density.base import DensityField
from lsi.density.samples import SamplePoints
from lsi.types import FieldEvaluation, Points


logger = logging.getLogger(__name__)


class GaussianMixtureField(DensityField):
    """
    Mixture of axis-aligned Gaussians with closed-form derivatives.
    Serves as the ground-truth density in tests and simulations.
    """

    NORMALIZATION_TOL: float = 1e-3

    def __init__(self,
                 weights: Sequence[float],
                 means: Sequence[Sequence[float]],
                 sigmas: Union[Sequence[float], Sequence[Sequence[float]]]) -> None:
        """
        :param weights: Component weights, must sum to one
        :param means: Component means, shape (k, d)
        :param sigmas: Per-component standard deviations, shape (k,) (isotropic) or (k, d)
        """
        means = np.atleast_2d(np.asarray(means, dtype=float))
        k, dim = means.shape
        super().__init__(dim)

        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.shape != (k,):
            raise ValueError(f"expected {k} weights, got {weights.shape[0]}")
        if np.any(weights <= 0):
            raise ValueError("mixture weights must be positive")

        sigmas = np.asarray(sigmas, dtype=float)
        if sigmas.ndim <= 1:
            sigmas = np.repeat(sigmas.reshape(-1, 1), dim, axis=1)
        if sigmas.shape != (k, dim):
            raise ValueError(f"sigmas must have shape ({k},) or ({k}, {dim}), got {sigmas.shape}")
        if np.any(sigmas <= 0) or not np.all(np.isfinite(sigmas)):
            raise ValueError("standard deviations must be positive and finite")

        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")

        self._weights = weights
        self._means = means
        self._sigmas = sigmas
        self._norms = weights / np.prod(np.sqrt(2.0 * np.pi) * sigmas, axis=1)

        self._check_normalization()

    @property
    def weights(self) -> np.ndarray:
        return self._weights.copy()

    @property
    def means(self) -> np.ndarray:
        return self._means.copy()

    @property
    def sigmas(self) -> np.ndarray:
        return self._sigmas.copy()

    def _check_normalization(self) -> None:
        """Trapezoid rule over an 8-sigma box; Gaussians make it spectrally accurate."""
        lower = np.min(self._means - 8.0 * self._sigmas, axis=0)
        upper = np.max(self._means + 8.0 * self._sigmas, axis=0)
        per_axis = 96 if self.dim == 2 else 48

        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lower, upper)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        values = self._evaluate(mesh, 0)[0].reshape((per_axis,) * self.dim)

        total = values
        for axis in reversed(range(self.dim)):
            total = np.trapezoid(total, axes[axis], axis=axis)

        if abs(float(total) - 1.0) > self.NORMALIZATION_TOL:
            raise ValueError(f"density integrates to {float(total):.6f}, not 1 (check the weights)")

    def _evaluate(self, points: Points, order: int) -> FieldEvaluation:
        m, d = points.shape
        values = np.zeros(m)
        grads = np.zeros((m, d)) if order >= 1 else None
        hessians = np.zeros((m, d, d)) if order >= 2 else None

        for norm, mean, sigma in zip(self._norms, self._means, self._sigmas):
            a = (points - mean) / sigma ** 2
            phi = norm * np.exp(-0.5 * np.sum(((points - mean) / sigma) ** 2, axis=1))
            values += phi

            if order >= 1:
                grads -= a * phi[:, None]
            if order >= 2:
                hessians += (np.einsum("ij,ik->ijk", a, a) - np.diag(1.0 / sigma ** 2)[None]) * phi[:, None, None]

        return values, grads, hessians

    def sample(self, n: int, seed: int) -> SamplePoints:
        """Draw n points with a generator owned by this call."""
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("n must be a non-negative integer")

        rng = np.random.default_rng(seed)
        components = rng.choice(len(self._weights), size=int(n), p=self._weights / self._weights.sum())
        noise = rng.standard_normal((int(n), self.dim))
        return SamplePoints(self._means[components] + self._sigmas[components] * noise)

    def moments(self) -> Dict[str, np.ndarray]:
        w = self._weights
        mean = w @ self._means
        second = np.einsum("k,kij->ij", w,
                           np.einsum("ki,kj->kij", self._means, self._means)
                           + np.stack([np.diag(s ** 2) for s in self._sigmas]))
        return {"mean": mean, "covariance": second - np.outer(mean, mean)}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": "mixture",
            "weights": self._weights.tolist(),
            "means": self._means.tolist(),
            "sigmas": self._sigmas.tolist(),
        }


class GaussianField(GaussianMixtureField):
    """Isotropic Gaussian N(mean, sigma^2 I); its level sets are spheres."""

    def __init__(self,
                 dim: int = 2,
                 mean: Optional[Sequence[float]] = None,
                 sigma: float = 1.0) -> None:
        if mean is None:
            mean = np.zeros(dim)
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (dim,):
            raise ValueError(f"mean must have shape ({dim},)")

        super().__init__([1.0], [mean], [float(sigma)])

    @property
    def sigma(self) -> float:
        return float(self._sigmas[0, 0])

    @property
    def center(self) -> np.ndarray:
        return self._means[0].copy()

    def level_radius(self, level: float) -> float:
        """Radius of the sphere {f = level}: sigma * sqrt(-2 ln(level (2 pi sigma^2)^(d/2)))."""
        peak = self._norms[0]
        if not 0.0 < level < peak:
            raise ValueError(f"level {level} outside (0, {peak})")
        return self.sigma * float(np.sqrt(-2.0 * np.log(level / peak)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": "gaussian",
            "dim": self.dim,
            "mean": self._means[0].tolist(),
            "sigma": self.sigma,
        }


class ProductGaussianField(GaussianMixtureField):
    """Product of independent 1-D Gaussians (diagonal covariance)."""

    def __init__(self,
                 means: Sequence[float],
                 sigmas: Sequence[float]) -> None:
        super().__init__([1.0], [list(means)], [list(sigmas)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": "product",
            "means": self._means[0].tolist(),
            "sigmas": self._sigmas[0].tolist(),
        }


FIELD_FAMILIES: List[str] = ["gaussian", "mixture", "product"]


def field_from_dict(spec: Dict[str, Any]) -> GaussianMixtureField:
    """
    Build an analytic field from its JSON description, e.g.
    {"family": "gaussian", "dim": 3, "sigma": 1.0} or
    {"family": "mixture", "weights": [...], "means": [...], "sigmas": [...]}.
    """
    if not isinstance(spec, dict):
        raise TypeError("field description must be a JSON object")

    family = spec.get("family")
    try:
        if family == "gaussian":
            return GaussianField(int(spec.get("dim", 2)), spec.get("mean"), float(spec.get("sigma", 1.0)))
        if family == "mixture":
            return GaussianMixtureField(spec["weights"], spec["means"], spec["sigmas"])
        if family == "product":
            return ProductGaussianField(spec["means"], spec["sigmas"])
    except KeyError as e:
        raise ValueError(f"field description for family {family!r} is missing {e}") from e

    raise ValueError(f"Unknown field family {family!r}. Choose from: {', '.join(FIELD_FAMILIES)}")
