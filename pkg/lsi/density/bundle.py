import numpy as np

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Tuple

from lsi.types import Gradients, Hessians, Values


GRADIENT_FLOOR = 1e-8


def gradient_floor(level: float) -> float:
    """Smallest gradient norm at which level-set geometry is still evaluated."""
    return GRADIENT_FLOOR * max(1.0, abs(float(level)))


@lru_cache(maxsize=None)
def vech_indices(dim: int) -> Tuple[Tuple[int, int], ...]:
    """(row, col) pairs of the lower-triangular half-vectorization, column by column."""
    return tuple((i, j) for j in range(dim) for i in range(j, dim))


def vech_length(dim: int) -> int:
    return dim * (dim + 1) // 2


@dataclass(frozen=True)
class DerivBundle:
    """
    Value, gradient and Hessian of a field at one point or a batch of points.

    Single point: value (), grad (d,), hess (d, d).
    Batch of m points: value (m,), grad (m, d), hess (m, d, d).
    """

    value: Values
    grad: Gradients
    hess: Hessians

    def __post_init__(self) -> None:
        grad = np.asarray(self.grad, dtype=float)
        hess = np.asarray(self.hess, dtype=float)
        value = np.asarray(self.value, dtype=float)

        if grad.ndim not in (1, 2):
            raise ValueError("grad must have shape (d,) or (m, d)")

        if hess.shape != grad.shape + (grad.shape[-1],):
            raise ValueError(f"hess shape {hess.shape} does not match grad shape {grad.shape}")

        if value.shape != grad.shape[:-1]:
            raise ValueError(f"value shape {value.shape} does not match grad shape {grad.shape}")

        object.__setattr__(self, "value", value)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", hess)

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @property
    def is_batch(self) -> bool:
        return self.grad.ndim == 2

    def __len__(self) -> int:
        return self.grad.shape[0] if self.is_batch else 1

    @cached_property
    def grad_norm(self) -> np.ndarray:
        return np.linalg.norm(self.grad, axis=-1)

    @cached_property
    def hess_vech(self) -> np.ndarray:
        rows, cols = zip(*vech_indices(self.dim))
        return self.hess[..., list(rows), list(cols)]

    @property
    def df(self) -> np.ndarray:
        """Derivative vector (d_{f,1}, d_{f,2}) of length d + d(d+1)/2."""
        return np.concatenate([self.grad, self.hess_vech], axis=-1)

    @classmethod
    def from_df(cls, value: np.ndarray, df: np.ndarray) -> "DerivBundle":
        """Inverse of `df`: rebuild a (possibly batched) bundle from derivative vectors."""
        df = np.asarray(df, dtype=float)
        a = df.shape[-1]
        dim = int(round((np.sqrt(9 + 8 * a) - 3) / 2))
        if dim + vech_length(dim) != a:
            raise ValueError(f"derivative vector of length {a} does not match any dimension")

        hess = np.zeros(df.shape[:-1] + (dim, dim))
        for k, (i, j) in enumerate(vech_indices(dim)):
            hess[..., i, j] = df[..., dim + k]
            hess[..., j, i] = df[..., dim + k]

        return cls(value=value, grad=df[..., :dim], hess=hess)

    def take(self, index) -> "DerivBundle":
        if not self.is_batch:
            raise ValueError("take() needs a batched bundle")
        return DerivBundle(self.value[index], self.grad[index], self.hess[index])

    def as_batch(self) -> "DerivBundle":
        if self.is_batch:
            return self
        return DerivBundle(self.value[None], self.grad[None, :], self.hess[None, :, :])

    def scaled(self, factor: float) -> "DerivBundle":
        return DerivBundle(factor * self.value, factor * self.grad, factor * self.hess)

    def rotated(self, rotation: np.ndarray) -> "DerivBundle":
        """Bundle of f(Q^T x) evaluated at Q x."""
        q = np.asarray(rotation, dtype=float)
        return DerivBundle(
            self.value,
            self.grad @ q.T,
            np.einsum("ij,...jk,lk->...il", q, self.hess, q),
        )

    def degenerate_mask(self, level: float) -> np.ndarray:
        return np.atleast_1d(self.grad_norm) < gradient_floor(level)
