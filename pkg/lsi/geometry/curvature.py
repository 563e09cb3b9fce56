import logging
import numpy as np

from dataclasses import dataclass
from itertools import combinations
from typing import Tuple, Union

from lsi.density.bundle import DerivBundle, gradient_floor
from lsi.exceptions import DegenerateGradientError, FocalPointError


logger = logging.getLogger(__name__)

FOCAL_GUARD = 1e-8


@dataclass(frozen=True)
class CurvatureBundle:
    """
    Geometry of the level set through a point (or a batch of points).

    Curvatures are taken with respect to the outward normal -N of the
    super-level set, so convex blobs have positive curvature. Fj holds
    F_1 = 1, F_2 = sum of principal curvatures, ..., F_d = their product.
    """

    normal: np.ndarray
    projector: np.ndarray
    shape_op: np.ndarray
    principal: np.ndarray
    mean: np.ndarray
    gauss: np.ndarray
    Fj: np.ndarray

    def take(self, index: int) -> "CurvatureBundle":
        return CurvatureBundle(*(getattr(self, name)[index] for name in self.__dataclass_fields__))


def _check_gradient(b: DerivBundle) -> None:
    floors = np.maximum(1.0, np.abs(np.atleast_1d(b.value))) * gradient_floor(1.0)
    bad = np.atleast_1d(b.grad_norm) < floors
    if bad.any():
        raise DegenerateGradientError(
            f"gradient norm below the floor at {int(bad.sum())} of {bad.size} points", int(bad.sum())
        )


def elementary_symmetric(values: np.ndarray) -> np.ndarray:
    """e_0 .. e_k of the last axis (k entries), batched over leading axes."""
    values = np.asarray(values, dtype=float)
    k = values.shape[-1]
    e = np.zeros(values.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    for i in range(k):
        e[..., 1:i + 2] = e[..., 1:i + 2] + values[..., i:i + 1] * e[..., 0:i + 1]
    return e


def principal_minor_sums(matrix: np.ndarray) -> np.ndarray:
    """Sums of all j x j principal minors, j = 1..d, batched."""
    matrix = np.asarray(matrix, dtype=float)
    d = matrix.shape[-1]
    sums = []
    for j in range(1, d + 1):
        total = 0.0
        for idx in combinations(range(d), j):
            sub = matrix[..., list(idx), :][..., :, list(idx)]
            total = total + np.linalg.det(sub)
        sums.append(total)
    return np.stack(sums, axis=-1)


def unit_normal(b: DerivBundle) -> np.ndarray:
    """N = grad f / |grad f| (points into the super-level set)."""
    _check_gradient(b)
    return b.grad / np.asarray(b.grad_norm)[..., None]


def mean_curvature(b: DerivBundle) -> np.ndarray:
    """H = -(tr Hf - N^T Hf N) / ((d - 1) |grad f|), without an eigensolve."""
    n = unit_normal(b)
    trace = np.trace(b.hess, axis1=-2, axis2=-1)
    normal_part = np.einsum("...i,...ij,...j->...", n, b.hess, n)
    return -(trace - normal_part) / ((b.dim - 1) * b.grad_norm)


def curvature_bundle(b: DerivBundle) -> CurvatureBundle:
    """
    Normal, projector, shape operator and curvatures from a derivative bundle.

    S = -|grad f|^-1 G Hf G. The structural zero eigenvalue of S is the one
    whose eigenvector is most aligned with N.
    """
    _check_gradient(b)
    single = not b.is_batch
    bb = b.as_batch()
    m, d = bb.grad.shape

    n = bb.grad / bb.grad_norm[:, None]
    g = np.eye(d)[None] - np.einsum("ki,kj->kij", n, n)
    s = -np.einsum("kij,kjl,klm->kim", g, bb.hess, g) / bb.grad_norm[:, None, None]
    s = 0.5 * (s + np.swapaxes(s, 1, 2))

    eigvals, eigvecs = np.linalg.eigh(s)
    alignment = np.abs(np.einsum("kij,ki->kj", eigvecs, n))
    structural = np.argmax(alignment, axis=1)

    keep = np.ones((m, d), dtype=bool)
    keep[np.arange(m), structural] = False
    principal = eigvals[keep].reshape(m, d - 1)

    fj = elementary_symmetric(principal)
    result = CurvatureBundle(
        normal=n,
        projector=g,
        shape_op=s,
        principal=principal,
        mean=principal.mean(axis=1),
        gauss=np.prod(principal, axis=1),
        Fj=fj,
    )
    return result.take(0) if single else result


def _adjugate(matrix: np.ndarray) -> np.ndarray:
    d = matrix.shape[-1]
    if d == 2:
        adj = np.empty_like(matrix)
        adj[..., 0, 0] = matrix[..., 1, 1]
        adj[..., 1, 1] = matrix[..., 0, 0]
        adj[..., 0, 1] = -matrix[..., 0, 1]
        adj[..., 1, 0] = -matrix[..., 1, 0]
        return adj
    if d == 3:
        r0, r1, r2 = matrix[..., 0, :], matrix[..., 1, :], matrix[..., 2, :]
        return np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)], axis=-1)
    raise ValueError("adjugate by cofactors is implemented for d = 2 and 3")


def gauss_curvature_adjugate(b: DerivBundle) -> np.ndarray:
    """kappa = (-1)^(d-1) N^T adj(Hf) N / |grad f|^(d-1)."""
    n = unit_normal(b)
    adj = _adjugate(b.hess)
    d = b.dim
    quad = np.einsum("...i,...ij,...j->...", n, adj, n)
    return (-1.0) ** (d - 1) * quad / np.asarray(b.grad_norm) ** (d - 1)


def weight_wg(b: DerivBundle,
              g_val: Union[float, np.ndarray],
              g_grad: np.ndarray) -> np.ndarray:
    """
    Variance weight w_g = |grad f|^-1 [n^T grad g + (d - 1) H g] with the
    outward normal n = -N and outward mean curvature H.
    """
    n = unit_normal(b)
    g_val = np.asarray(g_val, dtype=float)
    g_grad = np.asarray(g_grad, dtype=float)

    d = b.dim
    trace = np.trace(b.hess, axis1=-2, axis2=-1)
    normal_part = np.einsum("...i,...ij,...j->...", n, b.hess, n)
    mean_term = -(trace - normal_part) / b.grad_norm

    outward = -np.einsum("...i,...i->...", n, g_grad)
    return (outward + mean_term * g_val) / b.grad_norm


def parallel_curvature(principal_at_foot: np.ndarray,
                       eps: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Curvatures of the parallel surface at signed outward offset eps:
    kappa_i / (1 + eps kappa_i).

    :return: Tuple (gauss_sharp, principal_sharp)
    """
    principal = np.asarray(principal_at_foot, dtype=float)
    eps = np.asarray(eps, dtype=float)
    denom = 1.0 + eps[..., None] * principal

    if np.any(np.abs(denom) < FOCAL_GUARD):
        raise FocalPointError("offset reaches a focal point of the level set; reduce eps")

    sharp = principal / denom
    return np.prod(sharp, axis=-1), sharp
