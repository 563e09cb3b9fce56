import logging
import threading
import numpy as np

from collections import OrderedDict
from typing import Any, Dict, Optional, Tuple

from lsi.parallel import ordered_map
from lsi.density.bundle import DerivBundle
from lsi.types import FieldEvaluation, Points


logger = logging.getLogger(__name__)


class DensityField:
    """
    Base class for scalar fields with analytic gradient and Hessian.

    Subclasses implement `_evaluate` on a batch of points; everything else
    (chunking, single-point helpers, derivative bundles, cached grid sweeps)
    lives here. Fields are immutable after construction.
    """

    CHUNK_SIZE: int = 32768
    GRID_CACHE_SIZE: int = 4

    def __init__(self, dim: int) -> None:
        if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool):
            raise TypeError("dim must be an integer")

        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")

        self._dim = int(dim)
        self._grid_cache: "OrderedDict[Tuple, FieldEvaluation]" = OrderedDict()
        self._grid_lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self._dim

    def _evaluate(self, points: Points, order: int) -> FieldEvaluation:
        raise NotImplementedError("This method must be implemented in subclasses.")

    def _as_points(self, points: np.ndarray) -> Points:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[None, :]

        if points.ndim != 2 or points.shape[1] != self._dim:
            raise ValueError(f"expected points of shape (m, {self._dim}), got {points.shape}")

        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")

        return points

    def evaluate(self, points: np.ndarray, order: int = 2) -> FieldEvaluation:
        """
        Evaluate the field and its derivatives on a batch of points.

        :param points: Array of shape (m, d) (a single (d,) point is accepted)
        :param order: Highest derivative order (0, 1 or 2)
        :return: Tuple (values (m,), grads (m, d) or None, hessians (m, d, d) or None)
        """
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")

        points = self._as_points(points)
        m = points.shape[0]

        if m <= self.CHUNK_SIZE:
            return self._evaluate(points, order)

        chunks = [points[k:k + self.CHUNK_SIZE] for k in range(0, m, self.CHUNK_SIZE)]
        parts = ordered_map(lambda chunk: self._evaluate(chunk, order), chunks)

        values = np.concatenate([p[0] for p in parts])
        grads = np.concatenate([p[1] for p in parts]) if order >= 1 else None
        hessians = np.concatenate([p[2] for p in parts]) if order >= 2 else None
        return values, grads, hessians

    def value(self, x: np.ndarray):
        values = self.evaluate(x, order=0)[0]
        return float(values[0]) if np.ndim(x) == 1 else values

    def grad(self, x: np.ndarray) -> np.ndarray:
        grads = self.evaluate(x, order=1)[1]
        return grads[0] if np.ndim(x) == 1 else grads

    def hess(self, x: np.ndarray) -> np.ndarray:
        hessians = self.evaluate(x, order=2)[2]
        return hessians[0] if np.ndim(x) == 1 else hessians

    def deriv_bundle(self, x: np.ndarray) -> DerivBundle:
        values, grads, hessians = self.evaluate(x, order=2)
        if np.ndim(x) == 1:
            return DerivBundle(values[0], grads[0], hessians[0])
        return DerivBundle(values, grads, hessians)

    def evaluate_grid(self, grid, where: str = "nodes", order: int = 0) -> FieldEvaluation:
        """
        Evaluate on grid nodes or cell centers, reshaped to the grid layout.

        Results are cached per (grid, where, order) since estimators sweep the
        same grid repeatedly.
        """
        if where not in ("nodes", "centers"):
            raise ValueError("where must be 'nodes' or 'centers'")

        key = (grid.key, where, order)
        with self._grid_lock:
            if key in self._grid_cache:
                self._grid_cache.move_to_end(key)
                return self._grid_cache[key]

        shape = grid.node_shape if where == "nodes" else grid.cell_shape
        points = grid.nodes() if where == "nodes" else grid.cell_centers()

        logger.debug("Evaluating %s on %d grid %s (order %d)",
                     type(self).__name__, points.shape[0], where, order)
        values, grads, hessians = self.evaluate(points, order=order)

        result = (
            values.reshape(shape),
            grads.reshape(shape + (self._dim,)) if grads is not None else None,
            hessians.reshape(shape + (self._dim, self._dim)) if hessians is not None else None,
        )
        for array in result:
            if array is not None:
                array.setflags(write=False)

        with self._grid_lock:
            self._grid_cache[key] = result
            while len(self._grid_cache) > self.GRID_CACHE_SIZE:
                self._grid_cache.popitem(last=False)

        return result

    def sample(self, n: int, seed: int):
        raise TypeError(f"{type(self).__name__} cannot be sampled from")

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError("This method must be implemented in subclasses.")

    @property
    def kernel(self) -> Optional[Any]:
        return None

    @property
    def bandwidth(self) -> Optional[float]:
        return None

    @property
    def n(self) -> Optional[int]:
        return None
