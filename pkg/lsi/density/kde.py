import logging
import numpy as np

from itertools import chain
from scipy.spatial import cKDTree
from typing import Any, Dict, FrozenSet, Iterable, Optional, Union

from lsi.density.base import DensityField
from lsi.density.samples import SamplePoints, as_sample
from lsi.kernels import KernelSpec, make_kernel
from lsi.types import FieldEvaluation, Points


logger = logging.getLogger(__name__)


def default_bandwidth(sample: Union[SamplePoints, np.ndarray]) -> float:
    """h = n^(-1/(d+4)) times the average per-axis sample standard deviation."""
    sample = as_sample(sample)
    if sample.n < 2:
        scale = 1.0
    else:
        scale = float(np.mean(np.std(sample.coords, axis=0, ddof=1)))
        if not scale > 0.0:
            scale = 1.0

    return scale * sample.n ** (-1.0 / (sample.dim + 4))


class KernelDensityField(DensityField):
    """
    Kernel density estimate f(x) = 1/(n' h^d) sum_i K((x - X_i)/h)
    over the sample points not in `excluded`, with analytic derivatives.

    Only sample points within distance h of a query contribute; they are
    found with a KD-tree over the active sample.
    """

    def __init__(self,
                 sample: Union[SamplePoints, np.ndarray],
                 bandwidth: Optional[float] = None,
                 kernel: Optional[KernelSpec] = None,
                 excluded: Iterable[int] = ()) -> None:
        """
        :param sample: Sample points, shape (n, d)
        :param bandwidth: Bandwidth h > 0; the reference rule when omitted
        :param kernel: Kernel; order-2, s=5 kernel of the sample dimension when omitted
        :param excluded: Indices of sample points left out of the estimate
        """
        sample = as_sample(sample)
        if sample.n < 1:
            raise ValueError("A kernel density estimate needs at least one sample point")

        super().__init__(sample.dim)
        self._sample = sample

        if kernel is None:
            kernel = make_kernel(sample.dim)
        if not isinstance(kernel, KernelSpec):
            raise TypeError("kernel must be a KernelSpec")
        if kernel.dim != sample.dim:
            raise ValueError(f"kernel dimension {kernel.dim} does not match sample dimension {sample.dim}")
        self._kernel = kernel

        if bandwidth is None:
            bandwidth = default_bandwidth(sample)
        if not isinstance(bandwidth, (int, float, np.floating)) or isinstance(bandwidth, bool):
            raise TypeError("bandwidth must be a real number")
        if not (np.isfinite(bandwidth) and bandwidth > 0):
            raise ValueError(f"bandwidth must be positive and finite, got {bandwidth}")
        self._h = float(bandwidth)

        self._excluded = self._check_excluded(excluded, sample.n)
        keep = np.ones(sample.n, dtype=bool)
        keep[list(self._excluded)] = False
        if not keep.any():
            raise ValueError("leave-out removes every sample point")

        self._active = sample.coords[keep]
        self._tree = cKDTree(self._active)

    @staticmethod
    def _check_excluded(excluded: Iterable[int], n: int) -> FrozenSet[int]:
        result = set()
        for idx in excluded:
            if not isinstance(idx, (int, np.integer)) or isinstance(idx, bool):
                raise TypeError("excluded indices must be integers")
            if not 0 <= idx < n:
                raise ValueError(f"excluded index {idx} outside [0, {n})")
            result.add(int(idx))
        return frozenset(result)

    @property
    def sample(self) -> SamplePoints:
        return self._sample

    @property
    def kernel(self) -> KernelSpec:
        return self._kernel

    @property
    def bandwidth(self) -> float:
        return self._h

    @property
    def excluded(self) -> FrozenSet[int]:
        return self._excluded

    @property
    def n(self) -> int:
        """Number of sample points in the sum (n minus the excluded ones)."""
        return self._active.shape[0]

    @property
    def active_points(self) -> Points:
        return self._active

    def leave_out_field(self, idx: Iterable[int]) -> "KernelDensityField":
        return KernelDensityField(
            self._sample, self._h, self._kernel, excluded=self._excluded | frozenset(int(i) for i in idx)
        )

    def neighbours(self, points: Points) -> tuple:
        """(query index, active sample index) pairs closer than h, in a fixed order."""
        lists = self._tree.query_ball_point(points, r=self._h)
        lengths = np.fromiter((len(l) for l in lists), dtype=np.intp, count=len(lists))
        cols = np.fromiter(chain.from_iterable(lists), dtype=np.intp, count=int(lengths.sum()))
        rows = np.repeat(np.arange(len(lists), dtype=np.intp), lengths)
        return rows, cols

    def _evaluate(self, points: Points, order: int) -> FieldEvaluation:
        m, d = points.shape
        h = self._h
        rows, cols = self.neighbours(points)

        u = (points[rows] - self._active[cols]) / h
        kv, kg, kh = self._kernel.evaluate(u, order)

        scale = 1.0 / (self.n * h ** d)
        values = np.bincount(rows, weights=kv, minlength=m) * scale

        grads = hessians = None
        if order >= 1:
            grads = np.empty((m, d))
            for a in range(d):
                grads[:, a] = np.bincount(rows, weights=kg[:, a], minlength=m)
            grads *= scale / h

        if order >= 2:
            hessians = np.empty((m, d, d))
            for a in range(d):
                for b in range(a, d):
                    hessians[:, a, b] = np.bincount(rows, weights=kh[:, a, b], minlength=m)
                    hessians[:, b, a] = hessians[:, a, b]
            hessians *= scale / h ** 2

        return values, grads, hessians

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": "kde",
            "n": self._sample.n,
            "bandwidth": self._h,
            "kernel_order": self._kernel.order,
            "kernel_smoothness": self._kernel.smoothness,
            "excluded": sorted(self._excluded),
        }
