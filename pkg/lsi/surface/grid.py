import numpy as np

from typing import Any, Dict, Optional, Sequence, Tuple, Union

from lsi.types import Points


DEFAULT_RES: Dict[int, int] = {2: 512, 3: 160}
MIN_RES = 8


class GridSpec:
    """
    Axis-aligned box split into res[k] cells along axis k.
    Nodes are the cell corners, cell centers the midpoints. Immutable.
    """

    def __init__(self,
                 lower: Sequence[float],
                 upper: Sequence[float],
                 res: Union[int, Sequence[int]]) -> None:
        """
        :param lower: Lower corner of the box
        :param upper: Upper corner of the box
        :param res: Cells per axis (one integer for all axes, or one per axis)
        """
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)

        if lower.shape != upper.shape or lower.size not in (2, 3):
            raise ValueError("lower and upper must be points of the same dimension (2 or 3)")

        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("grid bounds must be finite")

        if not np.all(upper > lower):
            raise ValueError(f"upper {upper.tolist()} must exceed lower {lower.tolist()} componentwise")

        if isinstance(res, (int, np.integer)) and not isinstance(res, bool):
            res = (int(res),) * lower.size
        res = tuple(res)

        if len(res) != lower.size or not all(isinstance(r, (int, np.integer)) for r in res):
            raise TypeError("res must be an integer or one integer per axis")

        if min(res) < MIN_RES:
            raise ValueError(f"res must be >= {MIN_RES} per axis, got {res}")

        self._lower = lower
        self._upper = upper
        self._res = tuple(int(r) for r in res)
        self._lower.setflags(write=False)
        self._upper.setflags(write=False)

    @property
    def dim(self) -> int:
        return self._lower.size

    @property
    def lower(self) -> np.ndarray:
        return self._lower

    @property
    def upper(self) -> np.ndarray:
        return self._upper

    @property
    def res(self) -> Tuple[int, ...]:
        return self._res

    @property
    def step(self) -> np.ndarray:
        return (self._upper - self._lower) / np.asarray(self._res)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.step))

    @property
    def node_shape(self) -> Tuple[int, ...]:
        return tuple(r + 1 for r in self._res)

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return self._res

    @property
    def key(self) -> Tuple:
        return tuple(self._lower.tolist()), tuple(self._upper.tolist()), self._res

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridSpec):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"GridSpec(lower={self._lower.tolist()}, upper={self._upper.tolist()}, res={self._res})"

    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, r + 1) for lo, hi, r in zip(self._lower, self._upper, self._res))

    def center_axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(0.5 * (a[1:] + a[:-1]) for a in self.axes())

    def nodes(self) -> Points:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    def cell_centers(self) -> Points:
        mesh = np.meshgrid(*self.center_axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    def index_to_point(self, index: np.ndarray) -> Points:
        """Map fractional node indices to coordinates."""
        return self._lower + np.asarray(index, dtype=float) * self.step

    def point_to_index(self, points: Points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self._lower) / self.step

    def refined(self, factor: float) -> "GridSpec":
        return GridSpec(self._lower, self._upper, tuple(max(MIN_RES, int(round(r * factor))) for r in self._res))

    def with_res(self, res: Union[int, Sequence[int]]) -> "GridSpec":
        return GridSpec(self._lower, self._upper, res)

    @classmethod
    def cube(cls, half_width: float, dim: int, res: Optional[int] = None, center: Optional[Sequence[float]] = None) -> "GridSpec":
        center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(center - half_width, center + half_width, res or DEFAULT_RES[dim])

    @classmethod
    def around_sample(cls, points: Points, bandwidth: float, res: Optional[Union[int, Sequence[int]]] = None) -> "GridSpec":
        """Sample bounding box inflated by 3h on every side."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("cannot size a grid around an empty sample")

        margin = 3.0 * float(bandwidth)
        lower = points.min(axis=0) - margin
        upper = points.max(axis=0) + margin
        return cls(lower, upper, res or DEFAULT_RES[points.shape[1]])

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": self._lower.tolist(), "upper": self._upper.tolist(), "res": list(self._res)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSpec":
        try:
            return cls(data["lower"], data["upper"], data["res"])
        except KeyError as e:
            raise ValueError(f"grid description is missing {e}") from e
