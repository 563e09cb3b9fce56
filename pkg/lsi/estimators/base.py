import logging
import threading
import weakref
import numpy as np

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

from lsi.density.base import DensityField
from lsi.surface.grid import DEFAULT_RES, GridSpec
from lsi.surface.mesh import LevelMesh, extract_level_mesh


logger = logging.getLogger(__name__)

MESH_CACHE_SIZE = 4
MEMBERSHIP_RULES = ("fraction", "center")


class EstimatorKind:
    """
    Plugin (surface integral over the estimated level set), Band (level window
    of half-width eps) or Tube (distance window of half-width eps).

    eps=None on Band/Tube selects the grid-dependent default at estimation time.
    """

    PLUGIN = "plugin"
    BAND = "band"
    TUBE = "tube"
    TAGS = (PLUGIN, BAND, TUBE)

    def __init__(self, tag: str, eps: Optional[float] = None, membership: str = "fraction") -> None:
        """
        :param tag: 'plugin', 'band' or 'tube'
        :param eps: Window half-width for band/tube
        :param membership: 'fraction' (cell fraction under a local linear model) or 'center'
        """
        if not isinstance(tag, str):
            raise TypeError("tag must be a string")

        tag = tag.lower()
        if tag not in self.TAGS:
            raise ValueError(f"Unknown estimator {tag!r}. Choose from: {', '.join(self.TAGS)}")

        if membership not in MEMBERSHIP_RULES:
            raise ValueError(f"Unknown membership rule {membership!r}. Choose from: {', '.join(MEMBERSHIP_RULES)}")

        if eps is not None:
            if isinstance(eps, bool) or not isinstance(eps, (int, float, np.floating)):
                raise TypeError("eps must be a number")
            eps = float(eps)
            if tag == self.PLUGIN and eps != 0.0:
                raise ValueError("the plugin estimator takes no eps")
            if tag != self.PLUGIN and not eps > 0:
                raise ValueError(f"eps must be > 0 for the {tag} estimator, got {eps}")
            if tag == self.PLUGIN:
                eps = None

        self._tag = tag
        self._eps = eps
        self._membership = membership

    @classmethod
    def plugin(cls) -> "EstimatorKind":
        return cls(cls.PLUGIN)

    @classmethod
    def band(cls, eps: Optional[float] = None, membership: str = "fraction") -> "EstimatorKind":
        return cls(cls.BAND, eps, membership)

    @classmethod
    def tube(cls, eps: Optional[float] = None, membership: str = "fraction") -> "EstimatorKind":
        return cls(cls.TUBE, eps, membership)

    @property
    def tag(self) -> str:
        return self._tag

    @property
    def eps(self) -> Optional[float]:
        return self._eps

    @property
    def membership(self) -> str:
        return self._membership

    @property
    def is_plugin(self) -> bool:
        return self._tag == self.PLUGIN

    def with_eps(self, eps: float) -> "EstimatorKind":
        return EstimatorKind(self._tag, eps, self._membership)

    def to_dict(self) -> Dict[str, Any]:
        return {"estimator": self._tag, "eps": self._eps, "membership": self._membership}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EstimatorKind":
        return cls(data.get("estimator", cls.PLUGIN), data.get("eps"), data.get("membership", "fraction"))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EstimatorKind):
            return NotImplemented
        return (self._tag, self._eps, self._membership) == (other._tag, other._eps, other._membership)

    def __hash__(self) -> int:
        return hash((self._tag, self._eps, self._membership))

    def __repr__(self) -> str:
        if self.is_plugin:
            return "EstimatorKind(plugin)"
        return f"EstimatorKind({self._tag}, eps={self._eps}, membership={self._membership})"


@dataclass(frozen=True)
class EstimateReport:
    kind: EstimatorKind
    value: float
    level: float
    bandwidth: Optional[float]
    n: Optional[int]
    std_err: Optional[float] = None
    ci: Optional[Tuple[float, float]] = None
    alpha: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.std_err is not None and not self.std_err >= 0:
            raise ValueError(f"std_err must be >= 0, got {self.std_err}")

        if self.ci is not None:
            lo, hi = self.ci
            if not lo <= self.value <= hi:
                raise ValueError(f"confidence interval ({lo}, {hi}) does not contain the estimate {self.value}")

    def with_interval(self, std_err: float, ci: Tuple[float, float], alpha: float) -> "EstimateReport":
        return replace(self, std_err=float(std_err), ci=(float(ci[0]), float(ci[1])), alpha=float(alpha))

    def to_dict(self) -> Dict[str, Any]:
        """Flat snake_case record."""
        out = {
            "estimator": self.kind.tag,
            "eps": self.kind.eps,
            "membership": None if self.kind.is_plugin else self.kind.membership,
            "value": self.value,
            "level": self.level,
            "bandwidth": self.bandwidth,
            "n": self.n,
            "std_err": self.std_err,
            "ci_lower": self.ci[0] if self.ci else None,
            "ci_upper": self.ci[1] if self.ci else None,
            "alpha": self.alpha,
        }
        for key, value in self.diagnostics.items():
            out[key] = value
        return out


def default_grid(F: DensityField, res: Optional[int] = None) -> GridSpec:
    """
    Sample bounding box inflated by 3h for KDE fields; 6 standard deviations
    around every component for analytic mixtures.
    """
    if F.bandwidth is not None and hasattr(F, "active_points"):
        return GridSpec.around_sample(F.active_points, F.bandwidth, res)

    if hasattr(F, "means") and hasattr(F, "sigmas"):
        lower = np.min(F.means - 6.0 * F.sigmas, axis=0)
        upper = np.max(F.means + 6.0 * F.sigmas, axis=0)
        return GridSpec(lower, upper, res or DEFAULT_RES[F.dim])

    raise ValueError(f"cannot size a default grid for {type(F).__name__}; pass a grid")


_mesh_cache: "weakref.WeakKeyDictionary[DensityField, OrderedDict]" = weakref.WeakKeyDictionary()
_mesh_lock = threading.Lock()


def cached_level_mesh(F: DensityField, level: float, grid: GridSpec) -> LevelMesh:
    """extract_level_mesh, memoized per field for the last few (level, grid) pairs."""
    key = (float(level), grid.key)
    with _mesh_lock:
        entries = _mesh_cache.setdefault(F, OrderedDict())
        if key in entries:
            entries.move_to_end(key)
            return entries[key]

    mesh = extract_level_mesh(F, level, grid)

    with _mesh_lock:
        entries = _mesh_cache.setdefault(F, OrderedDict())
        entries[key] = mesh
        while len(entries) > MESH_CACHE_SIZE:
            entries.popitem(last=False)
    return mesh
