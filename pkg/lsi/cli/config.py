import json
import logging
import numpy as np

from dataclasses import dataclass, asdict, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from lsi.density.analytic import field_from_dict
from lsi.density.base import DensityField
from lsi.density.kde import KernelDensityField, default_bandwidth
from lsi.density.samples import SamplePoints, read_samples
from lsi.estimators.base import EstimatorKind, default_grid
from lsi.estimators.bandwidth import bandwidth_opt
from lsi.estimators.functionals import EulerMethod
from lsi.kernels.base import KernelSpec, make_kernel
from lsi.surface.grid import DEFAULT_RES, GridSpec
from lsi.types import PathLike


logger = logging.getLogger(__name__)

BANDWIDTH_RULES = ("reference", "selected")


@dataclass
class RunConfig:
    """
    Everything a single run needs, as parsed from flags and/or a JSON file.

    The density comes from `input` (a sample file smoothed by a KDE), from
    `field` with `n` (a sample drawn from the analytic field with `seed`), or
    from `field` alone (the analytic density itself).
    """

    input: Optional[str] = None
    field: Optional[Dict[str, Any]] = None
    n: Optional[int] = None
    seed: int = 0
    level: Optional[float] = None
    levels: Optional[List[float]] = None
    estimator: str = "plugin"
    eps: Optional[float] = None
    membership: str = "fraction"
    method: str = EulerMethod.PLUGIN_GB
    tau: Optional[float] = None
    bandwidth: Optional[float] = None
    bandwidth_rule: str = "reference"
    kernel_order: int = 2
    kernel_smoothness: int = 5
    grid_res: Optional[int] = None
    bbox: Optional[List[float]] = None
    integrand: Any = "unity"
    alpha: float = 0.05
    variance: bool = True
    points: Optional[str] = None
    out: Optional[str] = None
    mesh_out: Optional[str] = None

    def __post_init__(self) -> None:
        if self.input is not None and self.field is not None:
            raise ValueError("give either a sample file (input) or an analytic field, not both")
        if self.field is not None and not isinstance(self.field, dict):
            raise TypeError("field must be a JSON object")
        if self.n is not None and (isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if self.n is not None and self.field is None:
            raise ValueError("n draws a sample from an analytic field; give field as well")

        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise ValueError(f"Unknown bandwidth rule {self.bandwidth_rule!r}. "
                             f"Choose from: {', '.join(BANDWIDTH_RULES)}")

        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.tau is not None and self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")

        if self.bbox is not None:
            if len(self.bbox) not in (4, 6):
                raise ValueError("bbox is lower corner then upper corner: 4 numbers in 2-D, 6 in 3-D")

        EulerMethod(self.method)

    @property
    def kind(self) -> EstimatorKind:
        return EstimatorKind(self.estimator, self.eps, self.membership)

    @property
    def euler_method(self) -> EulerMethod:
        return EulerMethod(self.method, self.eps if self.method in (EulerMethod.BAND_GB, EulerMethod.PARALLEL_GB)
                           else None)

    def require_level(self) -> float:
        if self.level is None:
            raise ValueError("a level (--level) is required")
        if not self.level > 0:
            raise ValueError(f"level must be > 0, got {self.level}")
        return float(self.level)

    def kernel(self, dim: int) -> KernelSpec:
        return make_kernel(dim, self.kernel_order, self.kernel_smoothness)

    def sample(self) -> SamplePoints:
        if self.input is not None:
            return read_samples(self.input)
        if self.field is not None and self.n is not None:
            return field_from_dict(self.field).sample(self.n, self.seed)
        raise ValueError("no sample: give --input, or --field with --n")

    def density(self) -> DensityField:
        """The field the run estimates on, with the bandwidth resolved."""
        if self.input is None and self.field is None:
            raise ValueError("no density: give --input or --field")
        if self.input is None and self.n is None:
            return field_from_dict(self.field)

        sample = self.sample()
        kernel = self.kernel(sample.dim)
        h = self.bandwidth
        if h is None:
            h = default_bandwidth(sample)
            if self.bandwidth_rule == "selected":
                pilot = KernelDensityField(sample, h, kernel)
                h = bandwidth_opt(pilot, self.require_level(), self.grid(pilot)).h_opt
            self.bandwidth = float(h)
            logger.info("Bandwidth %.5g (%s rule)", h, self.bandwidth_rule)
        return KernelDensityField(sample, h, kernel)

    def grid(self, F: DensityField) -> GridSpec:
        if self.bbox is None:
            return default_grid(F, self.grid_res)
        half = len(self.bbox) // 2
        if half != F.dim:
            raise ValueError(f"bbox has {half} coordinates per corner, the field is {F.dim}-dimensional")
        return GridSpec(self.bbox[:half], self.bbox[half:], self.grid_res or DEFAULT_RES[F.dim])

    def merged(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        changes = {k: v for k, v in overrides.items() if k in known and v is not None}
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Accepts a bare config or any report carrying a `config` block."""
        if not isinstance(data, dict):
            raise TypeError("run configuration must be a JSON object")
        if isinstance(data.get("config"), dict):
            data = data["config"]
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: PathLike) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"configuration file {path} not found")
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def parse_json_arg(text: Optional[str]) -> Any:
    """Inline JSON, or the contents of a JSON file when `text` names one."""
    if text is None:
        return None
    path = Path(text)
    if path.suffix == ".json" and path.is_file():
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    return json.loads(text)


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value
