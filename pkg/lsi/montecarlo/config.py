import json
import logging

from dataclasses import dataclass, field, asdict
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional

from lsi.density.analytic import GaussianMixtureField, field_from_dict
from lsi.estimators.base import EstimatorKind
from lsi.kernels.base import KernelSpec, make_kernel
from lsi.surface.grid import GridSpec
from lsi.types import PathLike


logger = logging.getLogger(__name__)

H_RULES = ("fixed", "power")


@dataclass
class McConfig:
    """
    Monte Carlo study: samples of each size in `n_list` are drawn from the
    analytic `truth`, smoothed with the bandwidth of `h_rule`, and fed to
    every estimator in `estimators`, `replicates` times per size.

    h_rule is {"rule": "fixed", "h": h} or {"rule": "power", "scale": s, "exponent": a}
    for h = s n^-a.
    """

    truth: Dict[str, Any]
    level: float
    n_list: List[int]
    h_rule: Dict[str, Any]
    replicates: int = 100
    base_seed: int = 0
    integrand: Any = "unity"
    estimators: List[Dict[str, Any]] = field(default_factory=lambda: [{"estimator": "plugin"}])
    grid: Optional[Dict[str, Any]] = None
    grid_res: Optional[int] = None
    alpha: float = 0.1
    variance: bool = True
    tau: Optional[float] = None
    kernel_order: int = 2
    kernel_smoothness: int = 5
    truth_value: Optional[float] = None
    truth_res: Optional[int] = None

    def __post_init__(self) -> None:
        if not isinstance(self.truth, dict):
            raise TypeError("truth must be an analytic field description (JSON object)")
        self.truth_field

        if not isinstance(self.replicates, int) or isinstance(self.replicates, bool):
            raise TypeError("replicates must be an integer")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")

        if not self.n_list:
            raise ValueError("n_list must not be empty")
        if any(not isinstance(n, int) or isinstance(n, bool) or n < 2 for n in self.n_list):
            raise ValueError("n_list entries must be integers >= 2")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError(f"n_list must be strictly ascending, got {self.n_list}")

        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

        if not self.level > 0:
            raise ValueError(f"level must be > 0, got {self.level}")

        rule = self.h_rule.get("rule") if isinstance(self.h_rule, dict) else None
        if rule not in H_RULES:
            raise ValueError(f"h_rule must be an object with rule in {H_RULES}, got {self.h_rule!r}")
        if rule == "fixed" and not float(self.h_rule.get("h", 0.0)) > 0:
            raise ValueError("fixed h_rule needs h > 0")
        if rule == "power" and not float(self.h_rule.get("scale", 1.0)) > 0:
            raise ValueError("power h_rule needs scale > 0")

        if not self.estimators:
            raise ValueError("at least one estimator is required")
        self.kinds

        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be >= 0")

        if self.grid is not None:
            GridSpec.from_dict(self.grid)

    @cached_property
    def truth_field(self) -> GaussianMixtureField:
        return field_from_dict(self.truth)

    @property
    def dim(self) -> int:
        return self.truth_field.dim

    @cached_property
    def kinds(self) -> List[EstimatorKind]:
        return [EstimatorKind.from_dict(e) for e in self.estimators]

    @property
    def kernel(self) -> KernelSpec:
        return make_kernel(self.dim, self.kernel_order, self.kernel_smoothness)

    @property
    def grid_spec(self) -> Optional[GridSpec]:
        return GridSpec.from_dict(self.grid) if self.grid is not None else None

    @property
    def h_exponent(self) -> float:
        """a in h proportional to n^-a; 0 for a fixed bandwidth."""
        if self.h_rule["rule"] == "fixed":
            return 0.0
        return float(self.h_rule.get("exponent", 1.0 / (self.dim + 4)))

    def bandwidth(self, n: int) -> float:
        if self.h_rule["rule"] == "fixed":
            return float(self.h_rule["h"])
        return float(self.h_rule.get("scale", 1.0)) * float(n) ** -self.h_exponent

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "McConfig":
        if not isinstance(data, dict):
            raise TypeError("study configuration must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown study configuration keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ValueError(f"invalid study configuration: {e}") from e

    @classmethod
    def from_json(cls, path: PathLike) -> "McConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"study configuration {path} not found")
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_json(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path
