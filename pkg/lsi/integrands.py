import logging
import numpy as np

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from lsi.density.base import DensityField
from lsi.density.bundle import DerivBundle
from lsi.exceptions import MalformedExpressionError
from lsi.geometry.phi import Const, PhiExpr, parse_phi
from lsi.types import Gradients, Points, Values


logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-5


class Integrand:
    """Function g integrated over the level set, with its spatial gradient."""

    name: str = "integrand"
    needs_bundle: bool = False

    def values(self, field: DensityField, points: Points, bundle: Optional[DerivBundle] = None) -> Values:
        raise NotImplementedError("This method must be implemented in subclasses.")

    def gradients(self,
                  field: DensityField,
                  points: Points,
                  bundle: Optional[DerivBundle] = None,
                  step: Optional[float] = None) -> Gradients:
        """Central finite differences of `values`; subclasses with closed forms override."""
        points = np.asarray(points, dtype=float)
        step = DEFAULT_FD_STEP if step is None else float(step)
        out = np.empty_like(points)
        for axis in range(points.shape[1]):
            shift = np.zeros(points.shape[1])
            shift[axis] = step
            up = self.values(field, points + shift)
            down = self.values(field, points - shift)
            out[:, axis] = (up - down) / (2.0 * step)
        return out

    def to_json(self) -> Any:
        return self.name


class KnownIntegrand(Integrand):
    """A user-supplied function of position, optionally with its gradient."""

    def __init__(self,
                 func: Callable[[Points], np.ndarray],
                 grad: Optional[Callable[[Points], np.ndarray]] = None,
                 name: str = "custom") -> None:
        if not callable(func):
            raise TypeError("func must be callable")
        if grad is not None and not callable(grad):
            raise TypeError("grad must be callable")

        self._func = func
        self._grad = grad
        self.name = name

    @classmethod
    def constant(cls, value: float) -> "KnownIntegrand":
        value = float(value)
        return cls(
            lambda x: np.full(np.shape(x)[0], value),
            lambda x: np.zeros(np.shape(x)),
            name="unity" if value == 1.0 else f"constant:{value!r}",
        )

    def values(self, field, points, bundle=None):
        out = np.asarray(self._func(np.asarray(points, dtype=float)), dtype=float)
        return np.broadcast_to(out, (np.shape(points)[0],)).copy()

    def gradients(self, field, points, bundle=None, step=None):
        if self._grad is None:
            return super().gradients(field, points, bundle, step)
        return np.asarray(self._grad(np.asarray(points, dtype=float)), dtype=float)

    def to_json(self):
        if self.name == "unity":
            return "unity"
        if self.name.startswith("constant:"):
            return float(self.name.split(":", 1)[1])
        return self.name


class PhiIntegrand(Integrand):
    """Plug-in integrand phi(d_F(x)) evaluated through F's derivative bundle."""

    needs_bundle = True

    def __init__(self, expr: PhiExpr) -> None:
        if not isinstance(expr, PhiExpr):
            raise TypeError("expr must be a PhiExpr")
        self.expr = expr
        self.name = "phi"

    def values(self, field, points, bundle=None):
        points = np.asarray(points, dtype=float)
        if bundle is None:
            bundle = field.deriv_bundle(points)
        return self.expr.evaluate(bundle.as_batch(), points)

    def to_json(self):
        return self.expr.to_json()


class LinearCombination(Integrand):
    """sum_k a_k g_k."""

    def __init__(self, terms: Sequence[Tuple[float, Integrand]]) -> None:
        terms = [(float(a), as_integrand(g)) for a, g in terms]
        if not terms:
            raise ValueError("linear combination needs at least one term")
        self.terms = terms
        self.name = "combination"
        self.needs_bundle = any(g.needs_bundle for _, g in terms)

    def values(self, field, points, bundle=None):
        return sum(a * g.values(field, points, bundle) for a, g in self.terms)

    def gradients(self, field, points, bundle=None, step=None):
        return sum(a * g.gradients(field, points, bundle, step) for a, g in self.terms)

    def to_json(self):
        return {"combination": [[a, g.to_json()] for a, g in self.terms]}


def as_integrand(spec: Union[Integrand, PhiExpr, float, str, Dict[str, Any], Callable]) -> Integrand:
    """Interpret a name, number, JSON tree, PhiExpr or callable as an Integrand."""
    if isinstance(spec, Integrand):
        return spec
    if isinstance(spec, PhiExpr):
        if isinstance(spec, Const):
            return KnownIntegrand.constant(spec.value)
        return PhiIntegrand(spec)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return KnownIntegrand.constant(float(spec))
    if isinstance(spec, str) and spec.strip() in ("unity", "one", "1"):
        return KnownIntegrand.constant(1.0)
    if isinstance(spec, dict) and "combination" in spec:
        try:
            return LinearCombination([(a, g) for a, g in spec["combination"]])
        except (TypeError, ValueError) as e:
            raise MalformedExpressionError(f"malformed combination: {spec!r}") from e
    if isinstance(spec, (str, dict)):
        return as_integrand(parse_phi(spec))
    if callable(spec):
        return KnownIntegrand(spec)
    raise TypeError(f"cannot interpret {spec!r} as an integrand")
