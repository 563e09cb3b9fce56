import json
import logging
import numpy as np

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from lsi.density.bundle import DerivBundle, vech_indices, vech_length
from lsi.exceptions import DegenerateGradientError, MalformedExpressionError
from lsi.geometry.curvature import (curvature_bundle, gauss_curvature_adjugate,
                                    mean_curvature, unit_normal, weight_wg)
from lsi.types import Points


logger = logging.getLogger(__name__)


class PhiExpr:
    """
    Integrand phi(d_f) built from density derivatives.

    Leaves are constants, gradient components, half-vectorized Hessian
    components, powers of 1/|grad f| and named curvature expressions; inner
    nodes are sums and products. Evaluation is batched over DerivBundles.
    """

    def evaluate(self, b: DerivBundle, points: Optional[Points] = None) -> np.ndarray:
        raise NotImplementedError("This method must be implemented in subclasses.")

    def gradient(self, b: DerivBundle, points: Optional[Points] = None) -> np.ndarray:
        """Partial derivatives with respect to d_f = (d_{f,1}, d_{f,2}), shape (m, a_d)."""
        return _finite_difference_gradient(self, b, points)

    def uses_first(self) -> bool:
        return False

    def uses_second(self) -> bool:
        return False

    def needs_points(self) -> bool:
        return False

    def to_json(self) -> Dict[str, Any]:
        raise NotImplementedError("This method must be implemented in subclasses.")

    def __add__(self, other: "PhiExpr") -> "PhiExpr":
        return Sum([self, as_phi(other)])

    def __radd__(self, other: "PhiExpr") -> "PhiExpr":
        return Sum([as_phi(other), self])

    def __mul__(self, other: "PhiExpr") -> "PhiExpr":
        return Product([self, as_phi(other)])

    def __rmul__(self, other: "PhiExpr") -> "PhiExpr":
        return Product([as_phi(other), self])

    def __repr__(self) -> str:
        return json.dumps(self.to_json())


def _batch(b: DerivBundle) -> DerivBundle:
    return b.as_batch()


def _finite_difference_gradient(expr: PhiExpr, b: DerivBundle, points: Optional[Points]) -> np.ndarray:
    bb = _batch(b)
    df = bb.df
    scale = 1e-6 * (np.abs(df) + np.mean(np.abs(df), axis=1, keepdims=True) + 1e-12)
    grad = np.empty_like(df)

    for k in range(df.shape[1]):
        step = np.zeros_like(df)
        step[:, k] = scale[:, k]
        up = expr.evaluate(DerivBundle.from_df(bb.value, df + step), points)
        down = expr.evaluate(DerivBundle.from_df(bb.value, df - step), points)
        grad[:, k] = (up - down) / (2.0 * scale[:, k])

    return grad


class Const(PhiExpr):
    def __init__(self, value: float) -> None:
        if not isinstance(value, (int, float, np.floating)) or isinstance(value, bool):
            raise MalformedExpressionError("constant must be a real number")
        self.value = float(value)

    def evaluate(self, b, points=None):
        return np.full(len(_batch(b)), self.value)

    def gradient(self, b, points=None):
        bb = _batch(b)
        return np.zeros_like(bb.df)

    def to_json(self):
        return {"op": "const", "value": self.value}


class GradComponent(PhiExpr):
    def __init__(self, index: int) -> None:
        if not isinstance(index, int) or index < 0:
            raise MalformedExpressionError("gradient index must be a non-negative integer")
        self.index = index

    def _check(self, b: DerivBundle) -> None:
        if self.index >= b.dim:
            raise MalformedExpressionError(f"gradient index {self.index} out of range for d={b.dim}")

    def evaluate(self, b, points=None):
        self._check(b)
        return _batch(b).grad[:, self.index].copy()

    def gradient(self, b, points=None):
        self._check(b)
        out = np.zeros_like(_batch(b).df)
        out[:, self.index] = 1.0
        return out

    def uses_first(self):
        return True

    def to_json(self):
        return {"op": "grad", "index": self.index}


class HessComponent(PhiExpr):
    def __init__(self, i: int, j: int) -> None:
        if not all(isinstance(v, int) and v >= 0 for v in (i, j)):
            raise MalformedExpressionError("Hessian indices must be non-negative integers")
        self.i, self.j = max(i, j), min(i, j)

    def _position(self, dim: int) -> int:
        try:
            return dim + vech_indices(dim).index((self.i, self.j))
        except ValueError as e:
            raise MalformedExpressionError(f"Hessian index ({self.i}, {self.j}) out of range for d={dim}") from e

    def evaluate(self, b, points=None):
        self._position(b.dim)
        return _batch(b).hess[:, self.i, self.j].copy()

    def gradient(self, b, points=None):
        out = np.zeros_like(_batch(b).df)
        out[:, self._position(b.dim)] = 1.0
        return out

    def uses_second(self):
        return True

    def to_json(self):
        return {"op": "hess", "index": [self.i, self.j]}


class InvGradNorm(PhiExpr):
    """|grad f|^(-power)."""

    def __init__(self, power: float = 1.0) -> None:
        if not isinstance(power, (int, float)) or isinstance(power, bool):
            raise MalformedExpressionError("power must be a real number")
        self.power = float(power)

    def evaluate(self, b, points=None):
        bb = _batch(b)
        unit_normal(bb)
        return bb.grad_norm ** (-self.power)

    def gradient(self, b, points=None):
        bb = _batch(b)
        unit_normal(bb)
        out = np.zeros_like(bb.df)
        out[:, :bb.dim] = -self.power * bb.grad_norm[:, None] ** (-self.power - 2.0) * bb.grad
        return out

    def uses_first(self):
        return True

    def to_json(self):
        return {"op": "inv_grad_norm", "power": self.power}


class Sum(PhiExpr):
    def __init__(self, terms: Sequence[PhiExpr]) -> None:
        terms = list(terms)
        if not terms or not all(isinstance(t, PhiExpr) for t in terms):
            raise MalformedExpressionError("sum needs at least one sub-expression")
        self.terms = terms

    def evaluate(self, b, points=None):
        return sum(t.evaluate(b, points) for t in self.terms)

    def gradient(self, b, points=None):
        return sum(t.gradient(b, points) for t in self.terms)

    def uses_first(self):
        return any(t.uses_first() for t in self.terms)

    def uses_second(self):
        return any(t.uses_second() for t in self.terms)

    def needs_points(self):
        return any(t.needs_points() for t in self.terms)

    def to_json(self):
        return {"op": "sum", "terms": [t.to_json() for t in self.terms]}


class Product(PhiExpr):
    def __init__(self, factors: Sequence[PhiExpr]) -> None:
        factors = list(factors)
        if not factors or not all(isinstance(f, PhiExpr) for f in factors):
            raise MalformedExpressionError("product needs at least one sub-expression")
        self.factors = factors

    def evaluate(self, b, points=None):
        result = self.factors[0].evaluate(b, points)
        for f in self.factors[1:]:
            result = result * f.evaluate(b, points)
        return result

    def gradient(self, b, points=None):
        values = [f.evaluate(b, points) for f in self.factors]
        total = 0.0
        for k, f in enumerate(self.factors):
            others = np.ones_like(values[k])
            for j, v in enumerate(values):
                if j != k:
                    others = others * v
            total = total + others[:, None] * f.gradient(b, points)
        return total

    def uses_first(self):
        return any(f.uses_first() for f in self.factors)

    def uses_second(self):
        return any(f.uses_second() for f in self.factors)

    def needs_points(self):
        return any(f.needs_points() for f in self.factors)

    def to_json(self):
        return {"op": "product", "factors": [f.to_json() for f in self.factors]}


def _minkowski(j: int) -> Callable[[DerivBundle], np.ndarray]:
    def evaluate(b: DerivBundle) -> np.ndarray:
        if not 1 <= j <= b.dim:
            raise MalformedExpressionError(f"minkowski_F{j} needs 1 <= j <= d={b.dim}")
        return curvature_bundle(b).Fj[:, j - 1]
    return evaluate


NAMED_EXPRESSIONS: Dict[str, Callable[[DerivBundle], np.ndarray]] = {
    "mean_curvature": mean_curvature,
    "gauss_curvature": gauss_curvature_adjugate,
    "willmore": lambda b: mean_curvature(b) ** 2,
    "minkowski_F1": _minkowski(1),
    "minkowski_F2": _minkowski(2),
    "minkowski_F3": _minkowski(3),
}


class Named(PhiExpr):
    """Built-in curvature expression evaluated through the level-set geometry."""

    def __init__(self, name: str) -> None:
        if name not in NAMED_EXPRESSIONS:
            raise MalformedExpressionError(
                f"Unknown expression {name!r}. Choose from: unity, wg_squared, {', '.join(NAMED_EXPRESSIONS)}"
            )
        self.name = name

    def evaluate(self, b, points=None):
        return np.asarray(NAMED_EXPRESSIONS[self.name](_batch(b)), dtype=float)

    def uses_first(self):
        return True

    def uses_second(self):
        return self.name != "minkowski_F1"

    def to_json(self):
        return {"op": "named", "name": self.name}


class WeightSquared(PhiExpr):
    """w_g^2 for a supplied g: needs the evaluation points besides d_f."""

    def __init__(self,
                 g_values: Callable[[Points], np.ndarray],
                 g_gradients: Callable[[Points], np.ndarray]) -> None:
        self.g_values = g_values
        self.g_gradients = g_gradients

    def evaluate(self, b, points=None):
        if points is None:
            raise MalformedExpressionError("wg_squared needs the evaluation points")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        g_val = np.broadcast_to(np.asarray(self.g_values(points), dtype=float), (m,))
        g_grad = np.broadcast_to(np.asarray(self.g_gradients(points), dtype=float), points.shape)
        w = weight_wg(_batch(b), g_val, g_grad)
        return w ** 2

    def uses_first(self):
        return True

    def uses_second(self):
        return True

    def needs_points(self):
        return True

    def to_json(self):
        raise MalformedExpressionError("wg_squared depends on a supplied g and cannot be serialized")


def unity() -> PhiExpr:
    return Const(1.0)


def _position_gradient(g: Callable[[Points], np.ndarray], step: float = 1e-5) -> Callable[[Points], np.ndarray]:
    """Central differences of a function of position."""
    def grad(points: Points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty_like(points)
        for k in range(points.shape[1]):
            shift = np.zeros(points.shape[1])
            shift[k] = step
            up = np.broadcast_to(np.asarray(g(points + shift), dtype=float), points.shape[:1])
            down = np.broadcast_to(np.asarray(g(points - shift), dtype=float), points.shape[:1])
            out[:, k] = (up - down) / (2.0 * step)
        return out
    return grad


def named(name: str,
          g: Optional[Callable[[Points], np.ndarray]] = None,
          g_grad: Optional[Callable[[Points], np.ndarray]] = None) -> PhiExpr:
    """
    Built-in expression by name.

    :param name: unity, wg_squared or a key of NAMED_EXPRESSIONS
    :param g: Function of position, required by wg_squared
    :param g_grad: Gradient of g; central differences when omitted
    """
    if name in ("unity", "one"):
        return unity()
    if name == "wg_squared":
        if g is None:
            raise MalformedExpressionError("wg_squared needs a supplied function g of position")
        return WeightSquared(g, g_grad if g_grad is not None else _position_gradient(g))
    return Named(name)


def phi_from_json(node: Any) -> PhiExpr:
    if isinstance(node, str):
        return named(node)

    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return Const(float(node))

    if not isinstance(node, dict) or "op" not in node:
        raise MalformedExpressionError(f"expression node must be a name, a number or an object with 'op': {node!r}")

    op = node["op"]
    try:
        if op == "const":
            return Const(node["value"])
        if op == "grad":
            return GradComponent(node["index"])
        if op == "hess":
            i, j = node["index"]
            return HessComponent(i, j)
        if op == "inv_grad_norm":
            return InvGradNorm(node.get("power", 1.0))
        if op == "sum":
            return Sum([phi_from_json(t) for t in node["terms"]])
        if op == "product":
            return Product([phi_from_json(f) for f in node["factors"]])
        if op == "named":
            return named(node["name"])
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, MalformedExpressionError):
            raise
        raise MalformedExpressionError(f"malformed {op!r} node: {node!r}") from e

    raise MalformedExpressionError(f"unknown expression op {op!r}")


def parse_phi(text: Union[str, Dict[str, Any]]) -> PhiExpr:
    """Parse a named shortcut ("willmore") or a JSON composition tree."""
    if isinstance(text, dict):
        return phi_from_json(text)

    text = text.strip()
    if text.startswith("{") or text.startswith("["):
        try:
            return phi_from_json(json.loads(text))
        except json.JSONDecodeError as e:
            raise MalformedExpressionError(f"integrand is not valid JSON: {e}") from e

    return named(text)


def as_phi(value: Union[PhiExpr, float, str]) -> PhiExpr:
    if isinstance(value, PhiExpr):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Const(float(value))
    if isinstance(value, str):
        return parse_phi(value)
    raise MalformedExpressionError(f"cannot interpret {value!r} as an expression")


def phi_integrand(expr: PhiExpr, b: DerivBundle, points: Optional[Points] = None) -> np.ndarray:
    """phi(d_f(x)) for a single bundle (returns a float) or a batch."""
    values = expr.evaluate(b, points)
    return float(values[0]) if not b.is_batch else values


def phi_gradient(expr: PhiExpr, b: DerivBundle, points: Optional[Points] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(grad_1 phi, grad_2 phi): partials w.r.t. d_{f,1} and d_{f,2}."""
    full = expr.gradient(b, points)
    d = b.dim
    return full[:, :d], full[:, d:d + vech_length(d)]
