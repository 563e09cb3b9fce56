import pytest
import numpy as np

from hypothesis import given, strategies as st

from lsi.density import DerivBundle, GaussianField
from lsi.exceptions import DegenerateGradientError, FocalPointError, MalformedExpressionError
from lsi.geometry.phi import _finite_difference_gradient
from lsi.geometry import (Const, GradComponent, HessComponent, InvGradNorm, curvature_bundle,
                          gauss_curvature_adjugate, mean_curvature, named, parallel_curvature, parse_phi,
                          phi_from_json, phi_gradient, phi_integrand, principal_minor_sums, weight_wg)
from lsi.integrands import KnownIntegrand, PhiIntegrand, as_integrand


def _sphere_points(dim: int, r: float, count: int = 16, seed: int = 0) -> np.ndarray:
    directions = np.random.default_rng(seed).standard_normal((count, dim))
    return r * directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _random_bundle(seed: int, dim: int = 3, m: int = 8) -> DerivBundle:
    rng = np.random.default_rng(seed)
    hess = rng.standard_normal((m, dim, dim))
    hess = 0.5 * (hess + np.swapaxes(hess, 1, 2))
    grad = rng.standard_normal((m, dim))
    grad += np.sign(grad) * 0.5
    return DerivBundle(rng.uniform(0.1, 1.0, m), grad, hess)


# ---------------------------
# Curvature on spheres
# ---------------------------

@pytest.mark.parametrize("dim,level", [(2, 0.05), (3, 0.02)])
def test_sphere_curvatures(dim, level):
    field = GaussianField(dim)
    r = field.level_radius(level)
    b = field.deriv_bundle(_sphere_points(dim, r))
    geometry = curvature_bundle(b)

    np.testing.assert_allclose(geometry.mean, 1.0 / r, atol=1e-8)
    np.testing.assert_allclose(geometry.principal, 1.0 / r, atol=1e-8)
    np.testing.assert_allclose(geometry.gauss, r ** -(dim - 1), atol=1e-8)
    np.testing.assert_allclose(gauss_curvature_adjugate(b), r ** -(dim - 1), atol=1e-8)
    np.testing.assert_allclose(mean_curvature(b), 1.0 / r, atol=1e-8)


def test_normal_points_inward_on_gaussian():
    field = GaussianField(2)
    x = np.array([1.0, 0.0])
    geometry = curvature_bundle(field.deriv_bundle(x))
    np.testing.assert_allclose(geometry.normal, [-1.0, 0.0], atol=1e-14)


def test_weight_for_unit_integrand_on_circle():
    field = GaussianField(2)
    level = 0.05
    r = field.level_radius(level)
    b = field.deriv_bundle(_sphere_points(2, r, count=4))
    w = weight_wg(b, np.ones(4), np.zeros((4, 2)))
    np.testing.assert_allclose(w, 1.0 / (level * r ** 2), rtol=1e-10)


def test_degenerate_gradient_raises():
    field = GaussianField(3)
    with pytest.raises(DegenerateGradientError):
        curvature_bundle(field.deriv_bundle(np.zeros(3)))


# ---------------------------
# Identities on general bundles
# ---------------------------

@given(st.integers(min_value=0, max_value=10 ** 6))
def test_adjugate_matches_eigenvalue_product(seed):
    b = _random_bundle(seed)
    np.testing.assert_allclose(gauss_curvature_adjugate(b), curvature_bundle(b).gauss, rtol=1e-8, atol=1e-10)


@given(st.integers(min_value=0, max_value=10 ** 6))
def test_principal_minor_sums_match_elementary_polynomials(seed):
    b = _random_bundle(seed)
    geometry = curvature_bundle(b)
    sums = principal_minor_sums(geometry.shape_op)
    np.testing.assert_allclose(sums[:, :-1], geometry.Fj[:, 1:], rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(sums[:, -1], 0.0, atol=1e-10)


@given(st.integers(min_value=0, max_value=10 ** 6))
def test_curvature_is_rotation_invariant(seed):
    b = _random_bundle(seed)
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
    original = curvature_bundle(b)
    rotated = curvature_bundle(b.rotated(q))

    np.testing.assert_allclose(rotated.mean, original.mean, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(rotated.gauss, original.gauss, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(rotated.normal, original.normal @ q.T, atol=1e-10)


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_curvature_is_scale_invariant(scale):
    b = _random_bundle(7)
    original = curvature_bundle(b)
    scaled = curvature_bundle(b.scaled(scale))
    np.testing.assert_allclose(scaled.principal, original.principal, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(gauss_curvature_adjugate(b.scaled(scale)), gauss_curvature_adjugate(b),
                               rtol=1e-10, atol=1e-10)


# ---------------------------
# Parallel surfaces
# ---------------------------

def test_parallel_curvature_of_sphere():
    r, eps = 2.0, 0.25
    gauss, principal = parallel_curvature(np.full((3, 2), 1.0 / r), np.full(3, eps))
    np.testing.assert_allclose(principal, 1.0 / (r + eps))
    np.testing.assert_allclose(gauss, 1.0 / (r + eps) ** 2)


def test_parallel_curvature_focal_point():
    with pytest.raises(FocalPointError):
        parallel_curvature(np.array([[0.5, 0.5]]), np.array([-2.0]))


# ---------------------------
# Expressions
# ---------------------------

def test_named_shortcuts():
    assert isinstance(named("unity"), Const)
    with pytest.raises(MalformedExpressionError):
        named("torsion")


def test_weight_squared_on_circle():
    # g = |x|^2 has outward derivative 2r and H g = r, so w_g = 3 / c.
    field = GaussianField(2)
    level = 0.05
    r = field.level_radius(level)
    points = _sphere_points(2, r, count=6)
    b = field.deriv_bundle(points)

    unit = named("wg_squared", g=lambda x: np.ones(len(x)))
    np.testing.assert_allclose(unit.evaluate(b, points), (level * r ** 2) ** -2, rtol=1e-10)
    assert unit.needs_points() and unit.uses_second()

    square = lambda x: np.sum(x ** 2, axis=1)
    numeric = named("wg_squared", g=square)
    exact = named("wg_squared", g=square, g_grad=lambda x: 2.0 * x)
    np.testing.assert_allclose(exact.evaluate(b, points), 9.0 / level ** 2, rtol=1e-10)
    np.testing.assert_allclose(numeric.evaluate(b, points), 9.0 / level ** 2, rtol=1e-6)

    with pytest.raises(MalformedExpressionError, match="supplied function g"):
        named("wg_squared")
    with pytest.raises(MalformedExpressionError):
        unit.evaluate(b)
    with pytest.raises(MalformedExpressionError):
        unit.to_json()


def test_phi_integrand_on_sphere():
    field = GaussianField(3)
    level = 0.02
    r = field.level_radius(level)
    points = _sphere_points(3, r, count=10)
    batch = field.deriv_bundle(points)

    np.testing.assert_allclose(phi_integrand(named("mean_curvature"), batch), 1.0 / r, atol=1e-8)
    np.testing.assert_allclose(phi_integrand(named("willmore"), batch), r ** -2, atol=1e-8)
    np.testing.assert_allclose(phi_integrand(named("gauss_curvature"), batch), r ** -2, atol=1e-8)

    single = field.deriv_bundle(points[0])
    value = phi_integrand(named("mean_curvature"), single)
    assert isinstance(value, float)
    assert value == pytest.approx(1.0 / r, abs=1e-8)

    weight = phi_integrand(named("wg_squared", g=lambda x: np.ones(len(x))), single, points[0])
    assert weight == pytest.approx((2.0 / (level * r ** 2)) ** 2, rel=1e-10)


def test_expression_tree_evaluation():
    b = DerivBundle(np.array([0.5]), np.array([[3.0, 4.0]]), np.array([[[1.0, 2.0], [2.0, 5.0]]]))
    expr = parse_phi('{"op": "sum", "terms": [{"op": "product", "factors": [{"op": "grad", "index": 0}, '
                     '{"op": "hess", "index": [1, 0]}]}, {"op": "inv_grad_norm", "power": 2}]}')
    np.testing.assert_allclose(expr.evaluate(b), [3.0 * 2.0 + 1.0 / 25.0])
    assert expr.uses_first()
    assert expr.uses_second()
    np.testing.assert_allclose(phi_from_json(expr.to_json()).evaluate(b), expr.evaluate(b))


def test_operator_overloads():
    b = DerivBundle(np.array([0.5]), np.array([[3.0, 4.0]]), np.zeros((1, 2, 2)))
    expr = 2.0 * GradComponent(1) + 1.0
    np.testing.assert_allclose(expr.evaluate(b), [9.0])


def test_malformed_expressions():
    with pytest.raises(MalformedExpressionError):
        parse_phi('{"op": "pow"}')
    with pytest.raises(MalformedExpressionError):
        parse_phi('{"op": "grad"}')
    with pytest.raises(MalformedExpressionError):
        parse_phi("{not json")
    with pytest.raises(MalformedExpressionError):
        GradComponent(2).evaluate(DerivBundle(np.zeros(1), np.ones((1, 2)), np.zeros((1, 2, 2))))


def test_analytic_gradient_matches_finite_differences():
    b = _random_bundle(4, dim=2, m=5)
    expr = GradComponent(0) * HessComponent(1, 1) * InvGradNorm(1.5) + HessComponent(0, 1)

    analytic = expr.gradient(b)
    numeric = _finite_difference_gradient(expr, b, None)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)

    first, second = phi_gradient(expr, b)
    assert first.shape == (5, 2)
    assert second.shape == (5, 3)


# ---------------------------
# Integrands
# ---------------------------

def test_as_integrand_dispatch():
    assert as_integrand("unity").name == "unity"
    assert as_integrand(2.5).to_json() == 2.5
    assert isinstance(as_integrand("mean_curvature"), PhiIntegrand)
    assert isinstance(as_integrand(lambda x: x[:, 0]), KnownIntegrand)
    with pytest.raises(TypeError):
        as_integrand(object())


def test_known_integrand_finite_difference_gradient():
    g = KnownIntegrand(lambda x: x[:, 0] ** 2 + 3.0 * x[:, 1])
    points = np.array([[1.0, 2.0], [-0.5, 0.0]])
    np.testing.assert_allclose(g.gradients(None, points), [[2.0, 3.0], [-1.0, 3.0]], atol=1e-6)
