import json
import pytest
import numpy as np

from hypothesis import given, strategies as st

from lsi.density import (DerivBundle, GaussianField, GaussianMixtureField, KernelDensityField, ProductGaussianField,
                         SamplePoints, default_bandwidth, field_from_dict, read_samples, write_samples)
from lsi.kernels import make_kernel


def _brute_force_kde(sample: np.ndarray, h: float, x: np.ndarray):
    n, d = sample.shape
    k = make_kernel(d)
    u = (x[None, :] - sample) / h
    values, grads, hessians = k.evaluate(u)
    scale = 1.0 / (n * h ** d)
    return values.sum() * scale, grads.sum(axis=0) * scale / h, hessians.sum(axis=0) * scale / h ** 2


# ---------------------------
# Samples
# ---------------------------

def test_sample_rejects_bad_shapes():
    with pytest.raises(ValueError):
        SamplePoints(np.zeros(5))
    with pytest.raises(ValueError):
        SamplePoints(np.zeros((5, 4)))
    with pytest.raises(ValueError):
        SamplePoints(np.array([[0.0, np.nan]]))


def test_sample_is_read_only():
    sample = SamplePoints(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        sample.coords[0, 0] = 1.0


@pytest.mark.parametrize("suffix", [".csv", ".ndjson"])
def test_write_then_read_samples(tmp_path, suffix):
    coords = np.random.default_rng(0).standard_normal((20, 3))
    path = write_samples(coords, tmp_path / f"sample{suffix}")
    np.testing.assert_array_equal(read_samples(path).coords, coords)


def test_read_csv_without_header(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("0.5,1.5\n-1,2\n")
    sample = read_samples(path)
    assert sample.n == 2
    np.testing.assert_array_equal(sample.coords[1], [-1.0, 2.0])


def test_read_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_samples(tmp_path / "missing.csv")


def test_read_malformed_ndjson(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text(json.dumps({"y": [1, 2]}) + "\n")
    with pytest.raises(ValueError):
        read_samples(path)


# ---------------------------
# Kernel density estimate
# ---------------------------

def test_kde_matches_brute_force_sum():
    rng = np.random.default_rng(11)
    sample = rng.standard_normal((300, 2))
    h = 0.6
    F = KernelDensityField(sample, h)

    for x in rng.uniform(-1.5, 1.5, size=(6, 2)):
        value, grad, hess = _brute_force_kde(sample, h, x)
        b = F.deriv_bundle(x)
        assert b.value == pytest.approx(value, rel=1e-12, abs=1e-15)
        np.testing.assert_allclose(b.grad, grad, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(b.hess, hess, rtol=1e-10, atol=1e-12)


def test_kde_chunked_evaluation_is_identical():
    rng = np.random.default_rng(5)
    F = KernelDensityField(rng.standard_normal((200, 2)), 0.5)
    points = rng.uniform(-2, 2, size=(1000, 2))

    whole = F.evaluate(points)
    F.CHUNK_SIZE = 64
    chunked = F.evaluate(points)
    for a, b in zip(whole, chunked):
        np.testing.assert_array_equal(a, b)


def test_kde_leave_out():
    sample = np.random.default_rng(2).standard_normal((50, 2))
    F = KernelDensityField(sample, 0.5)
    G = F.leave_out_field([0, 3])
    assert G.n == 48
    assert G.excluded == frozenset({0, 3})

    value, _, _ = _brute_force_kde(np.delete(sample, [0, 3], axis=0), 0.5, np.zeros(2))
    assert G.value(np.zeros(2)) == pytest.approx(value, rel=1e-12)


def test_kde_invalid_arguments():
    sample = np.zeros((4, 2))
    with pytest.raises(ValueError):
        KernelDensityField(sample, 0.0)
    with pytest.raises(TypeError):
        KernelDensityField(sample, "wide")
    with pytest.raises(ValueError):
        KernelDensityField(sample, 1.0, kernel=make_kernel(3))
    with pytest.raises(ValueError):
        KernelDensityField(sample, 1.0, excluded=[7])
    with pytest.raises(ValueError):
        KernelDensityField(sample, 1.0, excluded=range(4))


def test_default_bandwidth_rule():
    sample = np.random.default_rng(1).standard_normal((1000, 2))
    expected = np.mean(np.std(sample, axis=0, ddof=1)) * 1000 ** (-1.0 / 6.0)
    assert default_bandwidth(sample) == pytest.approx(expected)


def test_kde_vanishes_far_from_sample():
    F = KernelDensityField(np.zeros((3, 2)), 0.5)
    assert F.value(np.array([1.0, 1.0])) == 0.0


# ---------------------------
# Analytic fields
# ---------------------------

@pytest.mark.parametrize("dim", [2, 3])
def test_gaussian_peak_value(dim):
    field = GaussianField(dim)
    assert field.value(np.zeros(dim)) == pytest.approx((2 * np.pi) ** (-dim / 2))


def test_gaussian_level_radius():
    field = GaussianField(2)
    r = field.level_radius(0.05)
    assert r == pytest.approx(np.sqrt(-2 * np.log(2 * np.pi * 0.05)))
    assert 2 * np.pi * r == pytest.approx(9.5606, abs=1e-4)
    assert field.value(np.array([r, 0.0])) == pytest.approx(0.05, rel=1e-12)


def test_gaussian_level_radius_out_of_range():
    with pytest.raises(ValueError):
        GaussianField(2).level_radius(1.0)


def test_mixture_weights_must_normalize():
    with pytest.raises(ValueError):
        GaussianMixtureField([0.5, 0.6], [[0, 0], [3, 0]], [1.0, 1.0])


def test_mixture_derivatives_match_finite_differences():
    field = GaussianMixtureField([0.3, 0.7], [[0, 0, 0], [1.5, -0.5, 0.2]], [[1.0, 0.8, 1.2], [0.6, 0.6, 0.9]])
    x = np.array([0.4, -0.2, 0.1])
    b = field.deriv_bundle(x)
    step = 1e-6
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = step
        assert (field.value(x + e) - field.value(x - e)) / (2 * step) == pytest.approx(b.grad[axis], abs=1e-9)
        np.testing.assert_allclose((field.grad(x + e) - field.grad(x - e)) / (2 * step), b.hess[:, axis], atol=1e-8)


def test_mixture_moments():
    field = GaussianMixtureField([0.5, 0.5], [[-1, 0], [1, 0]], [1.0, 1.0])
    moments = field.moments()
    np.testing.assert_allclose(moments["mean"], [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(moments["covariance"], [[2.0, 0.0], [0.0, 1.0]])


def test_sampling_is_seeded():
    field = GaussianField(2)
    np.testing.assert_array_equal(field.sample(10, 3).coords, field.sample(10, 3).coords)
    assert not np.array_equal(field.sample(10, 3).coords, field.sample(10, 4).coords)


@pytest.mark.parametrize("field", [
    GaussianField(3, sigma=0.7),
    GaussianMixtureField([0.25, 0.75], [[0, 0], [2, 1]], [1.0, 0.5]),
    ProductGaussianField([0.0, 1.0], [1.0, 2.0]),
])
def test_field_description_round_trip(field):
    rebuilt = field_from_dict(json.loads(json.dumps(field.to_dict())))
    x = np.array([[0.3] * field.dim, [-0.7] * field.dim])
    np.testing.assert_allclose(rebuilt.evaluate(x)[0], field.evaluate(x)[0], rtol=1e-14)


def test_unknown_field_family():
    with pytest.raises(ValueError):
        field_from_dict({"family": "cauchy"})
    with pytest.raises(ValueError):
        field_from_dict({"family": "mixture", "weights": [1.0]})


# ---------------------------
# Derivative bundles
# ---------------------------

def test_bundle_shape_checks():
    with pytest.raises(ValueError):
        DerivBundle(1.0, np.zeros(2), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        DerivBundle(np.zeros(2), np.zeros((3, 2)), np.zeros((3, 2, 2)))


def test_bundle_half_vectorization_order():
    hess = np.array([[1.0, 2.0], [2.0, 3.0]])
    b = DerivBundle(0.5, np.array([4.0, 5.0]), hess)
    np.testing.assert_array_equal(b.df, [4.0, 5.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(DerivBundle.from_df(0.5, b.df).hess, hess)


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_degenerate_mask_scales_with_level(level):
    b = DerivBundle(np.zeros(2), np.array([[1e-12, 0.0], [1.0, 0.0]]), np.zeros((2, 2, 2)))
    np.testing.assert_array_equal(b.degenerate_mask(level), [True, False])
