import pytest
import numpy as np

from lsi.density import GaussianField, GaussianMixtureField, KernelDensityField
from lsi.estimators import default_grid
from lsi.exceptions import IntegrandEvaluationError, LevelNotBracketedError, NoBracketError
from lsi.surface import (GridSpec, MeshDistanceIndex, distance_to_mesh, export_mesh, extract_level_mesh,
                         grid_loop_count, level_tolerance, mesh_components, mesh_euler_characteristic,
                         mesh_integral, project_to_level, projection_bijectivity, symmetric_difference_volume)


LEVEL = 0.05


def _two_blobs() -> GaussianMixtureField:
    return GaussianMixtureField([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], [1.0, 1.0])


@pytest.fixture(scope="module")
def circle_mesh():
    field = GaussianField(2)
    return field, extract_level_mesh(field, LEVEL, default_grid(field, 512))


# ---------------------------
# Grid
# ---------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec([0.0, 0.0], [1.0], 16)
    with pytest.raises(ValueError):
        GridSpec([0.0, 0.0], [1.0, -1.0], 16)
    with pytest.raises(ValueError):
        GridSpec([0.0, 0.0], [1.0, 1.0], 4)
    with pytest.raises(TypeError):
        GridSpec([0.0, 0.0], [1.0, 1.0], (16, 16, 16))


def test_grid_layout():
    grid = GridSpec([-1.0, 0.0], [1.0, 4.0], (8, 16))
    np.testing.assert_allclose(grid.step, [0.25, 0.25])
    assert grid.node_shape == (9, 17)
    assert grid.cell_centers().shape == (8 * 16, 2)
    np.testing.assert_allclose(grid.point_to_index(grid.index_to_point([[2.5, 3.0]])), [[2.5, 3.0]])
    assert GridSpec.from_dict(grid.to_dict()) == grid
    assert grid.refined(2.0).res == (16, 32)


# ---------------------------
# Level meshes
# ---------------------------

def test_circle_perimeter(circle_mesh):
    field, mesh = circle_mesh
    exact = 2.0 * np.pi * field.level_radius(LEVEL)
    assert exact == pytest.approx(9.5606, abs=1e-3)
    assert mesh.total_measure == pytest.approx(exact, rel=3e-3)


def test_perimeter_error_is_second_order_in_the_step():
    field = GaussianField(2)
    exact = 2.0 * np.pi * field.level_radius(LEVEL)
    grids = [default_grid(field, res) for res in (64, 128, 256)]
    errors = [abs(extract_level_mesh(field, LEVEL, g).total_measure - exact) for g in grids]
    slope = np.polyfit(np.log([g.step[0] for g in grids]), np.log(errors), 1)[0]
    assert 1.6 <= slope <= 2.4


def test_vertices_are_polished_onto_the_level(circle_mesh):
    field, mesh = circle_mesh
    residual = np.abs(field.evaluate(mesh.vertices, order=0)[0] - LEVEL)
    assert residual.max() <= level_tolerance(LEVEL)
    assert mesh.diagnostics["unpolished_vertices"] == 0
    assert not mesh.diagnostics["touches_boundary"]


def test_circle_topology(circle_mesh):
    _, mesh = circle_mesh
    assert mesh_components(mesh) == 1
    assert mesh_euler_characteristic(mesh) == 0
    assert mesh.diagnostics["grid_loops"] == 1


def test_two_blobs_have_two_components():
    field = _two_blobs()
    grid = default_grid(field, 256)
    mesh = extract_level_mesh(field, 0.02, grid)
    assert mesh_components(mesh) == 2
    assert grid_loop_count(field, 0.02, grid) == 2


def test_sphere_euler_characteristic():
    field = GaussianField(3)
    mesh = extract_level_mesh(field, 0.02, default_grid(field, 48))
    assert mesh_components(mesh) == 1
    assert mesh_euler_characteristic(mesh) == 2
    r = field.level_radius(0.02)
    assert mesh.total_measure == pytest.approx(4.0 * np.pi * r ** 2, rel=2e-2)


def test_level_outside_field_range():
    field = GaussianField(2)
    with pytest.raises(LevelNotBracketedError):
        extract_level_mesh(field, 1.0, default_grid(field, 64))


def test_grid_loop_count_rejects_3d():
    field = GaussianField(3)
    with pytest.raises(ValueError):
        grid_loop_count(field, 0.02, default_grid(field, 16))


def test_mesh_integral(circle_mesh):
    _, mesh = circle_mesh
    assert mesh_integral(mesh, 1.0) == pytest.approx(mesh.total_measure)
    assert mesh_integral(mesh, lambda x, b: 2.0 * np.ones(len(x))) == pytest.approx(2.0 * mesh.total_measure)

    values = np.ones(mesh.n_vertices)
    values[3] = np.nan
    with pytest.raises(IntegrandEvaluationError):
        mesh_integral(mesh, values)


def test_export_mesh(tmp_path, circle_mesh):
    _, mesh = circle_mesh
    path = export_mesh(mesh, tmp_path / "circle.csv")
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (mesh.n_vertices, 3)
    assert set(rows[:, 0].astype(int)) == {0}

    field = GaussianField(3)
    sphere = extract_level_mesh(field, 0.02, default_grid(field, 24))
    lines = export_mesh(sphere, tmp_path / "sphere.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in lines) == sphere.n_vertices
    assert sum(line.startswith("f ") for line in lines) == sphere.n_cells


# ---------------------------
# Distances
# ---------------------------

def test_distance_index_matches_brute_force(circle_mesh):
    _, mesh = circle_mesh
    index = MeshDistanceIndex(mesh)
    points = np.random.default_rng(3).uniform(-4.0, 4.0, (200, 2))

    dist, closest = index.query(points)
    expected, _ = index._brute_force(points)
    np.testing.assert_allclose(dist, expected, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(points - closest, axis=1), dist, atol=1e-12)


def test_distance_to_circle(circle_mesh):
    field, mesh = circle_mesh
    r = field.level_radius(LEVEL)
    assert distance_to_mesh(mesh, [r + 0.5, 0.0]) == pytest.approx(0.5, abs=1e-3)
    assert distance_to_mesh(mesh, [0.0, 0.0]) == pytest.approx(r, abs=1e-3)


def test_query_with_max_distance(circle_mesh):
    field, mesh = circle_mesh
    r = field.level_radius(LEVEL)
    dist, closest = mesh.distance_index().query([[r + 0.05, 0.0], [0.0, 0.0]], max_distance=0.1)
    assert dist[0] == pytest.approx(0.05, abs=1e-3)
    assert np.isinf(dist[1])
    assert np.all(np.isnan(closest[1]))


def test_grid_distances_agree_with_queries(circle_mesh):
    _, mesh = circle_mesh
    grid = GridSpec([-2.0, -2.0], [2.0, 2.0], 64)
    index = mesh.distance_index()
    dist, _ = index.grid_distances(grid, 0.2)

    near = np.isfinite(dist)
    assert near.any()
    expected, _ = index.query(grid.cell_centers()[near])
    np.testing.assert_allclose(dist[near], expected, atol=1e-12)
    assert np.all(index.query(grid.cell_centers()[~near])[0] > 0.2 - 1e-12)


# ---------------------------
# Projection
# ---------------------------

def test_projection_along_gradient():
    field = GaussianField(2)
    r = field.level_radius(LEVEL)
    t, foot = project_to_level(field, [r + 0.1, 0.0], LEVEL)
    assert t == pytest.approx(0.1, abs=1e-9)
    np.testing.assert_allclose(foot, [r, 0.0], atol=1e-9)

    t, foot = project_to_level(field, foot, LEVEL)
    assert t == 0.0


@pytest.mark.slow
def test_projection_offset_is_linear_in_the_density_error():
    # From the true circle, t(x) ~ (f(x) - f_hat(x)) / |grad f(x)| up to higher-order terms.
    field = GaussianField(2)
    r = field.level_radius(LEVEL)
    angles = np.linspace(0.0, 2.0 * np.pi, 200, endpoint=False)
    points = r * np.column_stack([np.cos(angles), np.sin(angles)])
    norms = np.linalg.norm(field.grad(points), axis=1)

    ratios = []
    for seed in range(5):
        F = KernelDensityField(field.sample(5000, seed), 1.2)
        t = np.array([project_to_level(F, x, LEVEL)[0] for x in points])
        linear = (field.value(points) - F.value(points)) / norms
        ratios.append(np.max(np.abs(t - linear)) / np.max(np.abs(t)))

    assert np.median(ratios) <= 0.2


def test_projection_without_crossing():
    field = GaussianField(2)
    with pytest.raises(NoBracketError):
        project_to_level(field, [4.0, 0.0], LEVEL, t_max=0.5)
    with pytest.raises(ValueError):
        project_to_level(field, [4.0, 0.0], LEVEL, t_max=0.0)


def test_projection_bijectivity():
    field = GaussianField(2)
    r = field.level_radius(LEVEL)
    angles = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
    starts = (r + 0.2) * np.column_stack([np.cos(angles), np.sin(angles)])

    report = projection_bijectivity(field, starts, LEVEL)
    assert report.n_failed == 0
    assert report.injective
    assert report.min_foot_separation == pytest.approx(2.0 * r * np.sin(np.pi / 16), rel=1e-6)


def test_symmetric_difference_matches_surface_approximation():
    f = GaussianField(2)
    g = GaussianField(2, mean=[0.05, 0.0])
    volume, approx = symmetric_difference_volume(f, g, LEVEL, GridSpec.cube(2.5, 2, 1024))
    assert approx == pytest.approx(4.0 * f.level_radius(LEVEL) * 0.05, rel=2e-2)
    assert volume == pytest.approx(approx, rel=5e-2)
