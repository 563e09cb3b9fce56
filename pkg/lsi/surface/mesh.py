import cv2
import logging
import numpy as np

from dataclasses import dataclass, field
from pathlib import Path
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from skimage import measure
from typing import Any, Callable, Dict, Optional, Tuple, Union

from lsi.density.base import DensityField
from lsi.density.bundle import DerivBundle
from lsi.exceptions import (EmptyLevelSetError, IntegrandEvaluationError, LevelNotBracketedError,
                            LevelSetError, TopologyError)
from lsi.surface.grid import GridSpec
from lsi.types import Cells, PathLike, Points


logger = logging.getLogger(__name__)

POLISH_ITERATIONS = 20
LEVEL_TOL_FACTOR = 1e-10


def level_tolerance(level: float) -> float:
    return LEVEL_TOL_FACTOR * max(abs(float(level)), 1e-300)


@dataclass
class LevelMesh:
    """
    Piecewise-linear level set {F = c}: segments for d=2, triangles for d=3.
    `bundle` caches F's derivatives at the vertices.
    """

    vertices: Points
    cells: Cells
    level: float
    grid: GridSpec
    bundle: DerivBundle
    cell_measures: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    _distance_index: Any = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def normals(self) -> np.ndarray:
        return self.bundle.grad / self.bundle.grad_norm[:, None]

    @property
    def grad_norms(self) -> np.ndarray:
        return self.bundle.grad_norm

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.cell_measures))

    @property
    def min_grad(self) -> float:
        return float(np.min(self.bundle.grad_norm))

    def distance_index(self):
        if self._distance_index is None:
            from lsi.surface.distance import MeshDistanceIndex
            self._distance_index = MeshDistanceIndex(self)
        return self._distance_index


def _check_bracket(values: np.ndarray, level: float) -> Tuple[float, float]:
    vmin, vmax = float(values.min()), float(values.max())
    if not vmin < level < vmax:
        raise LevelNotBracketedError(
            f"level not bracketed: c={level:g} lies outside the field range ({vmin:g}, {vmax:g}) on the grid"
        )
    return vmin, vmax


def _touches_boundary(values: np.ndarray, level: float) -> bool:
    for axis in range(values.ndim):
        for end in (0, -1):
            if np.any(np.take(values, end, axis=axis) >= level):
                return True
    return False


def _marching_squares(values: np.ndarray, level: float) -> Tuple[np.ndarray, np.ndarray]:
    vertices, segments = [], []
    offset = 0
    for contour in measure.find_contours(values, level):
        closed = len(contour) > 2 and np.array_equal(contour[0], contour[-1])
        points = contour[:-1] if closed else contour
        k = len(points)
        if k < 2:
            continue

        idx = np.arange(k)
        if closed:
            pairs = np.stack([idx, (idx + 1) % k], axis=1)
        else:
            pairs = np.stack([idx[:-1], idx[1:]], axis=1)

        vertices.append(points)
        segments.append(pairs + offset)
        offset += k

    if not vertices:
        return np.zeros((0, 2)), np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(vertices), np.concatenate(segments).astype(np.int64)


def _marching_cubes(values: np.ndarray, level: float) -> Tuple[np.ndarray, np.ndarray]:
    try:
        verts, faces, _, _ = measure.marching_cubes(values, level=level, method="lewiner",
                                                    allow_degenerate=False)
    except (ValueError, RuntimeError) as e:
        raise EmptyLevelSetError(f"marching cubes found no surface at level {level:g}") from e
    return verts.astype(float), faces.astype(np.int64)


def _polish_on_edges(F: DensityField,
                     level: float,
                     grid: GridSpec,
                     values: np.ndarray,
                     index: np.ndarray,
                     iterations: int,
                     tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Safeguarded Newton along the grid edge carrying each vertex. Vertices not
    on a single edge get Newton steps along the gradient instead.
    Returns (physical vertices, residuals).
    """
    n, d = index.shape
    step = grid.step
    frac = np.abs(index - np.round(index))
    on_edge = frac > 1e-9
    edge = on_edge.sum(axis=1) == 1
    axis = np.argmax(on_edge, axis=1)
    rows = np.arange(n)

    base = np.round(index).astype(np.int64)
    base[rows, axis] = np.floor(index[rows, axis]).astype(np.int64)
    upper_node = base.copy()
    upper_node[rows, axis] += 1
    shape = np.asarray(values.shape)
    inside = np.all((base >= 0) & (upper_node < shape), axis=1)
    edge &= inside

    fa = np.full(n, np.nan)
    fb = np.full(n, np.nan)
    fa[edge] = values[tuple(base[edge].T)] - level
    fb[edge] = values[tuple(upper_node[edge].T)] - level
    edge &= fa * fb < 0

    s = np.where(edge, index[rows, axis] - base[rows, axis], 0.0)
    lo = np.zeros(n)
    hi = np.ones(n)
    f_lo = fa.copy()

    def edge_points(sel: np.ndarray) -> np.ndarray:
        q = base[sel].astype(float)
        q[np.arange(sel.sum()), axis[sel]] += s[sel]
        return grid.index_to_point(q)

    points = grid.index_to_point(index)
    residual = F.evaluate(points, order=0)[0] - level

    active = edge & (np.abs(residual) > tol)
    for _ in range(iterations):
        if not active.any():
            break
        pts = edge_points(active)
        vals, grads, _ = F.evaluate(pts, order=1)
        f = vals - level
        residual[active] = f

        idx = np.flatnonzero(active)
        ax = axis[idx]
        same = np.sign(f) == np.sign(f_lo[idx])
        lo[idx] = np.where(same, s[idx], lo[idx])
        f_lo[idx] = np.where(same, f, f_lo[idx])
        hi[idx] = np.where(same, hi[idx], s[idx])

        slope = grads[np.arange(idx.size), ax] * step[ax]
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = s[idx] - f / slope
        bad = ~np.isfinite(newton) | (newton <= lo[idx]) | (newton >= hi[idx])
        done = np.abs(f) <= tol
        s[idx] = np.where(done, s[idx], np.where(bad, 0.5 * (lo[idx] + hi[idx]), newton))
        active[idx[done]] = False

    if edge.any():
        points[edge] = edge_points(edge)
        residual[edge] = F.evaluate(points[edge], order=0)[0] - level

    free = ~edge & (np.abs(residual) > tol)
    for _ in range(iterations):
        if not free.any():
            break
        vals, grads, _ = F.evaluate(points[free], order=1)
        f = vals - level
        residual[free] = f
        norm_sq = np.einsum("ij,ij->i", grads, grads)
        with np.errstate(divide="ignore", invalid="ignore"):
            move = grads * (f / norm_sq)[:, None]
        move = np.where(np.isfinite(move), move, 0.0)
        limit = np.max(step)
        length = np.linalg.norm(move, axis=1, keepdims=True)
        move = np.where(length > limit, move * limit / np.maximum(length, 1e-300), move)
        points[free] -= move
        idx = np.flatnonzero(free)
        free[idx[np.abs(f) <= tol]] = False

    if (~edge).any():
        residual[~edge] = F.evaluate(points[~edge], order=0)[0] - level

    return points, residual


def _cell_measures(vertices: Points, cells: Cells) -> np.ndarray:
    if cells.shape[1] == 2:
        return np.linalg.norm(vertices[cells[:, 1]] - vertices[cells[:, 0]], axis=1)
    a, b, c = (vertices[cells[:, k]] for k in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def extract_level_mesh(F: DensityField,
                       level: float,
                       grid: GridSpec,
                       iterations: int = POLISH_ITERATIONS) -> LevelMesh:
    """
    Extract {F = level} on the grid and polish the vertices onto the level set.

    Marching squares (d=2) or marching cubes with topologically consistent
    case tables (d=3) give the combinatorics; each vertex is then moved along
    its grid edge until |F(v) - level| <= 1e-10 * level.

    :param F: Field to contour
    :param level: Level c
    :param grid: Sampling grid; should enclose the level set
    :param iterations: Maximum polish iterations per vertex
    :return: LevelMesh with derivative bundles at the vertices
    """
    if F.dim != grid.dim:
        raise ValueError(f"field dimension {F.dim} does not match grid dimension {grid.dim}")
    if F.dim not in (2, 3):
        raise ValueError("level sets are extracted for d = 2 and 3 only")

    level = float(level)
    values = F.evaluate_grid(grid, "nodes", order=0)[0]
    _check_bracket(values, level)

    diagnostics: Dict[str, Any] = {"touches_boundary": _touches_boundary(values, level)}
    if diagnostics["touches_boundary"]:
        logger.warning("Level set at c=%g reaches the grid boundary; the mesh will not be closed", level)

    if F.dim == 2:
        index, cells = _marching_squares(values, level)
        diagnostics["grid_loops"] = _mask_loops(values, level)
    else:
        index, cells = _marching_cubes(values, level)

    if cells.shape[0] == 0:
        raise EmptyLevelSetError(f"level set at c={level:g} is empty on the grid")

    tol = level_tolerance(level)
    vertices, residual = _polish_on_edges(F, level, grid, np.asarray(values), index, iterations, tol)

    unpolished = int(np.sum(np.abs(residual) > tol))
    diagnostics["unpolished_vertices"] = unpolished
    diagnostics["max_residual"] = float(np.max(np.abs(residual)))
    if unpolished:
        logger.warning("%d of %d vertices did not reach |F - c| <= %.3g", unpolished, len(residual), tol)

    bundle = F.deriv_bundle(vertices)
    mesh = LevelMesh(
        vertices=vertices,
        cells=cells,
        level=level,
        grid=grid,
        bundle=bundle,
        cell_measures=_cell_measures(vertices, cells),
        diagnostics=diagnostics,
    )
    logger.debug("Extracted level mesh: %d vertices, %d cells, measure %.6g",
                 mesh.n_vertices, mesh.n_cells, mesh.total_measure)
    return mesh


def mesh_integral(mesh: LevelMesh,
                  phi: Union[np.ndarray, float, Callable[[Points, DerivBundle], np.ndarray]]) -> float:
    """
    Sum over cells of cell measure times the mean of phi over the cell's vertices.

    :param mesh: Level mesh
    :param phi: Vertex values, a constant, or a callable (vertices, bundle) -> values
    """
    if callable(phi):
        try:
            values = phi(mesh.vertices, mesh.bundle)
        except LevelSetError:
            raise
        except Exception as e:
            raise IntegrandEvaluationError(f"integrand evaluation failed on the mesh: {e}") from e
    else:
        values = phi

    values = np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_vertices,))

    bad = ~np.isfinite(values)
    if bad.any():
        vertex = int(np.flatnonzero(bad)[0])
        cell = int(np.flatnonzero(np.any(mesh.cells == vertex, axis=1))[0])
        raise IntegrandEvaluationError(f"integrand is not finite at vertex {vertex}", cell)

    cell_means = values[mesh.cells].mean(axis=1)
    return float(np.sum(mesh.cell_measures * cell_means))


def _used_vertices(mesh: LevelMesh) -> np.ndarray:
    return np.unique(mesh.cells)


def mesh_components(mesh: LevelMesh) -> int:
    """Connected components of the cell complex (loops for d=2)."""
    used = _used_vertices(mesh)
    if used.size == 0:
        return 0
    edges = np.concatenate([mesh.cells[:, [k, (k + 1) % mesh.cells.shape[1]]]
                            for k in range(mesh.cells.shape[1])])
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
                       shape=(mesh.n_vertices, mesh.n_vertices))
    _, labels = connected_components(graph, directed=False)
    return int(np.unique(labels[used]).size)


def mesh_euler_characteristic(mesh: LevelMesh) -> int:
    """
    V - E + F of a closed triangle mesh (d=3); 0 for closed curves (d=2).

    Raises TopologyError when an edge is not shared by exactly two triangles,
    or a curve vertex does not belong to exactly two segments.
    """
    if mesh.dim == 2:
        degree = np.bincount(mesh.cells.reshape(-1), minlength=mesh.n_vertices)[_used_vertices(mesh)]
        if np.any(degree != 2):
            raise TopologyError(f"{int(np.sum(degree != 2))} curve vertices do not have exactly two segments")
        return 0

    tri = mesh.cells
    edges = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    unique_edges, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts != 2):
        raise TopologyError(f"{int(np.sum(counts != 2))} edges are not shared by exactly two triangles")

    return int(_used_vertices(mesh).size - unique_edges.shape[0] + tri.shape[0])


def _mask_loops(values: np.ndarray, level: float) -> int:
    mask = np.pad((values >= level).astype(np.uint8), 1)
    contours, _ = cv2.findContours(mask, cv2.RETR_CCOMP, cv2.CHAIN_APPROX_SIMPLE)
    return len(contours)


def grid_loop_count(F: DensityField, level: float, grid: GridSpec) -> int:
    """
    Boundary loops of the super-level mask {F >= level} on the grid nodes,
    traced with OpenCV contours (outer boundaries plus holes). d=2 only.
    """
    if grid.dim != 2:
        raise ValueError("loop counting works on 2-D grids only")
    return _mask_loops(F.evaluate_grid(grid, "nodes", order=0)[0], float(level))


def export_mesh(mesh: LevelMesh, path: PathLike) -> Path:
    """OBJ for triangle meshes, CSV (loop, x, y) for curves."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    if mesh.dim == 3:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"# level {mesh.level!r}\n")
            for v in mesh.vertices:
                f.write(f"v {v[0]:.12g} {v[1]:.12g} {v[2]:.12g}\n")
            for t in mesh.cells + 1:
                f.write(f"f {t[0]} {t[1]} {t[2]}\n")
        return path

    graph = coo_matrix((np.ones(mesh.n_cells), (mesh.cells[:, 0], mesh.cells[:, 1])),
                       shape=(mesh.n_vertices, mesh.n_vertices))
    _, labels = connected_components(graph, directed=False)
    rows = np.column_stack([labels, mesh.vertices])
    np.savetxt(path, rows, delimiter=",", header="loop,x,y", comments="", fmt=["%d", "%.12g", "%.12g"])
    return path
