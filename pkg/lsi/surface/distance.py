import logging
import numpy as np

from itertools import product
from typing import Optional, Tuple

from lsi.surface.grid import GridSpec
from lsi.types import Point, Points, Values


logger = logging.getLogger(__name__)

KEY_OFFSET = 1 << 20
KEY_RADIX = 1 << 21
PAIR_CHUNK = 1 << 22


def closest_point_on_segments(p: Points, a: Points, b: Points) -> Points:
    ab = b - a
    length_sq = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("ij,ij->i", p - a, ab) / length_sq
    t = np.clip(np.where(length_sq > 0, t, 0.0), 0.0, 1.0)
    return a + t[:, None] * ab


def closest_point_on_triangles(p: Points, a: Points, b: Points, c: Points) -> Points:
    """
    Closest point on triangles abc to p (row-wise), by Voronoi regions of the
    vertices, edges and face. Regions are applied from lowest to highest
    priority so that the result matches the sequential region tests.
    """
    def dot(u, v):
        return np.einsum("ij,ij->i", u, v)

    ab, ac, ap = b - a, c - a, p - a
    bp, cp = p - b, p - c
    d1, d2 = dot(ab, ap), dot(ac, ap)
    d3, d4 = dot(ab, bp), dot(ac, bp)
    d5, d6 = dot(ab, cp), dot(ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        q = a + ab * (vb * denom)[:, None] + ac * (vc * denom)[:, None]

        mask = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        q = np.where(mask[:, None], b + w[:, None] * (c - b), q)

        mask = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        w = d2 / (d2 - d6)
        q = np.where(mask[:, None], a + w[:, None] * ac, q)

        q = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, q)

        mask = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        v = d1 / (d1 - d3)
        q = np.where(mask[:, None], a + v[:, None] * ab, q)

        q = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, q)
        q = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, q)

    bad = ~np.all(np.isfinite(q), axis=1)
    if bad.any():
        corners = np.stack([a[bad], b[bad], c[bad]], axis=1)
        dist = np.linalg.norm(corners - p[bad][:, None, :], axis=2)
        q[bad] = corners[np.arange(bad.sum()), np.argmin(dist, axis=1)]
    return q


class MeshDistanceIndex:
    """
    Uniform spatial hash over the cells of a level mesh.

    Every cell is registered in each bin its bounding box touches; a query
    inspects the (2r+1)^d bins around the query bin, which is exact for
    distances up to r bin widths. The radius doubles until that holds.
    """

    def __init__(self, mesh, bin_size: Optional[float] = None) -> None:
        if mesh.n_cells == 0:
            raise ValueError("cannot index an empty mesh")

        self._corners = mesh.vertices[mesh.cells]
        self._dim = mesh.dim
        lo = self._corners.min(axis=1)
        hi = self._corners.max(axis=1)

        if bin_size is None:
            extent = np.max(hi - lo, axis=1)
            bin_size = 2.0 * max(float(np.median(extent)), 1e-9)
        if bin_size <= 0:
            raise ValueError("bin_size must be > 0")

        self._bin = float(bin_size)
        self._origin = lo.min(axis=0)

        lo_bin = self._to_bin(lo)
        hi_bin = self._to_bin(hi)
        spans = hi_bin - lo_bin + 1

        keys, cells = [], []
        for offset in product(*(range(int(s)) for s in spans.max(axis=0))):
            offset = np.asarray(offset)
            sel = np.all(offset < spans, axis=1)
            keys.append(self._key(lo_bin[sel] + offset))
            cells.append(np.flatnonzero(sel))

        keys = np.concatenate(keys)
        cells = np.concatenate(cells)
        order = np.argsort(keys, kind="stable")
        self._keys = keys[order]
        self._cells = cells[order]
        logger.debug("Indexed %d mesh cells into %d bin entries (bin %.4g)",
                     mesh.n_cells, self._keys.size, self._bin)

    @property
    def bin_size(self) -> float:
        return self._bin

    def _to_bin(self, points: Points) -> np.ndarray:
        return np.floor((points - self._origin) / self._bin).astype(np.int64)

    def _key(self, bins: np.ndarray) -> np.ndarray:
        key = np.zeros(bins.shape[0], dtype=np.int64)
        for k in range(self._dim):
            key = key * KEY_RADIX + np.clip(bins[:, k] + KEY_OFFSET, 0, KEY_RADIX - 1)
        return key

    def closest_on_cells(self, points: Points, cells: np.ndarray) -> Points:
        corners = self._corners[cells]
        if self._dim == 2:
            return closest_point_on_segments(points, corners[:, 0], corners[:, 1])
        return closest_point_on_triangles(points, corners[:, 0], corners[:, 1], corners[:, 2])

    def _candidates(self, bins: np.ndarray, radius: int) -> Tuple[np.ndarray, np.ndarray]:
        queries, cells = [], []
        for offset in product(range(-radius, radius + 1), repeat=self._dim):
            keys = self._key(bins + np.asarray(offset))
            left = np.searchsorted(self._keys, keys, side="left")
            right = np.searchsorted(self._keys, keys, side="right")
            counts = right - left
            total = int(counts.sum())
            if total == 0:
                continue
            starts = np.repeat(left - (np.cumsum(counts) - counts), counts)
            queries.append(np.repeat(np.arange(bins.shape[0]), counts))
            cells.append(self._cells[starts + np.arange(total)])

        if not queries:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(queries), np.concatenate(cells)

    def _nearest(self, points: Points, radius: int) -> Tuple[Values, Points]:
        m = points.shape[0]
        best = np.full(m, np.inf)
        closest = np.full((m, self._dim), np.nan)

        queries, cells = self._candidates(self._to_bin(points), radius)
        for start in range(0, queries.size, PAIR_CHUNK):
            q = queries[start:start + PAIR_CHUNK]
            c = cells[start:start + PAIR_CHUNK]
            foot = self.closest_on_cells(points[q], c)
            dist = np.linalg.norm(points[q] - foot, axis=1)
            np.minimum.at(best, q, dist)
            hit = dist <= best[q]
            closest[q[hit]] = foot[hit]
        return best, closest

    def query(self, points: Points, max_distance: Optional[float] = None) -> Tuple[Values, Points]:
        """
        Exact distance from each point to the mesh, with the closest mesh point.

        :param points: Query points (m, d)
        :param max_distance: If given, only distances up to this value are
            resolved; farther points report inf and a NaN closest point
        :return: Tuple (distances (m,), closest points (m, d))
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self._dim:
            raise ValueError(f"expected points of dimension {self._dim}")

        if max_distance is not None:
            radius = max(1, int(np.ceil(max_distance / self._bin)))
            dist, closest = self._nearest(points, radius)
            far = dist > max_distance
            dist[far] = np.inf
            closest[far] = np.nan
            return dist, closest

        dist = np.full(points.shape[0], np.inf)
        closest = np.full(points.shape, np.nan)
        pending = np.arange(points.shape[0])
        radius = 1
        while pending.size:
            if (2 * radius + 1) ** self._dim > self._corners.shape[0]:
                dist[pending], closest[pending] = self._brute_force(points[pending])
                break
            d_new, c_new = self._nearest(points[pending], radius)
            done = d_new <= radius * self._bin
            dist[pending[done]] = d_new[done]
            closest[pending[done]] = c_new[done]
            pending = pending[~done]
            radius *= 2
        return dist, closest

    def _brute_force(self, points: Points) -> Tuple[Values, Points]:
        n_cells = self._corners.shape[0]
        best = np.full(points.shape[0], np.inf)
        closest = np.full(points.shape, np.nan)
        per_point = max(1, PAIR_CHUNK // n_cells)
        for start in range(0, points.shape[0], per_point):
            block = points[start:start + per_point]
            q = np.repeat(np.arange(block.shape[0]), n_cells)
            c = np.tile(np.arange(n_cells), block.shape[0])
            foot = self.closest_on_cells(block[q], c)
            dist = np.linalg.norm(block[q] - foot, axis=1).reshape(block.shape[0], n_cells)
            nearest = np.argmin(dist, axis=1)
            rows = np.arange(block.shape[0])
            best[start:start + block.shape[0]] = dist[rows, nearest]
            closest[start:start + block.shape[0]] = foot.reshape(block.shape[0], n_cells, -1)[rows, nearest]
        return best, closest

    def grid_distances(self, grid: GridSpec, radius: float) -> Tuple[Values, Points]:
        """
        Distances from every grid cell center within `radius` of the mesh,
        scattered from the mesh cells onto the grid.

        :return: Tuple (distances (N,), closest points (N, d)) in the order of
            grid.cell_centers(); inf / NaN beyond the radius
        """
        if grid.dim != self._dim:
            raise ValueError("grid and mesh dimensions differ")

        n_centers = int(np.prod(grid.cell_shape))
        best = np.full(n_centers, np.inf)
        closest = np.full((n_centers, self._dim), np.nan)

        step = grid.step
        first_center = grid.lower + 0.5 * step
        res = np.asarray(grid.cell_shape)

        lo = np.ceil((self._corners.min(axis=1) - radius - first_center) / step).astype(np.int64)
        hi = np.floor((self._corners.max(axis=1) + radius - first_center) / step).astype(np.int64)
        lo = np.clip(lo, 0, res - 1)
        hi = np.clip(hi, -1, res - 1)
        counts = np.maximum(hi - lo + 1, 0)
        totals = np.prod(counts, axis=1)

        cum = np.cumsum(totals)
        start = 0
        while start < totals.size:
            stop = int(np.searchsorted(cum, cum[start] - totals[start] + PAIR_CHUNK, side="right"))
            cells = np.arange(start, max(stop, start + 1))
            start = cells[-1] + 1
            tot = totals[cells]
            if tot.sum() == 0:
                continue

            cell_rep = np.repeat(cells, tot)
            local = np.arange(tot.sum()) - np.repeat(np.cumsum(tot) - tot, tot)
            index = np.empty((local.size, self._dim), dtype=np.int64)
            rem = local
            for k in range(self._dim - 1, -1, -1):
                size = counts[cell_rep, k]
                index[:, k] = lo[cell_rep, k] + rem % size
                rem = rem // size

            centers = first_center + index * step
            foot = self.closest_on_cells(centers, cell_rep)
            dist = np.linalg.norm(centers - foot, axis=1)
            keep = dist <= radius
            flat = np.ravel_multi_index(tuple(index[keep].T), grid.cell_shape)
            dist, foot = dist[keep], foot[keep]

            np.minimum.at(best, flat, dist)
            hit = dist <= best[flat]
            closest[flat[hit]] = foot[hit]

        return best, closest


def distance_to_mesh(mesh, x: Point) -> float:
    dist, _ = mesh.distance_index().query(np.asarray(x, dtype=float)[None, :])
    return float(dist[0])
