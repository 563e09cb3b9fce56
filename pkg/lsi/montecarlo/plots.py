import logging
import numpy as np

from pathlib import Path
from scipy import stats
from typing import List, Optional, Tuple

from reportlab.graphics import renderSVG
from reportlab.graphics.shapes import Drawing, Line, PolyLine, Rect, String
from reportlab.lib import colors

from lsi.montecarlo.study import McResult
from lsi.types import PathLike


logger = logging.getLogger(__name__)

WIDTH = 420
HEIGHT = 300
MARGIN = 40
Z_RANGE = 4.0


def standardized(values: np.ndarray) -> np.ndarray:
    """(value - mean) / sd over the replicates; empty when sd vanishes."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return np.empty(0)
    sd = np.std(values, ddof=1)
    if sd == 0.0:
        return np.empty(0)
    return (values - values.mean()) / sd


def _bins(z: np.ndarray, bins: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    if bins is None:
        bins = int(np.clip(np.ceil(2.0 * z.size ** (1.0 / 3.0)), 8, 40))
    return np.histogram(np.clip(z, -Z_RANGE, Z_RANGE), bins=bins, range=(-Z_RANGE, Z_RANGE), density=True)


def histogram_drawing(z: np.ndarray, title: str, bins: Optional[int] = None) -> Drawing:
    """Density histogram of z over [-4, 4] with the standard normal density on top."""
    heights, edges = _bins(z, bins)
    grid_z = np.linspace(-Z_RANGE, Z_RANGE, 161)
    normal = stats.norm.pdf(grid_z)
    top = max(float(heights.max(initial=0.0)), float(normal.max())) * 1.1

    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN

    def to_x(value):
        return MARGIN + (value + Z_RANGE) / (2.0 * Z_RANGE) * plot_w

    def to_y(value):
        return MARGIN + value / top * plot_h

    drawing = Drawing(WIDTH, HEIGHT)
    drawing.add(Rect(0, 0, WIDTH, HEIGHT, fillColor=colors.white, strokeColor=None))

    for height, lo, hi in zip(heights, edges[:-1], edges[1:]):
        if height <= 0:
            continue
        drawing.add(Rect(to_x(lo), MARGIN, to_x(hi) - to_x(lo), to_y(height) - MARGIN,
                         fillColor=colors.lightsteelblue, strokeColor=colors.steelblue, strokeWidth=0.5))

    points: List[float] = []
    for zz, pp in zip(grid_z, normal):
        points.extend((float(to_x(zz)), float(to_y(pp))))
    drawing.add(PolyLine(points, strokeColor=colors.firebrick, strokeWidth=1.5))

    drawing.add(Line(MARGIN, MARGIN, WIDTH - MARGIN, MARGIN, strokeColor=colors.black))
    for tick in range(-int(Z_RANGE), int(Z_RANGE) + 1):
        x = to_x(tick)
        drawing.add(Line(x, MARGIN, x, MARGIN - 4, strokeColor=colors.black))
        drawing.add(String(x, MARGIN - 16, str(tick), fontSize=9, textAnchor="middle"))

    drawing.add(String(WIDTH / 2, HEIGHT - MARGIN / 2, title, fontSize=11, textAnchor="middle"))
    drawing.add(String(WIDTH - MARGIN, HEIGHT - MARGIN / 2 - 14, f"R = {z.size}", fontSize=9, textAnchor="end"))
    return drawing


def write_histograms(res: McResult, out_dir: PathLike, bins: Optional[int] = None) -> List[Path]:
    """One `hist_n<N>_<estimator>.svg` per (n, estimator) with at least two distinct values."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = []
    for row in res.rows:
        n, tag = row["n"], row["estimator"]
        z = standardized(res.values(n, tag))
        if z.size == 0:
            logger.warning("No spread in the estimates for n=%d, %s; histogram skipped", n, tag)
            continue

        path = out_dir / f"hist_n{n}_{tag}.svg"
        drawing = histogram_drawing(z, f"{tag}, n = {n}: standardized estimates", bins)
        renderSVG.drawToFile(drawing, str(path))
        paths.append(path)
        logger.info("Saved %s", path)
    return paths
