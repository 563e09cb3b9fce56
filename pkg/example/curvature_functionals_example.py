import numpy as np

from lsi import (GaussianField, GaussianMixtureField, EulerMethod, euler_characteristic, minkowski_functionals,
                 willmore_energy)
from lsi.estimators import default_grid, euler_characteristic_curve


def sphere_functionals(level: float = 0.02, res: int = 128) -> None:
    field = GaussianField(dim=3)
    grid = default_grid(field, res)
    r = field.level_radius(level)

    chi = euler_characteristic(field, level, EulerMethod("plugin_gb"), grid)
    print(f"sphere r={r:.4f}: chi raw {chi.raw:.4f} -> {chi.snapped}")
    print(f"willmore energy {willmore_energy(field, level, grid):.5f} (4 pi = {4 * np.pi:.5f})")

    report = minkowski_functionals(field, level, grid)
    for j, v in enumerate(report.values):
        print(f"V{j} = {v:.6f}")


def two_blob_curve(res: int = 96) -> None:
    """Two blobs: chi = 2 at low levels (one merged surface), 4 once they separate, 0 above both peaks."""
    field = GaussianMixtureField([0.5, 0.5], [[-2.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [1.0, 1.0])
    grid = default_grid(field, res)
    for e in euler_characteristic_curve(field, [0.001, 0.005, 0.01, 0.02, 0.04], EulerMethod("combinatorial"), grid):
        print(f"c={e.level:<6g} chi={e.snapped}")


if __name__ == "__main__":
    sphere_functionals()
    two_blob_curve()
