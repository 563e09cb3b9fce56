from .grid import GridSpec, DEFAULT_RES
from .mesh import (LevelMesh, extract_level_mesh, mesh_integral, mesh_euler_characteristic, mesh_components,
                   grid_loop_count, export_mesh, level_tolerance)
from .distance import MeshDistanceIndex, distance_to_mesh
from .projection import project_to_level, projection_bijectivity, BijectivityReport, symmetric_difference_volume


__all__ = [
    "GridSpec",
    "DEFAULT_RES",

    "LevelMesh",
    "extract_level_mesh",
    "mesh_integral",
    "mesh_euler_characteristic",
    "mesh_components",
    "grid_loop_count",
    "export_mesh",
    "level_tolerance",

    "MeshDistanceIndex",
    "distance_to_mesh",

    "project_to_level",
    "projection_bijectivity",
    "BijectivityReport",
    "symmetric_difference_volume",
]
