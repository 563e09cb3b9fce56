import numpy as np

from pathlib import Path
from typing import Tuple, Union, List, Dict, Any, Optional


SamplePath = Path
Point = np.ndarray                                                                      # shape: (d,), dtype=float64
Points = np.ndarray                                                                     # shape: (m, d), dtype=float64
Vector = np.ndarray                                                                     # shape: (d,), dtype=float64
Matrix = np.ndarray                                                                     # shape: (d, d), dtype=float64
Values = np.ndarray                                                                     # shape: (m,), dtype=float64
Gradients = np.ndarray                                                                  # shape: (m, d), dtype=float64
Hessians = np.ndarray                                                                   # shape: (m, d, d), dtype=float64
Cells = np.ndarray                                                                      # shape: (C, 2) segments or (C, 3) triangles, dtype=int64
FieldEvaluation = Tuple[Values, Optional[Gradients], Optional[Hessians]]                # (values, grads, hessians)
Bounds = Tuple[Tuple[float, ...], Tuple[float, ...]]                                    # (lower, upper)
ProjectionResult = Tuple[float, Point]                                                  # (t, foot)
Report = Dict[str, Any]                                                                 # flat snake_case JSON document
ReportRows = List[Dict[str, Any]]                                                       # CSV rows
PathLike = Union[str, Path]
