from __future__ import annotations

from .types import *
from .exceptions import (LevelSetError, LevelNotBracketedError, EmptyLevelSetError, DegenerateGradientError,
                         NoBracketError, FocalPointError, EmptyRegionError, TopologyError, IntegrandEvaluationError,
                         DegenerateVarianceError, DegenerateBandwidthError, ReplicateFailureError,
                         MalformedExpressionError)
from .parallel import thread_count, set_thread_count
from .kernels import KernelSpec, make_kernel
from .density import (DensityField, KernelDensityField, GaussianMixtureField, GaussianField, ProductGaussianField,
                      DerivBundle, SamplePoints, read_samples, write_samples, field_from_dict, default_bandwidth)
from .geometry import CurvatureBundle, curvature_bundle, PhiExpr, parse_phi, named, unity
from .integrands import Integrand, KnownIntegrand, PhiIntegrand, LinearCombination, as_integrand
from .surface import GridSpec, LevelMesh, extract_level_mesh, mesh_integral, project_to_level
from .estimators import (EstimatorKind, EstimateReport, estimate, variance_hat, confidence_interval,
                         variance_hat_unknown, EulerMethod, euler_characteristic, minkowski_functionals,
                         willmore_energy, ustat_integrand_estimate, bandwidth_opt)
from .montecarlo import McConfig, McResult, run_study, rate_report


__all__ = [
    "Point", "Points", "Values", "Gradients", "Hessians", "Cells", "PathLike",

    "LevelSetError",
    "LevelNotBracketedError",
    "EmptyLevelSetError",
    "DegenerateGradientError",
    "NoBracketError",
    "FocalPointError",
    "EmptyRegionError",
    "TopologyError",
    "IntegrandEvaluationError",
    "DegenerateVarianceError",
    "DegenerateBandwidthError",
    "ReplicateFailureError",
    "MalformedExpressionError",

    "thread_count",
    "set_thread_count",

    "KernelSpec",
    "make_kernel",

    "DensityField",
    "KernelDensityField",
    "GaussianMixtureField",
    "GaussianField",
    "ProductGaussianField",
    "DerivBundle",
    "SamplePoints",
    "read_samples",
    "write_samples",
    "field_from_dict",
    "default_bandwidth",

    "CurvatureBundle",
    "curvature_bundle",
    "PhiExpr",
    "parse_phi",
    "named",
    "unity",

    "Integrand",
    "KnownIntegrand",
    "PhiIntegrand",
    "LinearCombination",
    "as_integrand",

    "GridSpec",
    "LevelMesh",
    "extract_level_mesh",
    "mesh_integral",
    "project_to_level",

    "EstimatorKind",
    "EstimateReport",
    "estimate",
    "variance_hat",
    "confidence_interval",
    "variance_hat_unknown",
    "EulerMethod",
    "euler_characteristic",
    "minkowski_functionals",
    "willmore_energy",
    "ustat_integrand_estimate",
    "bandwidth_opt",

    "McConfig",
    "McResult",
    "run_study",
    "rate_report",
]
