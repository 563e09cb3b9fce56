from .curvature import (CurvatureBundle, curvature_bundle, gauss_curvature_adjugate, weight_wg,
                        parallel_curvature, mean_curvature, unit_normal, principal_minor_sums,
                        elementary_symmetric)
from .phi import (PhiExpr, Const, GradComponent, HessComponent, InvGradNorm, Sum, Product, Named,
                  WeightSquared, unity, named, parse_phi, phi_from_json, phi_integrand, phi_gradient,
                  as_phi, NAMED_EXPRESSIONS)


__all__ = [
    "CurvatureBundle",
    "curvature_bundle",
    "gauss_curvature_adjugate",
    "weight_wg",
    "parallel_curvature",
    "mean_curvature",
    "unit_normal",
    "principal_minor_sums",
    "elementary_symmetric",

    "PhiExpr", "Const", "GradComponent", "HessComponent", "InvGradNorm",
    "Sum", "Product", "Named", "WeightSquared",
    "unity", "named", "parse_phi", "phi_from_json", "phi_integrand", "phi_gradient", "as_phi",
    "NAMED_EXPRESSIONS",
]
