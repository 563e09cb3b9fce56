from .base import EstimatorKind, EstimateReport, default_grid, cached_level_mesh
from .surface_integral import (estimate, default_band_eps, default_tube_eps, level_average, window_fraction,
                               uniform_sum_cdf)
from .inference import variance_hat, confidence_interval, variance_hat_unknown, normal_quantile, slice_response
from .functionals import (EulerMethod, EulerEstimate, euler_characteristic, euler_characteristic_curve,
                          MinkowskiReport, minkowski_functionals, willmore_energy, gauss_bonnet_constant,
                          unit_ball_volume)
from .ustat import UStatEstimate, ustat_integrand_estimate, plugin_integrand_estimate
from .bandwidth import BandwidthSelection, bandwidth_opt


__all__ = [
    "EstimatorKind",
    "EstimateReport",
    "default_grid",
    "cached_level_mesh",

    "estimate",
    "default_band_eps",
    "default_tube_eps",
    "level_average",
    "window_fraction",
    "uniform_sum_cdf",

    "variance_hat",
    "confidence_interval",
    "variance_hat_unknown",
    "normal_quantile",
    "slice_response",

    "EulerMethod",
    "EulerEstimate",
    "euler_characteristic",
    "euler_characteristic_curve",
    "MinkowskiReport",
    "minkowski_functionals",
    "willmore_energy",
    "gauss_bonnet_constant",
    "unit_ball_volume",

    "UStatEstimate",
    "ustat_integrand_estimate",
    "plugin_integrand_estimate",

    "BandwidthSelection",
    "bandwidth_opt",
]
