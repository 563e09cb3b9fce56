from .config import McConfig
from .study import (McResult, run_study, run_replicate, rate_report, reference_truth, theoretical_rates,
                    theoretical_slopes, fit_rate, splitmix64, replicate_seed, estimator_labels)
from .plots import write_histograms, histogram_drawing, standardized


__all__ = [
    "McConfig",

    "McResult",
    "run_study",
    "run_replicate",
    "rate_report",
    "reference_truth",
    "theoretical_rates",
    "theoretical_slopes",
    "fit_rate",
    "splitmix64",
    "replicate_seed",
    "estimator_labels",

    "write_histograms",
    "histogram_drawing",
    "standardized",
]
