from .bundle import DerivBundle, gradient_floor, vech_indices, vech_length
from .base import DensityField
from .samples import SamplePoints, read_samples, write_samples, as_sample
from .kde import KernelDensityField, default_bandwidth
from .analytic import GaussianMixtureField, GaussianField, ProductGaussianField, field_from_dict


__all__ = [
    "DerivBundle",
    "gradient_floor",
    "vech_indices",
    "vech_length",

    "DensityField",
    "KernelDensityField",
    "default_bandwidth",

    "GaussianMixtureField",
    "GaussianField",
    "ProductGaussianField",
    "field_from_dict",

    "SamplePoints",
    "read_samples",
    "write_samples",
    "as_sample",
]
