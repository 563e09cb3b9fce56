from .base import KernelSpec, make_kernel, ball_quadrature


__all__ = [
    "KernelSpec",
    "make_kernel",
    "ball_quadrature",
]
