"""Numerical laboratory for pointwise inequalities of fractional Laplacians."""
from .report import InequalityReport
from .torus import (ScalarField, SingularKernel, TorusGrid, apply_fractional_laplacian,
                    normalization_constant, riesz_transform, singular_integral_laplacian)

__all__ = ["InequalityReport", "ScalarField", "SingularKernel", "TorusGrid",
           "apply_fractional_laplacian", "normalization_constant", "riesz_transform",
           "singular_integral_laplacian"]
__version__ = "0.1.0"
