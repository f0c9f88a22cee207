"""Gaussian-filtered imaginary-time generators.

The compiled kernel for the F_{a,T} weight table is used when the extension
was built; otherwise the numpy implementation is selected at import.
``KERNEL`` names the active one.
"""

from .operators import (
    ExactGroundB,
    b_apply_quadrature,
    b_exact_on_ground,
    b_filtered,
    b_filtered_eigenbasis,
    b_filtered_on_ground,
    cauchy_kernels,
)
from .weights import (
    KERNEL,
    FilterParams,
    envelope_cutoff,
    filter_weight,
    gl_panels,
    truncation_bound,
    truncation_cutoff,
    weight_table,
)

__all__ = [
    "KERNEL",
    "ExactGroundB",
    "FilterParams",
    "b_apply_quadrature",
    "b_exact_on_ground",
    "b_filtered",
    "b_filtered_eigenbasis",
    "b_filtered_on_ground",
    "cauchy_kernels",
    "envelope_cutoff",
    "filter_weight",
    "gl_panels",
    "truncation_bound",
    "truncation_cutoff",
    "weight_table",
]
