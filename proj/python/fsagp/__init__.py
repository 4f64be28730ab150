"""Gaussian process regression for large spatial datasets."""

try:
    from ._core import (
        Model,
        NumericalError,
        fit,
        matern,
        scores,
        select_inducing,
        simulate,
        taper_range_for_row_nnz,
        vecchia_nll,
    )
except ImportError:  # in-tree layout: extension built next to the package
    from _core import (
        Model,
        NumericalError,
        fit,
        matern,
        scores,
        select_inducing,
        simulate,
        taper_range_for_row_nnz,
        vecchia_nll,
    )

__all__ = [
    "Model",
    "NumericalError",
    "fit",
    "matern",
    "scores",
    "select_inducing",
    "simulate",
    "taper_range_for_row_nnz",
    "vecchia_nll",
]
