# Apache License, Version 2.0, refer to LICENSE.txt
"""Bayesian temporal matrix/tensor factorization for incomplete time series.

The heavy lifting lives in the compiled extension `btf._btf`; this package
re-exports the main operations. Missing values travel as NaN.
"""

from ._btf import (  # noqa: F401
    IndefiniteMatrixError,
    UndefinedMetricError,
    apply_mask,
    impute,
    impute_tensor,
    mape,
    rmse,
    rolling_forecast,
)

__all__ = [
    "IndefiniteMatrixError",
    "UndefinedMetricError",
    "apply_mask",
    "impute",
    "impute_tensor",
    "mape",
    "rmse",
    "rolling_forecast",
]
