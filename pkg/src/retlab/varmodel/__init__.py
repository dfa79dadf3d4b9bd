"""Unit-root testing and vector-autoregression analysis."""

from .unitroot import UnitRootReport, unit_root_tests
from .var import (
    FevdResult,
    ForecastPath,
    GrangerResult,
    IrfResult,
    VarFit,
    fevd,
    fit_var,
    forecast,
    granger_causality,
    irf,
    select_lag,
)

__all__ = [
    "FevdResult",
    "ForecastPath",
    "GrangerResult",
    "IrfResult",
    "UnitRootReport",
    "VarFit",
    "fevd",
    "fit_var",
    "forecast",
    "granger_causality",
    "irf",
    "select_lag",
    "unit_root_tests",
]
