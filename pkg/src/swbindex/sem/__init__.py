"""Structural equation modelling: panel alignment, model syntax, ML fitting."""

from .fit import SemFit, discrepancy_gradient, fit_ml, ml_discrepancy, numerical_hessian, star_code
from .model import (
    BUILTIN_MODEL_TEXT,
    Parameter,
    SemError,
    SemModel,
    SemSyntaxError,
    SINGLE_INDICATOR_RESIDUAL,
    builtin_swb_model,
    parse_model,
    saturated_model,
    simulate_observations,
)
from .panel import (
    EconSeries,
    Panel,
    PanelError,
    build_panel,
    interpolate_quarterly_to_monthly,
    read_panel_csv,
    to_monthly,
    yearly_to_monthly,
)

__all__ = [
    "BUILTIN_MODEL_TEXT",
    "EconSeries",
    "Panel",
    "PanelError",
    "Parameter",
    "SemError",
    "SemFit",
    "SemModel",
    "SemSyntaxError",
    "SINGLE_INDICATOR_RESIDUAL",
    "build_panel",
    "builtin_swb_model",
    "discrepancy_gradient",
    "fit_ml",
    "interpolate_quarterly_to_monthly",
    "ml_discrepancy",
    "numerical_hessian",
    "parse_model",
    "read_panel_csv",
    "saturated_model",
    "simulate_observations",
    "star_code",
    "to_monthly",
    "yearly_to_monthly",
]
