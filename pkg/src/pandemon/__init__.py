"""Hazard-surface estimation for hospital stay data observed only in aggregate.

The package turns daily count panels (admissions, recoveries, deaths) into
calendar- and duration-dependent exit hazards, even when individual stays are
never observed, and builds monitoring indicators and death forecasts on top.
"""

from __future__ import annotations

from .bandwidth import DEFAULT_GRID, CvResult, NoUsableBandwidthError, cv_score, select_bandwidths
from .forecast import (
    C2SearchResult,
    ExitSplit,
    ForecastResult,
    ForecastScenario,
    RatioCurve,
    estimate_ratio,
    exit_probability,
    extrapolate_ratio,
    forecast_admissions,
    forecast_in_hospital_deaths,
    forecast_total_deaths,
    median_stay,
    optimize_c2,
    run_forecast,
)
from .hazard import (
    EventGrid,
    GridValidationError,
    HazardSurface,
    build_event_grid_full,
    constant_surface,
    duration_band,
    estimate_hazard,
    estimate_surfaces,
    surface_from_json_dict,
)
from .kernels import Bandwidths, epanechnikov, local_linear_regress
from .missing_link import (
    FitDiagnostics,
    ImputedGrid,
    IterationOptions,
    MissingLinkFit,
    fit_missing_link,
    impute_grid,
    initial_hazard_guess,
    split_causes,
    survival_from_hazard,
    survival_matrix,
)
from .model import FittedModel, fit_panel, load_model, save_model
from .panel import (
    DailyPanel,
    PanelValidationError,
    TimeGridConvention,
    default_window,
    emit_csv,
    ingest_csv,
)
from .simulate import (
    SimulatedData,
    StudyError,
    StudyReport,
    TrueModel,
    ise,
    run_study,
    simulate_cohorts,
    true_hazard,
    true_surface,
)

__version__ = "0.1.0"

__all__ = [
    "Bandwidths",
    "C2SearchResult",
    "CvResult",
    "DEFAULT_GRID",
    "DailyPanel",
    "EventGrid",
    "ExitSplit",
    "FitDiagnostics",
    "FittedModel",
    "ForecastResult",
    "ForecastScenario",
    "GridValidationError",
    "HazardSurface",
    "ImputedGrid",
    "IterationOptions",
    "MissingLinkFit",
    "NoUsableBandwidthError",
    "PanelValidationError",
    "RatioCurve",
    "SimulatedData",
    "StudyError",
    "StudyReport",
    "TimeGridConvention",
    "TrueModel",
    "build_event_grid_full",
    "constant_surface",
    "cv_score",
    "default_window",
    "duration_band",
    "emit_csv",
    "epanechnikov",
    "estimate_hazard",
    "estimate_ratio",
    "estimate_surfaces",
    "exit_probability",
    "extrapolate_ratio",
    "fit_missing_link",
    "fit_panel",
    "forecast_admissions",
    "forecast_in_hospital_deaths",
    "forecast_total_deaths",
    "impute_grid",
    "ingest_csv",
    "initial_hazard_guess",
    "ise",
    "load_model",
    "local_linear_regress",
    "median_stay",
    "optimize_c2",
    "run_forecast",
    "run_study",
    "save_model",
    "select_bandwidths",
    "simulate_cohorts",
    "split_causes",
    "surface_from_json_dict",
    "survival_from_hazard",
    "survival_matrix",
    "true_hazard",
    "true_surface",
]
