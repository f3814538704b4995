"""JSON HTTP facade over the fitting, indicator and forecasting pipeline.

Datasets and models live in process memory behind monotonically increasing
ids; model artifacts can additionally be exported to disk through the CLI.
Malformed inputs return 400 with a field path, unknown ids return 404.
"""

from __future__ import annotations

import itertools
import os
import threading
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .forecast import ForecastScenario, estimate_ratio, exit_probability, median_stay, optimize_c2, run_forecast
from .kernels import Bandwidths
from .model import FittedModel, fit_panel
from .panel import DailyPanel, PanelValidationError, ingest_csv

DEFAULT_PORT = 8321
PORT_ENV_VAR = "PANDEMON_PORT"
FIT_TIMEOUT_ENV_VAR = "PANDEMON_FIT_TIMEOUT"
DEFAULT_FIT_TIMEOUT = 300.0


@dataclass
class ServiceState:
    datasets: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    dataset_counter: "itertools.count" = field(default_factory=lambda: itertools.count(1))
    model_counter: "itertools.count" = field(default_factory=lambda: itertools.count(1))


class FitRequest(BaseModel):
    b1: Optional[float] = Field(default=None, ge=1.0)
    b2: Optional[float] = Field(default=None, ge=1.0)
    window: Optional[int] = Field(default=None, ge=1)


class ForecastRequest(BaseModel):
    horizon: int = Field(ge=1, le=365)
    c1: float = Field(default=1.0, ge=0.0)
    c2: float = Field(default=1.0, ge=0.0)
    admissions_override: Optional[list[float]] = None


class BacktestRequest(BaseModel):
    cutoff: int = Field(ge=2)
    horizon: int = Field(ge=1, le=365)
    c2_grid: Optional[list[float]] = None
    c1: float = Field(default=1.0, ge=0.0)
    cumulative: bool = False


def _fit_timeout() -> float:
    try:
        return float(os.environ.get(FIT_TIMEOUT_ENV_VAR, DEFAULT_FIT_TIMEOUT))
    except ValueError:
        return DEFAULT_FIT_TIMEOUT


def create_app(state: Optional[ServiceState] = None, static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="pandemon", version="0.1.0")
    st = state or ServiceState()
    app.state.store = st
    executor = ThreadPoolExecutor(max_workers=2)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        detail = [
            {"field": ".".join(str(p) for p in err.get("loc", [])), "message": err.get("msg", "invalid")}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    def _get_dataset(dataset_id: str) -> DailyPanel:
        panel = st.datasets.get(dataset_id)
        if panel is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset {dataset_id!r}")
        return panel

    def _get_model(model_id: str) -> dict:
        entry = st.models.get(model_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown model {model_id!r}")
        return entry

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/datasets")
    async def upload_dataset(request: Request):
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty request body; expected CSV")
        try:
            panel = ingest_csv(body)
        except PanelValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        with st.lock:
            dataset_id = f"ds-{next(st.dataset_counter)}"
            st.datasets[dataset_id] = panel
        return {"dataset_id": dataset_id, "n_days": panel.T, "start_date": panel.start_date.isoformat()}

    @app.post("/api/datasets/{dataset_id}/fit")
    def fit_dataset(dataset_id: str, req: FitRequest):
        panel = _get_dataset(dataset_id)
        if (req.b1 is None) != (req.b2 is None):
            raise HTTPException(status_code=400, detail="b1 and b2 must be supplied together")
        bandwidths = "auto" if req.b1 is None else Bandwidths(req.b1, req.b2)
        future = executor.submit(fit_panel, panel, bandwidths, req.window)
        try:
            model = future.result(timeout=_fit_timeout())
        except FutureTimeout:
            raise HTTPException(status_code=503, detail="fit timed out") from None
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        with st.lock:
            model_id = f"m-{next(st.model_counter)}"
            st.models[model_id] = {"model": model, "dataset_id": dataset_id}
        return {
            "model_id": model_id,
            "dataset_id": dataset_id,
            "b1": model.bandwidths.b1,
            "b2": model.bandwidths.b2,
            "window": model.window,
            "diagnostics": model.diagnostics.to_json_dict(),
        }

    @app.get("/api/models/{model_id}/hazard")
    def hazard_slices(model_id: str, cause: str = "all", dates: str = ""):
        entry = _get_model(model_id)
        model: FittedModel = entry["model"]
        if cause not in ("all", "recovery", "death"):
            raise HTTPException(status_code=400, detail="cause must be all, recovery or death")
        surf = model.surface(cause)
        panel = model.panel
        slices = []
        for token in [t for t in dates.split(",") if t.strip()]:
            try:
                day = panel.day_index(date.fromisoformat(token.strip()))
            except ValueError:
                raise HTTPException(status_code=400, detail=f"malformed date {token!r}") from None
            if not 0 <= day < panel.T:
                raise HTTPException(status_code=400, detail=f"date {token} outside the observed panel")
            w, values, defined = surf.cohort_slice(day)
            slices.append(
                {
                    "date": token.strip(),
                    "admission_day": day,
                    "points": [
                        {"w": int(wi), "value": float(vi), "defined": bool(di)}
                        for wi, vi, di in zip(w, values, defined)
                    ],
                }
            )
        return {"cause": cause, "b1": model.bandwidths.b1, "b2": model.bandwidths.b2, "slices": slices}

    @app.get("/api/models/{model_id}/indicators")
    def indicators(model_id: str, type: str = "median", cause: str = "death", days_in: int = 0):
        entry = _get_model(model_id)
        model: FittedModel = entry["model"]
        panel = model.panel
        series = []
        if type == "median":
            for s in range(panel.T):
                value = median_stay(model.surface_all, s)
                series.append(
                    {
                        "day": s,
                        "date": panel.date_of(s).isoformat(),
                        "value": value,
                        "defined": value is not None,
                    }
                )
            return {"type": "median", "series": series}
        if type == "exitprob":
            if cause not in ("recovery", "death"):
                raise HTTPException(status_code=400, detail="cause must be recovery or death")
            if days_in < 0:
                raise HTTPException(status_code=400, detail="days_in must be nonnegative")
            for s in range(panel.T):
                split = exit_probability(model.surface_recovery, model.surface_death, s, days_in=days_in)
                series.append(
                    {
                        "day": s,
                        "date": panel.date_of(s).isoformat(),
                        "value": split.for_cause(cause),
                        "truncated_mass": split.truncated_mass,
                        "defined": True,
                    }
                )
            return {"type": "exitprob", "cause": cause, "days_in": days_in, "series": series}
        raise HTTPException(status_code=400, detail="type must be 'median' or 'exitprob'")

    @app.get("/api/models/{model_id}/ratio")
    def ratio(model_id: str):
        entry = _get_model(model_id)
        model: FittedModel = entry["model"]
        panel = model.panel
        try:
            curve = model.ratio()
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        points = []
        for day in range(panel.T):
            raw = None
            if panel.n_out is not None and panel.n4[day] > 0:
                raw = float(panel.n_out[day] / panel.n4[day])
            points.append(
                {
                    "day": day,
                    "date": panel.date_of(day).isoformat(),
                    "g_hat": float(curve.values[day]),
                    "raw_ratio": raw,
                    "floored": bool(curve.floor_applied[day]),
                }
            )
        return {"floor": curve.floor, "series": points}

    @app.post("/api/models/{model_id}/forecast")
    def forecast(model_id: str, req: ForecastRequest):
        entry = _get_model(model_id)
        model: FittedModel = entry["model"]
        scenario = ForecastScenario(cutoff=model.panel.T, horizon=req.horizon, c1=req.c1, c2=req.c2)
        try:
            result = run_forecast(model, scenario, admissions_override=req.admissions_override)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        payload = result.to_json_dict()
        payload["start_date"] = (model.panel.start_date + timedelta(days=model.panel.T)).isoformat()
        return payload

    @app.post("/api/models/{model_id}/backtest")
    def backtest(model_id: str, req: BacktestRequest):
        entry = _get_model(model_id)
        model: FittedModel = entry["model"]
        panel_full = st.datasets.get(entry["dataset_id"], model.panel)
        if req.cutoff + req.horizon > panel_full.T:
            raise HTTPException(
                status_code=400,
                detail=f"cutoff {req.cutoff} + horizon {req.horizon} exceeds the {panel_full.T}-day panel",
            )
        truncated = panel_full.truncated(req.cutoff)
        future = executor.submit(fit_panel, truncated, model.bandwidths, model.window)
        try:
            refit = future.result(timeout=_fit_timeout())
        except FutureTimeout:
            raise HTTPException(status_code=503, detail="backtest fit timed out") from None
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        try:
            search = optimize_c2(
                refit,
                panel_full,
                horizon=req.horizon,
                c2_grid=req.c2_grid,
                c1=req.c1,
                cumulative=req.cumulative,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "c2_star": search.c2_star,
            "cutoff": req.cutoff,
            "horizon": req.horizon,
            "sse_curve": [{"c2": float(c), "sse": float(s)} for c, s in zip(search.grid, search.sse)],
        }

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")

    return app


def resolve_port(explicit: Optional[int] = None) -> int:
    """Port precedence: explicit flag, then PANDEMON_PORT, then the default."""
    if explicit is not None:
        return explicit
    env = os.environ.get(PORT_ENV_VAR)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{PORT_ENV_VAR} must be an integer, got {env!r}") from None
    return DEFAULT_PORT
