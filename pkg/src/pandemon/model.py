"""End-to-end fitting pipeline and on-disk model artifacts.

A fitted model bundles the panel it was fit on, the three hazard surfaces,
the smoothed death-location ratio and the fit diagnostics.  Persistence is a
plain directory of CSV/JSON exports so artifacts stay diffable and
inspectable; fitting the same panel with the same options twice writes
byte-identical surface files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .bandwidth import CvResult, select_bandwidths
from .forecast import RatioCurve, estimate_ratio
from .hazard import HazardSurface, constant_surface, surface_from_json_dict
from .kernels import Bandwidths
from .missing_link import (
    FitDiagnostics,
    ImputedGrid,
    IterationOptions,
    MissingLinkFit,
    fit_missing_link,
    impute_grid,
    initial_hazard_guess,
    split_causes,
)
from .panel import DailyPanel, default_window, emit_csv, ingest_csv

BandwidthSpec = Union[str, Bandwidths, tuple, None]


@dataclass(frozen=True)
class FittedModel:
    panel: DailyPanel
    window: int
    bandwidths: Bandwidths
    surface_all: HazardSurface
    surface_recovery: HazardSurface
    surface_death: HazardSurface
    diagnostics: FitDiagnostics
    grid: Optional[ImputedGrid] = None
    cv: Optional[CvResult] = None

    def surface(self, cause: str) -> HazardSurface:
        return {
            "all": self.surface_all,
            "recovery": self.surface_recovery,
            "death": self.surface_death,
        }[cause]

    def ratio(self, bandwidth_num: Optional[float] = None, bandwidth_den: Optional[float] = None) -> RatioCurve:
        kwargs = {}
        if bandwidth_num is not None:
            kwargs["bandwidth_num"] = bandwidth_num
        if bandwidth_den is not None:
            kwargs["bandwidth_den"] = bandwidth_den
        return estimate_ratio(self.panel, **kwargs)


def _resolve_bandwidths(spec: BandwidthSpec, panel: DailyPanel, window: int, candidates) -> tuple[Bandwidths, Optional[CvResult]]:
    if isinstance(spec, Bandwidths):
        return spec, None
    if isinstance(spec, tuple):
        return Bandwidths(float(spec[0]), float(spec[1])), None
    if spec is None or spec == "auto":
        # select once on the constant-hazard starting allocation, then freeze
        start = constant_surface(initial_hazard_guess(panel), panel.T, window)
        grid0, _ = impute_grid(panel, start, iteration=0)
        cv = select_bandwidths(grid0, candidates=candidates)
        return cv.chosen, cv
    raise ValueError(f"unrecognized bandwidth spec {spec!r}")


def fit_panel(
    panel: DailyPanel,
    bandwidths: BandwidthSpec = "auto",
    window: Optional[int] = None,
    options: Optional[IterationOptions] = None,
    candidates: Optional[Sequence[float]] = None,
) -> FittedModel:
    """Fit hazard surfaces from a marginal daily panel.

    ``bandwidths`` is "auto" (cross-validated on the initial allocation and
    then frozen), a (b1, b2) pair, or a :class:`Bandwidths`.
    """
    W = default_window(panel.T) if window is None else window
    bands, cv = _resolve_bandwidths(bandwidths, panel, W, candidates)
    fit: MissingLinkFit = fit_missing_link(panel, bands, options=options, window=W)
    rec, death = split_causes(panel, fit)
    return FittedModel(
        panel=panel,
        window=W,
        bandwidths=bands,
        surface_all=fit.surface,
        surface_recovery=rec,
        surface_death=death,
        diagnostics=fit.diagnostics,
        grid=fit.grid,
        cv=cv,
    )


# ---------------------------------------------------------------------------
# directory persistence


def save_model(model: FittedModel, directory: Union[str, Path]) -> Path:
    """Write a fitted model as a directory of CSV/JSON exports."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    emit_csv(model.panel, root / "panel.csv")
    for cause in ("all", "recovery", "death"):
        surf = model.surface(cause)
        (root / f"surface_{cause}.json").write_text(
            json.dumps(surf.to_json_dict(), sort_keys=True), encoding="utf-8"
        )
        surf.to_csv(root / f"surface_{cause}.csv")
    (root / "diagnostics.json").write_text(
        json.dumps(model.diagnostics.to_json_dict(), sort_keys=True, indent=2), encoding="utf-8"
    )
    meta = {
        "window": model.window,
        "b1": model.bandwidths.b1,
        "b2": model.bandwidths.b2,
        "label": model.panel.label,
        "start_date": model.panel.start_date.isoformat(),
        "n_days": model.panel.T,
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2), encoding="utf-8")
    if model.cv is not None:
        (root / "cv_trace.csv").write_text(model.cv.to_csv(), encoding="utf-8")
    return root


def load_model(directory: Union[str, Path]) -> FittedModel:
    """Rehydrate a fitted model saved by :func:`save_model`.

    The imputed grid is not persisted; everything forecasting needs (panel,
    surfaces, diagnostics) is restored.
    """
    root = Path(directory)
    meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    panel = ingest_csv(root / "panel.csv", label=meta.get("label"))
    surfaces = {}
    for cause in ("all", "recovery", "death"):
        payload = json.loads((root / f"surface_{cause}.json").read_text(encoding="utf-8"))
        surfaces[cause] = surface_from_json_dict(payload)
    diag_raw = json.loads((root / "diagnostics.json").read_text(encoding="utf-8"))
    bands = Bandwidths(float(meta["b1"]), float(meta["b2"]))
    diagnostics = FitDiagnostics(
        iterations=int(diag_raw["iterations"]),
        sup_rel_change=[float(x) for x in diag_raw["sup_rel_change"]],
        converged=bool(diag_raw["converged"]),
        initial_hazard=float(diag_raw["initial_hazard"]),
        flagged_rows=[int(r) for r in diag_raw["flagged_rows"]],
        bandwidths=bands,
    )
    return FittedModel(
        panel=panel,
        window=int(meta["window"]),
        bandwidths=bands,
        surface_all=surfaces["all"],
        surface_recovery=surfaces["recovery"],
        surface_death=surfaces["death"],
        diagnostics=diagnostics,
    )
