"""Monitoring indicators and death forecasts built on fitted hazard surfaces.

Forecasting freezes the most recent hazard cross-section mu_bar(w) = mu(T, w),
rolls the standing cohorts forward day by day, and adds expert-scenario paths
for future admissions (C1) and for the outside/inside death ratio (C2):

    a_hat(T+s)   = max(0, r_hat * (1 + (C1 - 1) * s / h))
    g_tilde(T+s) = g_hat(T) * (1 + (C2 - 1) * s / h)

so C1 = C2 = 1 is pure persistence.  Total deaths follow as
deaths_in * (1 + g_tilde) on every forecast day.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Optional, Sequence, Tuple, Union

import numpy as np

from .hazard import HazardSurface
from .kernels import SmoothedCurve, local_linear_regress
from .missing_link import survival_matrix
from .panel import DailyPanel

DEFAULT_RATIO_BANDWIDTH = 14.0
DEFAULT_ADMISSION_BANDWIDTH = 14.0
RATIO_FLOOR = 0.5
DEFAULT_C2_GRID = np.round(np.arange(0.25, 4.0 + 1e-9, 0.05), 10)


@dataclass(frozen=True)
class RatioCurve:
    """Smoothed outside/inside death ratio g(t) on the observed day grid."""

    values: np.ndarray
    floor_applied: np.ndarray
    bandwidth_num: float
    bandwidth_den: float
    floor: float

    @property
    def last(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class ForecastScenario:
    """Cutoff day count, horizon and the two expert indicators."""

    cutoff: int
    horizon: int
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must cover at least one observed day")
        if self.horizon < 1:
            raise ValueError("forecast horizon must be at least 1 day")
        for name in ("c1", "c2"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0.0):
                raise ValueError(f"{name} must be a nonnegative finite number")


@dataclass(frozen=True)
class ForecastResult:
    scenario: ForecastScenario
    admissions: np.ndarray
    deaths_in: np.ndarray
    g_tilde: np.ndarray
    deaths_out: np.ndarray
    deaths_total: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "scenario": {
                "T": self.scenario.cutoff,
                "h": self.scenario.horizon,
                "c1": self.scenario.c1,
                "c2": self.scenario.c2,
            },
            "series": {
                "admissions": self.admissions.tolist(),
                "deaths_in": self.deaths_in.tolist(),
                "g_tilde": self.g_tilde.tolist(),
                "deaths_out": self.deaths_out.tolist(),
                "deaths_total": self.deaths_total.tolist(),
            },
        }

    def to_csv(self, dest: Union[str, Path, IO[str], None] = None) -> Optional[str]:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "day", "admissions", "deaths_in", "g_tilde", "deaths_out", "deaths_total"])
        for i in range(self.scenario.horizon):
            writer.writerow(
                [
                    i + 1,
                    self.scenario.cutoff + i,
                    repr(float(self.admissions[i])),
                    repr(float(self.deaths_in[i])),
                    repr(float(self.g_tilde[i])),
                    repr(float(self.deaths_out[i])),
                    repr(float(self.deaths_total[i])),
                ]
            )
        text = buf.getvalue()
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)  # type: ignore[union-attr]
            return None
        Path(dest).write_text(text, encoding="utf-8")
        return None


def estimate_ratio(
    panel: DailyPanel,
    bandwidth_num: float = DEFAULT_RATIO_BANDWIDTH,
    bandwidth_den: float = DEFAULT_RATIO_BANDWIDTH,
    floor: float = RATIO_FLOOR,
) -> RatioCurve:
    """Ratio of smoothed out-of-hospital to smoothed in-hospital daily deaths.

    The two series are smoothed separately (more robust than smoothing the
    raw daily ratio); the denominator is floored at ``floor`` deaths per day
    and flagged wherever the floor binds.
    """
    if panel.n_out is None:
        raise ValueError("panel has no out-of-hospital death series (n_out)")
    days = np.arange(panel.T, dtype=float)
    num = local_linear_regress(days, panel.n_out.astype(float), bandwidth_num, days).values
    den = local_linear_regress(days, panel.n4.astype(float), bandwidth_den, days).values
    floored = den < floor
    safe_den = np.maximum(den, floor)
    values = np.maximum(num, 0.0) / safe_den
    return RatioCurve(
        values=values,
        floor_applied=floored,
        bandwidth_num=bandwidth_num,
        bandwidth_den=bandwidth_den,
        floor=floor,
    )


def extrapolate_ratio(g_last: float, c2: float, horizon: int, step: int) -> float:
    """Linear indicator path: g_last * (1 + (c2 - 1) * step / horizon)."""
    if not 1 <= step <= horizon:
        raise ValueError(f"step {step} outside 1..{horizon}")
    return g_last * (1.0 + (c2 - 1.0) * (step / horizon))


def forecast_admissions(
    panel: DailyPanel,
    scenario: ForecastScenario,
    bandwidth: float = DEFAULT_ADMISSION_BANDWIDTH,
    override: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Daily admission path over the horizon.

    An explicit ``override`` path wins; otherwise the current smoothed
    admission level is bent by the C1 indicator, clipped at zero.
    """
    h = scenario.horizon
    if override is not None:
        path = np.asarray(override, dtype=float)
        if path.shape != (h,):
            raise ValueError(f"admissions override must have length {h}")
        if np.any(~np.isfinite(path)) or np.any(path < 0):
            raise ValueError("admissions override must be finite and nonnegative")
        return path
    days = np.arange(panel.T, dtype=float)
    level = local_linear_regress(days, panel.n2.astype(float), bandwidth, np.array([float(panel.T - 1)])).values[0]
    steps = np.arange(1, h + 1, dtype=float)
    return np.maximum(0.0, level * (1.0 + (scenario.c1 - 1.0) * steps / h))


def _standing_cohorts(surface_all: HazardSurface, panel: DailyPanel) -> np.ndarray:
    """End-of-cutoff hospital population decomposed by admission day.

    Cohort weights are admission counts times model survival through the last
    observed day, scaled to the observed end-of-day occupancy.
    """
    T = panel.T
    last = T - 1
    W = surface_all.window
    S = survival_matrix(surface_all, T)
    v = np.arange(T)
    k = last - v
    through_last = S[v, k] * (1.0 - surface_all.values[last, np.minimum(k, W)])
    weights = through_last * panel.n2.astype(float)
    occupancy_end = float(panel.occupancy()[last])
    if occupancy_end <= 0.0:
        return np.zeros(T)
    total = weights.sum()
    if total <= 0.0:
        # survival mass vanished but people remain: spread by admission counts
        admissions = panel.n2.astype(float)
        return admissions / admissions.sum() * occupancy_end
    return weights / total * occupancy_end


def forecast_in_hospital_deaths(
    surface_all: HazardSurface,
    surface_death: HazardSurface,
    panel: DailyPanel,
    scenario: ForecastScenario,
    admissions: np.ndarray,
) -> np.ndarray:
    """Expected in-hospital deaths per forecast day under frozen hazards.

    The last estimated hazard cross-section is held constant; standing
    cohorts are rolled forward and forecast admissions enter at duration
    zero.  Durations beyond the surface window reuse the last tracked cell.
    """
    if scenario.cutoff != panel.T:
        raise ValueError("scenario cutoff must match the fitted panel length")
    if len(admissions) != scenario.horizon:
        raise ValueError("admissions path length must match the horizon")
    T = panel.T
    last = T - 1
    W = surface_all.window
    mu_bar = surface_all.values[last, :]
    mu4_bar = surface_death.values[last, :]
    h = scenario.horizon
    cohorts = np.zeros(T + h)
    cohorts[:T] = _standing_cohorts(surface_all, panel)
    admit_day = np.arange(T + h)
    deaths = np.zeros(h)
    for s in range(1, h + 1):
        day = last + s
        cohorts[T + s - 1] = admissions[s - 1]
        active = admit_day <= day
        dur = np.minimum(day - admit_day[active], W)
        deaths[s - 1] = float(np.dot(cohorts[active], mu4_bar[dur]))
        cohorts[active] *= 1.0 - mu_bar[dur]
    return deaths


def forecast_total_deaths(
    deaths_in: np.ndarray,
    ratio: RatioCurve,
    scenario: ForecastScenario,
    admissions: Optional[np.ndarray] = None,
) -> ForecastResult:
    """Assemble the full forecast: total deaths = deaths_in * (1 + g_tilde)."""
    h = scenario.horizon
    deaths_in = np.asarray(deaths_in, dtype=float)
    if deaths_in.shape != (h,):
        raise ValueError(f"deaths_in must have length {h}")
    g_last = ratio.last
    steps = np.arange(1, h + 1)
    g_tilde = np.array([extrapolate_ratio(g_last, scenario.c2, h, int(s)) for s in steps])
    deaths_out = deaths_in * g_tilde
    deaths_total = deaths_in * (1.0 + g_tilde)
    return ForecastResult(
        scenario=scenario,
        admissions=np.zeros(h) if admissions is None else np.asarray(admissions, dtype=float),
        deaths_in=deaths_in,
        g_tilde=g_tilde,
        deaths_out=deaths_out,
        deaths_total=deaths_total,
    )


def run_forecast(
    fitted,
    scenario: ForecastScenario,
    admissions_override: Optional[Sequence[float]] = None,
) -> ForecastResult:
    """Full forecast chain against a fitted model (see ``pandemon.model``)."""
    admissions = forecast_admissions(fitted.panel, scenario, override=admissions_override)
    deaths_in = forecast_in_hospital_deaths(
        fitted.surface_all, fitted.surface_death, fitted.panel, scenario, admissions
    )
    return forecast_total_deaths(deaths_in, fitted.ratio(), scenario, admissions=admissions)


@dataclass(frozen=True)
class C2SearchResult:
    c2_star: float
    grid: np.ndarray
    sse: np.ndarray


def optimize_c2(
    fitted,
    panel_full: DailyPanel,
    horizon: int,
    c2_grid: Optional[Sequence[float]] = None,
    c1: float = 1.0,
    admissions_override: Optional[Sequence[float]] = None,
    cumulative: bool = False,
) -> C2SearchResult:
    """Pick the C2 value whose forecast best matches held-out observed totals.

    ``fitted`` was fit on the first ``fitted.panel.T`` days of ``panel_full``;
    observed totals on the holdout are n4 + n_out.  The error is the sum of
    squared daily (or cumulative, with ``cumulative=True``) differences.
    """
    cutoff = fitted.panel.T
    if panel_full.n_out is None:
        raise ValueError("holdout comparison needs the n_out series")
    if panel_full.T < cutoff + horizon:
        raise ValueError(f"panel has {panel_full.T} days; need {cutoff + horizon} for this backtest")
    observed = (panel_full.n4[cutoff : cutoff + horizon] + panel_full.n_out[cutoff : cutoff + horizon]).astype(float)
    scenario = ForecastScenario(cutoff=cutoff, horizon=horizon, c1=c1, c2=1.0)
    admissions = forecast_admissions(fitted.panel, scenario, override=admissions_override)
    deaths_in = forecast_in_hospital_deaths(
        fitted.surface_all, fitted.surface_death, fitted.panel, scenario, admissions
    )
    g_last = fitted.ratio().last
    steps = np.arange(1, horizon + 1, dtype=float)
    grid = np.asarray(c2_grid if c2_grid is not None else DEFAULT_C2_GRID, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("c2 grid must be a nonempty 1-d array")
    sse = np.empty(grid.size)
    target = np.cumsum(observed) if cumulative else observed
    for i, c2 in enumerate(grid):
        g_tilde = g_last * (1.0 + (c2 - 1.0) * steps / horizon)
        total = deaths_in * (1.0 + g_tilde)
        series = np.cumsum(total) if cumulative else total
        sse[i] = float(np.sum((series - target) ** 2))
    best = int(np.argmin(sse))
    return C2SearchResult(c2_star=float(grid[best]), grid=grid, sse=sse)


# ---------------------------------------------------------------------------
# stay-length indicators


def median_stay(surface: HazardSurface, s: int) -> Optional[int]:
    """Smallest d with P(stay <= d days | admitted day s) >= 1/2, None if unreached.

    Walks the cohort diagonal mu(s+w, w); masked cells act as zero hazard and
    the walk stops at the surface window or the end of the observed grid.
    """
    T = surface.n_days
    if not 0 <= s < T:
        raise ValueError(f"admission day {s} outside the panel")
    survive = 1.0
    w_max = min(surface.window, T - 1 - s)
    for d in range(w_max + 1):
        survive *= 1.0 - surface.values[s + d, d]
        if 1.0 - survive >= 0.5:
            return d
    return None


@dataclass(frozen=True)
class ExitSplit:
    """Eventual-outcome probabilities for one admission cohort, plus the mass
    still hospitalized when the duration window truncates the sum."""

    recovery: float
    death: float
    truncated_mass: float

    def for_cause(self, cause: str) -> float:
        if cause == "recovery":
            return self.recovery
        if cause == "death":
            return self.death
        raise ValueError("cause must be 'recovery' or 'death'")


def exit_probability(
    surface_recovery: HazardSurface,
    surface_death: HazardSurface,
    s: int,
    days_in: int = 0,
) -> ExitSplit:
    """Probability of eventually leaving by each cause, given d days already stayed.

    Sums survival-weighted daily exit probabilities along the cohort diagonal
    from duration ``days_in`` to the surface window; the unresolved survival
    mass is reported rather than renormalised away.
    """
    T = surface_recovery.n_days
    if not 0 <= s < T:
        raise ValueError(f"admission day {s} outside the panel")
    if days_in < 0:
        raise ValueError("days_in must be nonnegative")
    w_max = min(surface_recovery.window, T - 1 - s)
    rec = 0.0
    death = 0.0
    survive = 1.0
    for w in range(days_in, w_max + 1):
        p3 = surface_recovery.values[s + w, w]
        p4 = surface_death.values[s + w, w]
        rec += survive * p3
        death += survive * p4
        survive *= 1.0 - (p3 + p4)
    return ExitSplit(recovery=rec, death=death, truncated_mass=survive)
