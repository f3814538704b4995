"""Hazard estimation when only marginal daily series are observed.

Published data give admissions per day and exits per day, but not the join
between admission cohort and exit day.  The join is reconstructed by a fixed
point: given a working hazard surface, survival odds allocate each day's
exits and exposure across admission cohorts; refitting the surface on the
allocated grid gives the next iterate.

Allocation of exits on day u across admission days v:

    N_hat(u, v) = S(u, u-v) mu(u, u-v) n2(v) / sum_w S(u, u-w) mu(u, u-w) n2(w) * exits(u)

and of person-days at risk:

    Y_hat(u, v) = S(u, u-v) n2(v) / sum_w S(u, u-w) n2(w) * at_risk(u)

with S the survival implied by the current surface.  Rows whose allocation
denominator vanishes while carrying mass are zeroed and flagged.  Iteration
starts from the constant hazard total-exits / total-person-days and stops on
a sup-norm relative change below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .hazard import HazardSurface, constant_surface, estimate_single_surface, surface_components, duration_band, _clipped_ratio, _allocate_causes
from .kernels import Bandwidths
from .panel import DailyPanel, default_window

# Allocation rows with weight mass at or below this are considered empty.
EPS_DENOM = 1e-12


@dataclass(frozen=True)
class IterationOptions:
    """Stopping rules for the fixed-point iteration."""

    tol: float = 1e-4
    max_iter: int = 50
    delta: float = 1e-6  # floor in the relative-change denominator

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.delta <= 0:
            raise ValueError("tol and delta must be positive, max_iter at least 1")


@dataclass(frozen=True)
class ImputedGrid:
    """Allocated occurrence and exposure matrices for one iterate."""

    n_hat: np.ndarray
    y_hat: np.ndarray
    window: int
    iteration: int

    @property
    def n_days(self) -> int:
        return self.y_hat.shape[0]

    # duck-typed pairing with EventGrid for bandwidth selection
    @property
    def exposure(self) -> np.ndarray:
        return self.y_hat

    @property
    def occurrences(self) -> np.ndarray:
        return self.n_hat


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    sup_rel_change: List[float]
    converged: bool
    initial_hazard: float
    flagged_rows: List[int]
    bandwidths: Bandwidths

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "sup_rel_change": [float(x) for x in self.sup_rel_change],
            "converged": self.converged,
            "initial_hazard": self.initial_hazard,
            "flagged_rows": list(self.flagged_rows),
            "b1": self.bandwidths.b1,
            "b2": self.bandwidths.b2,
        }


@dataclass(frozen=True)
class MissingLinkFit:
    surface: HazardSurface
    grid: ImputedGrid
    diagnostics: FitDiagnostics


def survival_from_hazard(surface: HazardSurface, s: int, t: int) -> float:
    """P(still hospitalized on day t | admitted day s) under ``surface``.

    The product runs over the days s .. t-1 at durations 0 .. t-s-1; masked
    cells act as zero hazard, durations beyond the surface window reuse the
    last tracked duration.
    """
    if t < s:
        raise ValueError("t must not precede the admission day s")
    out = 1.0
    W = surface.window
    T = surface.n_days
    for w in range(t - s):
        day = s + w
        if day >= T:
            break
        out *= 1.0 - surface.values[day, min(w, W)]
    return out


def survival_matrix(surface: HazardSurface, n_days: int) -> np.ndarray:
    """S[v, k] = survival through day v+k-1 for the cohort admitted on day v."""
    W = surface.window
    v = np.arange(n_days)[:, None]
    k = np.arange(n_days)[None, :]
    day = v + k
    inside = day <= n_days - 1
    haz = np.where(inside, surface.values[np.minimum(day, n_days - 1), np.minimum(k, W)], 0.0)
    factors = 1.0 - haz
    S = np.ones((n_days, n_days))
    if n_days > 1:
        S[:, 1:] = np.cumprod(factors[:, :-1], axis=1)
    return S


def _allocation_weights(panel: DailyPanel, surface: HazardSurface) -> Tuple[np.ndarray, np.ndarray]:
    """Per-(day, cohort) weights proportional to survival (and hazard) odds."""
    T = panel.T
    S = survival_matrix(surface, T)
    u = np.arange(T)[:, None]
    v = np.arange(T)[None, :]
    dur = u - v
    lower = dur >= 0
    dur_c = np.clip(dur, 0, T - 1)
    s_uv = np.where(lower, S[np.broadcast_to(v, (T, T)), dur_c], 0.0)
    mu_uv = np.where(lower, surface.values[np.broadcast_to(u, (T, T)), np.minimum(dur_c, surface.window)], 0.0)
    w_y = s_uv * panel.n2[None, :].astype(float)
    w_n = w_y * mu_uv
    return w_n, w_y


def _allocate_rows(weights: np.ndarray, mass: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    denom = weights.sum(axis=1)
    usable = denom > EPS_DENOM
    flagged = [int(i) for i in np.nonzero(~usable & (mass > 0))[0]]
    scale = np.where(usable, mass / np.where(usable, denom, 1.0), 0.0)
    return weights * scale[:, None], flagged


def impute_occurrences(panel: DailyPanel, surface: HazardSurface) -> Tuple[np.ndarray, List[int]]:
    """Allocate each day's exits across admission cohorts; conserves row sums."""
    w_n, _ = _allocation_weights(panel, surface)
    return _allocate_rows(w_n, panel.exits.astype(float))


def impute_exposure(panel: DailyPanel, surface: HazardSurface) -> Tuple[np.ndarray, List[int]]:
    """Allocate each day's at-risk count across admission cohorts."""
    _, w_y = _allocation_weights(panel, surface)
    return _allocate_rows(w_y, panel.at_risk().astype(float))


def impute_grid(panel: DailyPanel, surface: HazardSurface, iteration: int) -> Tuple[ImputedGrid, List[int]]:
    w_n, w_y = _allocation_weights(panel, surface)
    n_hat, flag_n = _allocate_rows(w_n, panel.exits.astype(float))
    y_hat, flag_y = _allocate_rows(w_y, panel.at_risk().astype(float))
    grid = ImputedGrid(n_hat=n_hat, y_hat=y_hat, window=surface.window, iteration=iteration)
    return grid, sorted(set(flag_n) | set(flag_y))


def initial_hazard_guess(panel: DailyPanel) -> float:
    """Constant starting hazard: total exits over total person-days at risk."""
    total_risk = float(panel.at_risk().sum())
    if total_risk <= 0.0:
        return 0.0
    return float(panel.exits.sum()) / total_risk


def fit_missing_link(
    panel: DailyPanel,
    bands: Bandwidths,
    options: Optional[IterationOptions] = None,
    window: Optional[int] = None,
) -> MissingLinkFit:
    """Fixed-point hazard fit from marginal daily series.

    Returns the final surface together with the imputed grid that produced it
    (re-estimating on ``fit.grid`` reproduces ``fit.surface`` exactly) and
    per-iteration diagnostics.  Non-convergence within ``max_iter`` is
    reported, not raised.
    """
    opts = options or IterationOptions()
    W = default_window(panel.T) if window is None else window
    surface = constant_surface(initial_hazard_guess(panel), panel.T, W)
    history: List[float] = []
    converged = False
    grid: Optional[ImputedGrid] = None
    flagged: List[int] = []
    iteration = 0
    for iteration in range(1, opts.max_iter + 1):
        grid, flagged = impute_grid(panel, surface, iteration)
        new_surface = estimate_single_surface(grid.y_hat, grid.n_hat, bands, W)
        # relative change needs the previous value: compare where both defined
        watched = new_surface.defined & surface.defined
        if watched.any():
            change = np.abs(new_surface.values - surface.values) / (surface.values + opts.delta)
            sup = float(change[watched].max())
        else:
            sup = 0.0
        history.append(sup)
        surface = new_surface
        if sup < opts.tol:
            converged = True
            break
    assert grid is not None
    diag = FitDiagnostics(
        iterations=iteration,
        sup_rel_change=history,
        converged=converged,
        initial_hazard=initial_hazard_guess(panel),
        flagged_rows=flagged,
        bandwidths=bands,
    )
    return MissingLinkFit(surface=surface, grid=grid, diagnostics=diag)


def split_causes(
    panel: DailyPanel,
    fit: MissingLinkFit,
) -> Tuple[HazardSurface, HazardSurface]:
    """Cause-specific surfaces (recovery, death) from a marginal-data fit.

    Each day's allocated exits are split between causes in the observed daily
    proportions, then smoothed against the shared exposure denominator.  The
    two surfaces sum to ``fit.surface`` exactly.
    """
    n_hat = fit.grid.n_hat
    exits = panel.exits.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        death_frac = np.where(exits > 0, panel.n4 / np.where(exits > 0, exits, 1.0), 0.0)
    n4_hat = n_hat * death_frac[:, None]
    n3_hat = n_hat - n4_hat
    W = fit.surface.window
    bands = fit.surface.bandwidths
    assert bands is not None
    e_band = duration_band(fit.grid.y_hat, W)
    comp = surface_components(e_band, [duration_band(n_hat, W), duration_band(n3_hat, W), duration_band(n4_hat, W)], bands)
    total = _clipped_ratio(comp.numerators[0], comp)
    mu_rec, mu_death = _allocate_causes(total, comp.numerators[1], comp.numerators[2], comp)
    make = lambda vals, cause: HazardSurface(
        values=np.where(comp.defined, vals, 0.0),
        defined=comp.defined.copy(),
        cause=cause,
        bandwidths=bands,
        window=W,
    )
    return make(mu_rec, "recovery"), make(mu_death, "death")
