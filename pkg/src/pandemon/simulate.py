"""Synthetic pandemic generator and the estimator error study.

Arrivals follow a nonhomogeneous Poisson process with piecewise-constant
daily rates.  The planted exit hazard is a product of a calendar wave and two
cause-specific duration shapes built from Beta densities rescaled to the
simulation span (evaluated at cell centers, which also clips the endpoint
singularity of the Beta(1/2, 1/2) term):

    mu_j(t, w) = calendar(t) * shape_j(w) * hazard_scale

Competing risks are drawn day by day: each standing cohort first draws its
exits binomially from the all-cause probability, then splits them between
causes by their conditional share.  Stays still open at the end of the window
are censored records.

The error study fits every replicate twice, from full stay records and from
the marginal panel alone, and reports squared-error decompositions per
method, cause and sample size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import beta as beta_fn

from .bandwidth import select_bandwidths
from .hazard import EventGrid, HazardSurface, build_event_grid_full, constant_surface, estimate_surfaces
from .kernels import Bandwidths
from .missing_link import IterationOptions, fit_missing_link, impute_grid, initial_hazard_guess, split_causes
from .panel import DailyPanel, default_window

SIM_START = date(2020, 3, 1)  # arbitrary anchor for simulated panels

SeedLike = Union[int, np.random.SeedSequence]


def _rng(seed: SeedLike) -> np.random.Generator:
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seq))


def _beta_density(x: np.ndarray, a: float, b: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x ** (a - 1.0) * (1.0 - x) ** (b - 1.0) / beta_fn(a, b)


class ModelValidationError(ValueError):
    """A planted model produces impossible daily exit probabilities."""


@dataclass(frozen=True)
class TrueModel:
    """Planted data-generating process on a T_sim-day grid."""

    T_sim: int
    arrival_intensity: np.ndarray
    calendar_factor: Callable[[np.ndarray], np.ndarray]
    duration_factor_death: Callable[[np.ndarray], np.ndarray]
    duration_factor_recovery: Callable[[np.ndarray], np.ndarray]
    hazard_scale: float = 1.0
    window: Optional[int] = None
    outside_ratio: Union[float, Callable[[np.ndarray], np.ndarray]] = 0.0

    def __post_init__(self):
        intensity = np.asarray(self.arrival_intensity, dtype=float)
        if intensity.shape != (self.T_sim,) or np.any(intensity < 0) or not np.all(np.isfinite(intensity)):
            raise ModelValidationError("arrival intensity must be a nonnegative array of length T_sim")
        object.__setattr__(self, "arrival_intensity", intensity)
        if self.hazard_scale <= 0:
            raise ModelValidationError("hazard_scale must be positive")
        W = default_window(self.T_sim) if self.window is None else self.window
        object.__setattr__(self, "window", W)
        total = self.hazard_grid("all")
        if total.max() > 1.0:
            raise ModelValidationError(
                f"daily exit probability reaches {total.max():.4f} > 1 after scaling; reduce hazard_scale"
            )

    def days(self) -> np.ndarray:
        return np.arange(self.T_sim, dtype=float)

    def hazard_grid(self, cause: str) -> np.ndarray:
        """True hazard over (day, duration), duration running to T_sim - 1."""
        days = self.days()
        cal = np.asarray(self.calendar_factor(days), dtype=float)
        if cause == "death":
            shape = np.asarray(self.duration_factor_death(days), dtype=float)
        elif cause == "recovery":
            shape = np.asarray(self.duration_factor_recovery(days), dtype=float)
        elif cause == "all":
            shape = np.asarray(self.duration_factor_death(days), dtype=float) + np.asarray(
                self.duration_factor_recovery(days), dtype=float
            )
        else:
            raise ValueError("cause must be 'all', 'recovery' or 'death'")
        return np.outer(cal, shape) * self.hazard_scale

    def scaled_to(self, expected_admissions: float) -> "TrueModel":
        """Same process with the arrival intensity rescaled to a target cohort size."""
        total = self.arrival_intensity.sum()
        if total <= 0:
            raise ModelValidationError("cannot rescale a zero arrival intensity")
        return replace(self, arrival_intensity=self.arrival_intensity * (expected_admissions / total))

    def outside_ratio_values(self) -> np.ndarray:
        if callable(self.outside_ratio):
            vals = np.asarray(self.outside_ratio(self.days()), dtype=float)
        else:
            vals = np.full(self.T_sim, float(self.outside_ratio))
        if np.any(vals < 0):
            raise ModelValidationError("outside ratio must be nonnegative")
        return vals

    @classmethod
    def benchmark(
        cls,
        T_sim: int = 120,
        expected_admissions: float = 10_000.0,
        hazard_scale: float = 40.0,
        window: Optional[int] = None,
        outside_ratio: Union[float, Callable] = 0.0,
        swap_causes: bool = False,
    ) -> "TrueModel":
        """Smooth two-cause test bed: one mid-wave bump plus a richer mixture.

        Cause shapes are Beta-density mixtures on the simulation span; by
        default the unimodal bump drives deaths and the mixture drives
        recoveries, ``swap_causes`` flips the mapping.  Admissions follow a
        front-loaded wave with a uniform floor so the whole feasible
        (day, duration) triangle carries exposure.
        """
        span = float(T_sim)

        def centers(x: np.ndarray) -> np.ndarray:
            return (np.asarray(x, dtype=float) + 0.5) / span

        def bump(x: np.ndarray) -> np.ndarray:
            return _beta_density(centers(x), 2.0, 2.0) / span

        def mixture(x: np.ndarray) -> np.ndarray:
            c = centers(x)
            return (0.6 / span) * (
                _beta_density(c, 0.5, 0.5) + _beta_density(c, 2.0, 4.0) + _beta_density(c, 4.0, 2.0)
            )

        def calendar(x: np.ndarray) -> np.ndarray:
            return bump(x) + mixture(x)

        death, recovery = (mixture, bump) if swap_causes else (bump, mixture)
        # Front-loaded admission wave over a small background trickle: early
        # arrivals give late calendar days deep-duration exposure, the floor
        # keeps late admission cohorts (short durations) populated too.
        wave = _beta_density(centers(np.arange(T_sim)), 2.0, 4.0)
        wave = wave / wave.mean() + 0.1
        return cls(
            T_sim=T_sim,
            arrival_intensity=wave * (expected_admissions / wave.sum()),
            calendar_factor=calendar,
            duration_factor_death=death,
            duration_factor_recovery=recovery,
            hazard_scale=hazard_scale,
            window=window,
            outside_ratio=outside_ratio,
        )

    @classmethod
    def stationary(
        cls,
        T_sim: int,
        expected_admissions: float,
        exit_rate: float = 0.12,
        death_share: float = 0.3,
        window: Optional[int] = None,
        outside_ratio: Union[float, Callable] = 0.0,
    ) -> "TrueModel":
        """Constant arrivals and time-homogeneous geometric stay lengths."""
        if not 0 < exit_rate <= 1 or not 0 <= death_share <= 1:
            raise ModelValidationError("exit_rate in (0, 1], death_share in [0, 1]")
        const = lambda value: (lambda x: np.full(np.shape(x), value, dtype=float))
        return cls(
            T_sim=T_sim,
            arrival_intensity=np.full(T_sim, expected_admissions / float(T_sim)),
            calendar_factor=const(1.0),
            duration_factor_death=const(exit_rate * death_share),
            duration_factor_recovery=const(exit_rate * (1.0 - death_share)),
            window=window,
            outside_ratio=outside_ratio,
        )


def true_hazard(model: TrueModel, t, w, cause: str = "all") -> Union[float, np.ndarray]:
    """Planted daily exit probability at (day t, duration w); zero off the grid."""
    t_arr = np.asarray(t)
    w_arr = np.asarray(w)
    grid = model.hazard_grid(cause)
    inside = (t_arr >= 0) & (t_arr < model.T_sim) & (w_arr >= 0) & (w_arr < model.T_sim)
    out = np.where(inside, grid[np.clip(t_arr, 0, model.T_sim - 1), np.clip(w_arr, 0, model.T_sim - 1)], 0.0)
    if np.isscalar(t) and np.isscalar(w):
        return float(out)
    return out


def true_surface(model: TrueModel, cause: str) -> np.ndarray:
    """Planted hazard restricted to the estimation grid (T_sim, window + 1)."""
    return model.hazard_grid(cause)[:, : model.window + 1].copy()


def simulate_arrivals(model: TrueModel, seed: SeedLike) -> np.ndarray:
    """Daily admission counts: independent Poisson draws per day."""
    return _rng(seed).poisson(model.arrival_intensity)


@dataclass(frozen=True)
class SimulatedData:
    records: List[Tuple[int, Optional[int], Optional[str]]]
    panel: DailyPanel
    arrivals: np.ndarray


def simulate_cohorts(model: TrueModel, seed: SeedLike) -> SimulatedData:
    """Individual stays plus the marginal panel they aggregate to.

    Records are (admit_day, exit_day, cause); stays open at the end of the
    window appear as (admit_day, None, None).  The same draws produce both
    views, so the panel is exactly the aggregation of the records.
    """
    rng = _rng(seed)
    T = model.T_sim
    arrivals = rng.poisson(model.arrival_intensity)
    mu3 = model.hazard_grid("recovery")
    mu4 = model.hazard_grid("death")
    alive = arrivals.astype(np.int64).copy()
    recoveries = np.zeros((T, T), dtype=np.int64)
    deaths = np.zeros((T, T), dtype=np.int64)
    for w in range(T):
        cohorts = np.arange(0, T - w)
        days = cohorts + w
        p3 = mu3[days, w]
        p4 = mu4[days, w]
        p_exit = p3 + p4
        exits = rng.binomial(alive[cohorts], p_exit)
        death_frac = np.divide(p4, p_exit, out=np.zeros_like(p4), where=p_exit > 0)
        died = rng.binomial(exits, death_frac)
        recovered = exits - died
        recoveries[days, cohorts] += recovered
        deaths[days, cohorts] += died
        alive[cohorts] -= exits

    records: List[Tuple[int, Optional[int], Optional[str]]] = []
    for t, v in zip(*np.nonzero(recoveries)):
        records.extend([(int(v), int(t), "recovery")] * int(recoveries[t, v]))
    for t, v in zip(*np.nonzero(deaths)):
        records.extend([(int(v), int(t), "death")] * int(deaths[t, v]))
    for v in np.nonzero(alive)[0]:
        records.extend([(int(v), None, None)] * int(alive[v]))
    records.sort(key=lambda r: (r[0], -1 if r[1] is None else r[1]))

    n3 = recoveries.sum(axis=1)
    n4 = deaths.sum(axis=1)
    ratio = model.outside_ratio_values()
    n_out = rng.poisson(ratio * n4) if np.any(ratio > 0) else np.zeros(T, dtype=np.int64)
    panel = DailyPanel(
        start_date=SIM_START,
        n2=arrivals,
        n3=n3,
        n4=n4,
        n_out=n_out,
        label="simulated",
    )
    return SimulatedData(records=records, panel=panel, arrivals=arrivals)


def ise(estimate: HazardSurface, model: TrueModel, cause: str) -> float:
    """Mean squared deviation from the planted surface over defined cells."""
    truth = true_surface(model, cause)
    if estimate.values.shape != truth.shape:
        raise ValueError("estimate grid does not match the model grid")
    cells = estimate.defined
    if not cells.any():
        return float("nan")
    diff = estimate.values[cells] - truth[cells]
    return float(np.mean(diff * diff))


class StudyError(RuntimeError):
    """Too many replicate failures to report a study cell honestly."""


@dataclass(frozen=True)
class StudyCell:
    method: str  # "full" or "partial"
    cause: str  # "death" or "recovery"
    size: float
    mise: float
    isb: float
    miv: float
    median_ise: float
    replicates: int
    failures: int
    converged: int  # fits that reached the fixed-point tolerance (= replicates for "full")
    common_cells: int
    excluded_cells: int

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}  # type: ignore[attr-defined]


@dataclass(frozen=True)
class StudyReport:
    cells: Tuple[StudyCell, ...]
    seed: int
    sizes: Tuple[float, ...]
    replicates: int

    def cell(self, method: str, cause: str, size: float) -> StudyCell:
        for c in self.cells:
            if c.method == method and c.cause == cause and c.size == size:
                return c
        raise KeyError((method, cause, size))

    def to_csv(self) -> str:
        lines = ["size,metric,full_death,full_recovery,partial_death,partial_recovery"]
        for size in self.sizes:
            for metric in ("mise", "isb", "miv"):
                row = [str(size), metric.upper()]
                for method in ("full", "partial"):
                    for cause in ("death", "recovery"):
                        row.append(repr(getattr(self.cell(method, cause, size), metric)))
                lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "sizes": list(self.sizes),
            "replicates": self.replicates,
            "cells": [c.to_json_dict() for c in self.cells],
        }


def _fit_replicate(
    model: TrueModel,
    seed: np.random.SeedSequence,
    candidates: Optional[Sequence[float]],
    options: Optional[IterationOptions],
) -> Tuple[dict, bool]:
    """One replicate: surfaces by method and cause, plus the fixed-point flag."""
    W = model.window
    data = simulate_cohorts(model, seed)
    grid_full = build_event_grid_full(data.records, model.T_sim, window=W)
    cv_full = select_bandwidths(grid_full, candidates=candidates)
    _, full_rec, full_death = estimate_surfaces(grid_full, cv_full.chosen)

    panel = data.panel
    start = constant_surface(initial_hazard_guess(panel), panel.T, W)
    grid0, _ = impute_grid(panel, start, iteration=0)
    cv_ml = select_bandwidths(grid0, candidates=candidates)
    fit = fit_missing_link(panel, cv_ml.chosen, options=options, window=W)
    ml_rec, ml_death = split_causes(panel, fit)
    surfaces = {
        ("full", "recovery"): full_rec,
        ("full", "death"): full_death,
        ("partial", "recovery"): ml_rec,
        ("partial", "death"): ml_death,
    }
    return surfaces, fit.diagnostics.converged


def run_study(
    model: TrueModel,
    sizes: Sequence[float],
    replicates: int,
    seed: int,
    candidates: Optional[Sequence[float]] = None,
    options: Optional[IterationOptions] = None,
    max_failure_share: float = 0.2,
    replicate_seeds: Optional[Sequence[SeedLike]] = None,
) -> StudyReport:
    """Monte-Carlo error study over sample sizes and fitting methods.

    Per (method, cause, size) the report carries the mean and median ISE over
    replicates together with the squared-bias / variance decomposition,
    computed on the cells defined in every replicate so that
    MISE = ISB + MIV holds exactly.  Replicates whose fit raises are counted
    and excluded; more than ``max_failure_share`` of them aborts the study.
    ``replicate_seeds`` overrides the per-replicate substreams (repeating a
    seed collapses the variance term to zero, a useful degenerate check).
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates for a variance decomposition")
    if replicate_seeds is not None and len(replicate_seeds) != replicates:
        raise ValueError("replicate_seeds must have one entry per replicate")
    master = np.random.SeedSequence(seed)
    size_seqs = master.spawn(len(sizes))
    cells: List[StudyCell] = []
    for size, size_seq in zip(sizes, size_seqs):
        scaled = model.scaled_to(float(size))
        truths = {cause: true_surface(scaled, cause) for cause in ("recovery", "death")}
        feasible = _feasible_mask(scaled.T_sim, scaled.window)
        rep_seqs = size_seq.spawn(replicates) if replicate_seeds is None else list(replicate_seeds)
        kept: List[dict] = []
        converged_flags: List[bool] = []
        failures = 0
        for rep_seq in rep_seqs:
            try:
                surfaces, converged = _fit_replicate(scaled, rep_seq, candidates, options)
            except Exception:
                failures += 1
                continue
            kept.append(surfaces)
            converged_flags.append(converged)
        if failures > max_failure_share * replicates:
            raise StudyError(f"{failures}/{replicates} replicates failed at size {size}")
        for method in ("full", "partial"):
            for cause in ("death", "recovery"):
                stack_vals = np.stack([rep[(method, cause)].values for rep in kept])
                common = feasible & np.all(
                    np.stack([rep[(method, cause)].defined for rep in kept]), axis=0
                )
                truth = truths[cause]
                n_common = int(common.sum())
                if n_common == 0:
                    mise = isb = miv = med = float("nan")
                else:
                    flat = stack_vals[:, common]
                    diffs = flat - truth[common][None, :]
                    per_rep = np.mean(diffs * diffs, axis=1)
                    mise = float(np.mean(per_rep))
                    med = float(np.median(per_rep))
                    mean_surface = flat.mean(axis=0)
                    isb = float(np.mean((mean_surface - truth[common]) ** 2))
                    miv = float(np.mean(np.var(flat, axis=0)))
                cells.append(
                    StudyCell(
                        method=method,
                        cause=cause,
                        size=float(size),
                        mise=mise,
                        isb=isb,
                        miv=miv,
                        median_ise=med,
                        replicates=len(kept),
                        failures=failures,
                        converged=sum(converged_flags) if method == "partial" else len(kept),
                        common_cells=n_common,
                        excluded_cells=int(feasible.sum()) - n_common,
                    )
                )
    return StudyReport(cells=tuple(cells), seed=seed, sizes=tuple(float(s) for s in sizes), replicates=replicates)


def _feasible_mask(n_days: int, window: int) -> np.ndarray:
    t = np.arange(n_days)[:, None]
    w = np.arange(window + 1)[None, :]
    return w <= t


def estimate_intensity_from_panel(panel: DailyPanel) -> np.ndarray:
    """Daily admission counts reused as piecewise-constant arrival rates."""
    return panel.n2.astype(float)
