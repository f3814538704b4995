"""Two-dimensional hazard surfaces from (day, admission-day) event grids.

The estimator is an occurrence/exposure ratio smoothed with a product
Epanechnikov kernel and a local-linear correction weight.  For an evaluation
cell (t, w) with admission day s = t - w:

    mu_hat(t, w) = sum C * K1(t-u) * K2(w - (u-v)) * O(u, v)
                   -----------------------------------------
                   sum C * K1(t-u) * K2(w - (u-v)) * E(u, v)

Both kernel arguments are translation invariant once the data are laid out by
(day, duration), so every moment the correction needs is a separable
convolution; the whole surface costs O(T * W * (b1 + b2)).

Estimates are clipped to [0, 1] per day, masked where the corrected exposure
in the window is below ``EPS_EXPOSURE``, and restricted to the feasible
triangle w <= t.  Cause-specific surfaces share the all-cause denominator and
are allocated so that recovery + death equals the all-cause surface exactly
even where clipping is active.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .kernels import CONDITION_LIMIT, Bandwidths, epanechnikov
from .panel import default_window

# Smoothed person-days below which a cell carries no usable information.
EPS_EXPOSURE = 1e-8

CAUSES = ("all", "recovery", "death")


class GridValidationError(ValueError):
    """An event grid violates its construction invariants."""


@dataclass(frozen=True)
class EventGrid:
    """Exit counts and exposure indexed by (day u, admission day v).

    ``occurrences`` is always the elementwise sum of the recovery and death
    parts.  Matrices are T x T with zeros above the diagonal; entries may be
    fractional when the grid was produced by imputation.
    """

    occurrences_recovery: np.ndarray
    occurrences_death: np.ndarray
    exposure: np.ndarray
    window: int
    occurrences: np.ndarray = field(init=False)

    def __post_init__(self):
        o3 = np.asarray(self.occurrences_recovery, dtype=float)
        o4 = np.asarray(self.occurrences_death, dtype=float)
        e = np.asarray(self.exposure, dtype=float)
        if o3.shape != o4.shape or o3.shape != e.shape or o3.ndim != 2 or o3.shape[0] != o3.shape[1]:
            raise GridValidationError("grid matrices must share one square (T, T) shape")
        T = o3.shape[0]
        if not 1 <= self.window <= max(1, T - 1) and T > 1:
            raise GridValidationError(f"window {self.window} outside [1, {T - 1}]")
        for name, m in (("occurrences_recovery", o3), ("occurrences_death", o4), ("exposure", e)):
            if np.any(m < 0):
                raise GridValidationError(f"{name} has negative entries")
            if np.any(np.triu(m, k=1) != 0):
                raise GridValidationError(f"{name} has mass above the diagonal (exit before admission)")
        object.__setattr__(self, "occurrences_recovery", o3)
        object.__setattr__(self, "occurrences_death", o4)
        object.__setattr__(self, "exposure", e)
        object.__setattr__(self, "occurrences", o3 + o4)
        for m in (self.occurrences_recovery, self.occurrences_death, self.exposure, self.occurrences):
            m.flags.writeable = False

    @property
    def n_days(self) -> int:
        return self.exposure.shape[0]


def build_event_grid_full(
    records: Iterable[Tuple[int, Optional[int], Optional[str]]],
    n_days: int,
    window: Optional[int] = None,
) -> EventGrid:
    """Tally individual stay records into an :class:`EventGrid`.

    Records are ``(admit_day, exit_day, cause)`` with cause ``"recovery"`` or
    ``"death"``.  A record is censored once it runs past the observation
    window (exit at or beyond ``n_days``, or None) or past stay duration
    ``window``: it then contributes exposure through its last in-range day
    but no occurrence.  Exposure includes the exit day itself.
    """
    if n_days < 1:
        raise GridValidationError("n_days must be positive")
    W = default_window(n_days) if window is None else window
    o3 = np.zeros((n_days, n_days))
    o4 = np.zeros((n_days, n_days))
    e = np.zeros((n_days, n_days))
    for idx, (admit, exit_day, cause) in enumerate(records):
        admit = int(admit)
        if admit < 0 or admit >= n_days:
            raise GridValidationError(f"record {idx}: admission day {admit} outside [0, {n_days - 1}]")
        censored = exit_day is None or int(exit_day) >= n_days
        if not censored:
            exit_day = int(exit_day)
            if exit_day < admit:
                raise GridValidationError(f"record {idx}: exit day {exit_day} before admission day {admit}")
            if cause not in ("recovery", "death"):
                raise GridValidationError(f"record {idx}: cause must be 'recovery' or 'death', got {cause!r}")
            if exit_day - admit > W:
                censored = True  # stay outlives the tracked duration range
            elif cause == "recovery":
                o3[exit_day, admit] += 1.0
            else:
                o4[exit_day, admit] += 1.0
        last = min(exit_day if not censored else n_days - 1, admit + W, n_days - 1)
        e[admit : last + 1, admit] += 1.0
    return EventGrid(occurrences_recovery=o3, occurrences_death=o4, exposure=e, window=W)


def occurrence_exposure_ratio(grid: EventGrid, t: int, w: int) -> Optional[float]:
    """Raw cell-level exit fraction O(t, t-w) / E(t, t-w); None when unexposed."""
    v = t - w
    if not (0 <= v <= t < grid.n_days):
        return None
    e = grid.exposure[t, v]
    if e <= 0.0:
        return None
    return float(grid.occurrences[t, v] / e)


# ---------------------------------------------------------------------------
# surface container


@dataclass(frozen=True)
class HazardSurface:
    """Daily exit-probability surface over (day t, duration w).

    ``values`` has shape (T, W+1) and is zero wherever ``defined`` is False;
    downstream code relies on masked cells acting as zero hazard.
    """

    values: np.ndarray
    defined: np.ndarray
    cause: str
    bandwidths: Optional[Bandwidths]
    window: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        d = np.asarray(self.defined, dtype=bool)
        if v.shape != d.shape or v.ndim != 2 or v.shape[1] != self.window + 1:
            raise ValueError("surface arrays must share shape (T, window+1)")
        if self.cause not in CAUSES:
            raise ValueError(f"cause must be one of {CAUSES}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "defined", d)
        v.flags.writeable = False
        d.flags.writeable = False

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    def value_at(self, t: int, w: int) -> float:
        return float(self.values[t, w])

    def cohort_slice(self, s: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Durations, values and defined flags along the diagonal of admission day s."""
        T = self.n_days
        if not 0 <= s < T:
            raise ValueError(f"admission day {s} outside the panel")
        w = np.arange(0, min(self.window, T - 1 - s) + 1)
        return w, self.values[s + w, w], self.defined[s + w, w]

    def to_json_dict(self) -> dict:
        b1 = self.bandwidths.b1 if self.bandwidths else None
        b2 = self.bandwidths.b2 if self.bandwidths else None
        return {
            "T": self.n_days,
            "W": self.window,
            "cause": self.cause,
            "b1": b1,
            "b2": b2,
            "values": self.values.tolist(),
            "mask": self.defined.tolist(),
        }

    def to_csv(self, dest: Union[str, Path, IO[str], None] = None) -> Optional[str]:
        lines = ["t,w,value,defined"]
        for t in range(self.n_days):
            for w in range(self.window + 1):
                lines.append(f"{t},{w},{float(self.values[t, w])!r},{int(self.defined[t, w])}")
        text = "\n".join(lines) + "\n"
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)  # type: ignore[union-attr]
            return None
        Path(dest).write_text(text, encoding="utf-8")
        return None


def surface_from_json_dict(payload: dict) -> HazardSurface:
    bands = None
    if payload.get("b1") is not None and payload.get("b2") is not None:
        bands = Bandwidths(float(payload["b1"]), float(payload["b2"]))
    return HazardSurface(
        values=np.asarray(payload["values"], dtype=float),
        defined=np.asarray(payload["mask"], dtype=bool),
        cause=payload["cause"],
        bandwidths=bands,
        window=int(payload["W"]),
    )


def constant_surface(value: float, n_days: int, window: int, cause: str = "all") -> HazardSurface:
    """Feasible-triangle surface with one constant hazard value everywhere."""
    t = np.arange(n_days)[:, None]
    w = np.arange(window + 1)[None, :]
    feasible = w <= t
    values = np.where(feasible, float(value), 0.0)
    return HazardSurface(values=values, defined=feasible, cause=cause, bandwidths=None, window=window)


# ---------------------------------------------------------------------------
# separable moment machinery


def duration_band(matrix_uv: np.ndarray, window: int) -> np.ndarray:
    """Re-index a (day, admission-day) matrix by (day, duration).

    Mass at durations beyond ``window`` is dropped: stays are censored at
    duration W, so the estimation grid stays T x (W+1) and the last column
    keeps the plain duration-W interpretation.
    """
    T = matrix_uv.shape[0]
    band = np.zeros((T, window + 1))
    for w in range(min(T, window + 1)):
        band[w:, w] = np.diagonal(matrix_uv, offset=-w)
    return band


def _kernel_filters(b: float) -> Tuple[np.ndarray, np.ndarray]:
    r = int(np.floor(b))
    d = np.arange(-r, r + 1, dtype=float)
    return d, np.asarray(epanechnikov(d / b)) / b


def _conv(x: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    # out[t] = sum_d weights_natural_order(d) * x[t - d], zero outside the grid
    return ndimage.convolve1d(x, weights, axis=axis, mode="constant", cval=0.0)


@dataclass(frozen=True)
class SurfaceComponents:
    """Corrected numerator/denominator sums shared by estimation and CV."""

    denominator: np.ndarray
    numerators: Tuple[np.ndarray, ...]
    degenerate: np.ndarray
    feasible: np.ndarray
    defined: np.ndarray


def surface_components(
    exposure_band: np.ndarray,
    numerator_bands: Sequence[np.ndarray],
    bands: Bandwidths,
) -> SurfaceComponents:
    """Kernel-corrected sums for every grid cell at once.

    The local-linear weights come from the exposure moments; each numerator
    band is smoothed with the same corrected weights.
    """
    T, Wp1 = exposure_band.shape
    d1, k1 = _kernel_filters(bands.b1)
    d2, k2 = _kernel_filters(bands.b2)
    f = [k1 * d1**p for p in range(3)]
    g = [k2 * d2**q for q in range(3)]

    # exposure moments: pass along days first, reuse for each duration order
    e_rows = [_conv(exposure_band, f[p], axis=0) for p in range(3)]
    a0 = _conv(e_rows[0], g[0], axis=1)
    a1 = _conv(e_rows[1], g[0], axis=1)
    a2 = _conv(e_rows[0], g[1], axis=1)
    A11 = _conv(e_rows[2], g[0], axis=1)
    A12 = _conv(e_rows[1], g[1], axis=1)
    A22 = _conv(e_rows[0], g[2], axis=1)

    det = A11 * A22 - A12 * A12
    mean = 0.5 * (A11 + A22)
    radius = np.hypot(0.5 * (A11 - A22), A12)
    lo = mean - radius
    degenerate = ~(det > 0.0) | ~(lo > 0.0) | ((mean + radius) > CONDITION_LIMIT * lo)
    safe_det = np.where(degenerate, 1.0, det)
    c1 = np.where(degenerate, 0.0, (A22 * a1 - A12 * a2) / safe_det)
    c2 = np.where(degenerate, 0.0, (A11 * a2 - A12 * a1) / safe_det)

    denominator = a0 - c1 * a1 - c2 * a2

    numerators = []
    for num_band in numerator_bands:
        n_rows = [_conv(num_band, f[p], axis=0) for p in range(2)]
        n00 = _conv(n_rows[0], g[0], axis=1)
        n10 = _conv(n_rows[1], g[0], axis=1)
        n01 = _conv(n_rows[0], g[1], axis=1)
        numerators.append(n00 - c1 * n10 - c2 * n01)

    t_idx = np.arange(T)[:, None]
    w_idx = np.arange(Wp1)[None, :]
    feasible = w_idx <= t_idx
    defined = feasible & (denominator > EPS_EXPOSURE)
    return SurfaceComponents(
        denominator=denominator,
        numerators=tuple(numerators),
        degenerate=degenerate,
        feasible=feasible,
        defined=defined,
    )


def _clipped_ratio(numerator: np.ndarray, comp: SurfaceComponents) -> np.ndarray:
    safe_den = np.where(comp.defined, comp.denominator, 1.0)
    raw = np.where(comp.defined, numerator / safe_den, 0.0)
    return np.clip(raw, 0.0, 1.0)


def _allocate_causes(
    total: np.ndarray,
    num_rec: np.ndarray,
    num_death: np.ndarray,
    comp: SurfaceComponents,
) -> Tuple[np.ndarray, np.ndarray]:
    """Split the clipped all-cause surface so the parts sum to it exactly."""
    rec_pos = np.clip(np.where(comp.defined, num_rec, 0.0), 0.0, None)
    death_pos = np.clip(np.where(comp.defined, num_death, 0.0), 0.0, None)
    mass = rec_pos + death_pos
    share_rec = np.where(mass > 0.0, rec_pos / np.where(mass > 0.0, mass, 1.0), 0.0)
    mu_rec = share_rec * total
    mu_death = total - mu_rec
    return mu_rec, mu_death


def estimate_surfaces(
    grid,
    bands: Bandwidths,
    window: Optional[int] = None,
) -> Tuple[HazardSurface, HazardSurface, HazardSurface]:
    """All-cause, recovery and death surfaces from an :class:`EventGrid`."""
    W = grid.window if window is None else window
    e_band = duration_band(grid.exposure, W)
    o_band = duration_band(grid.occurrences, W)
    o3_band = duration_band(grid.occurrences_recovery, W)
    o4_band = duration_band(grid.occurrences_death, W)
    comp = surface_components(e_band, [o_band, o3_band, o4_band], bands)
    total = _clipped_ratio(comp.numerators[0], comp)
    mu_rec, mu_death = _allocate_causes(total, comp.numerators[1], comp.numerators[2], comp)
    make = lambda vals, cause: HazardSurface(
        values=np.where(comp.defined, vals, 0.0),
        defined=comp.defined.copy(),
        cause=cause,
        bandwidths=bands,
        window=W,
    )
    return make(total, "all"), make(mu_rec, "recovery"), make(mu_death, "death")


def estimate_hazard(grid, cause: str, bands: Bandwidths, window: Optional[int] = None) -> HazardSurface:
    """One hazard surface for ``cause`` in {"all", "recovery", "death"}."""
    if cause not in CAUSES:
        raise ValueError(f"cause must be one of {CAUSES}")
    surfaces = estimate_surfaces(grid, bands, window=window)
    return surfaces[CAUSES.index(cause)]


def estimate_single_surface(
    exposure_uv: np.ndarray,
    occurrence_uv: np.ndarray,
    bands: Bandwidths,
    window: int,
    cause: str = "all",
) -> HazardSurface:
    """All-cause estimate from bare (day, admission-day) matrices.

    Used by the marginal-data fitting loop, where occurrences carry no cause
    breakdown until the final split.
    """
    e_band = duration_band(exposure_uv, window)
    o_band = duration_band(occurrence_uv, window)
    comp = surface_components(e_band, [o_band], bands)
    total = _clipped_ratio(comp.numerators[0], comp)
    return HazardSurface(
        values=np.where(comp.defined, total, 0.0),
        defined=comp.defined.copy(),
        cause=cause,
        bandwidths=bands,
        window=window,
    )
