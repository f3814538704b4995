"""Least-squares cross-validation for the two smoothing bandwidths.

The score for a candidate pair b is

    Q(b) = sum_cells mu_b(t, w)^2 * E(t, t-w)
           - 2 * sum_{event cells} mu_b^{(-cell)}(t, w) * O(t, t-w)

where the leave-out estimate drops the evaluated cell's own occurrences from
the numerator (its correction weight at itself is exactly one).  The penalty
term is exposure-weighted by default; an unweighted variant is available as a
switch.  Undefined cells never enter either sum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .hazard import duration_band, surface_components
from .kernels import Bandwidths

DEFAULT_GRID = (2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 21.0)


class NoUsableBandwidthError(RuntimeError):
    """Every candidate produced a score of +inf (no defined cells anywhere)."""


@dataclass(frozen=True)
class CvResult:
    candidates: Tuple[Bandwidths, ...]
    scores: np.ndarray
    chosen: Bandwidths

    def to_csv(self) -> str:
        lines = ["b1,b2,score"]
        for cand, score in zip(self.candidates, self.scores):
            lines.append(f"{cand.b1!r},{cand.b2!r},{float(score)!r}")
        return "\n".join(lines) + "\n"


def _score_bands(exposure_band: np.ndarray, occurrence_band: np.ndarray, bands: Bandwidths, exposure_weighted: bool) -> float:
    comp = surface_components(exposure_band, [occurrence_band], bands)
    defined = comp.defined
    if not defined.any():
        return float("inf")
    safe_den = np.where(defined, comp.denominator, 1.0)
    mu = np.clip(np.where(defined, comp.numerators[0] / safe_den, 0.0), 0.0, 1.0)
    if exposure_weighted:
        penalty = float(np.sum(mu[defined] ** 2 * exposure_band[defined]))
    else:
        penalty = float(np.sum(mu[defined] ** 2))
    # own-cell kernel mass: C=1 at zero offsets, K1(0)*K2(0) = 0.5625/(b1*b2)
    loo_num = comp.numerators[0] - (0.5625 / (bands.b1 * bands.b2)) * occurrence_band
    mu_loo = np.clip(np.where(defined, loo_num / safe_den, 0.0), 0.0, 1.0)
    events = defined & (occurrence_band > 0.0)
    fit_term = float(np.sum(mu_loo[events] * occurrence_band[events]))
    return penalty - 2.0 * fit_term


def cv_score(grid, bands: Bandwidths, exposure_weighted: bool = True, window: Optional[int] = None) -> float:
    """Cross-validation score of one bandwidth pair on an event or imputed grid."""
    W = grid.window if window is None else window
    e_band = duration_band(grid.exposure, W)
    o_band = duration_band(grid.occurrences, W)
    return _score_bands(e_band, o_band, bands, exposure_weighted)


def select_bandwidths(
    grid,
    candidates: Optional[Sequence[float]] = None,
    exposure_weighted: bool = True,
    window: Optional[int] = None,
) -> CvResult:
    """Grid-search the candidate bandwidth pairs; ties go to the larger b1*b2.

    ``candidates`` is a one-dimensional set of values used for both axes.
    """
    values = tuple(float(c) for c in (candidates if candidates is not None else DEFAULT_GRID))
    if not values:
        raise ValueError("candidate bandwidth list is empty")
    W = grid.window if window is None else window
    e_band = duration_band(grid.exposure, W)
    o_band = duration_band(grid.occurrences, W)
    pairs = tuple(Bandwidths(b1, b2) for b1, b2 in itertools.product(values, values))
    scores = np.array([_score_bands(e_band, o_band, b, exposure_weighted) for b in pairs])
    finite = np.isfinite(scores)
    if not finite.any():
        raise NoUsableBandwidthError("no usable bandwidth: all candidates score +inf")
    best = scores[finite].min()
    tied = [p for p, sc in zip(pairs, scores) if sc == best]
    chosen = max(tied, key=lambda p: p.b1 * p.b2)
    return CvResult(candidates=pairs, scores=scores, chosen=chosen)
