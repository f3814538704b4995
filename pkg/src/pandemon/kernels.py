"""Epanechnikov kernels and the local-linear weighting machinery.

The two-dimensional hazard estimator weights every data cell by a product
kernel and a multiplicative correction that makes the fit locally linear
instead of locally constant.  The correction at evaluation point (t, s) for a
data cell (u, v) is

    C = 1 - (t - u, (t - s) - (u - v)) . A(t,s)^{-1} a(t,s)

where a and A are the kernel-weighted first and second moments of the
exposure around the evaluation point.  When A is singular or numerically
unusable the correction collapses to 1 (a local-constant fit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# A 2x2 moment matrix is treated as singular beyond this 2-norm condition.
CONDITION_LIMIT = 1e12


def epanechnikov(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Epanechnikov kernel 0.75*(1 - x^2) on [-1, 1], zero outside."""
    arr = np.asarray(x, dtype=float)
    out = np.where(np.abs(arr) <= 1.0, 0.75 * (1.0 - arr * arr), 0.0)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def scaled_kernel(offsets: np.ndarray, bandwidth: float) -> np.ndarray:
    """K(offset / b) / b, the bandwidth-scaled kernel on the day grid."""
    return np.asarray(epanechnikov(np.asarray(offsets, dtype=float) / bandwidth)) / bandwidth


@dataclass(frozen=True)
class Bandwidths:
    """Smoothing bandwidths in days: b1 along calendar time, b2 along duration."""

    b1: float
    b2: float

    def __post_init__(self):
        if not (self.b1 >= 1.0 and self.b2 >= 1.0):
            raise ValueError(f"bandwidths must be >= 1 day, got ({self.b1}, {self.b2})")
        if not (math.isfinite(self.b1) and math.isfinite(self.b2)):
            raise ValueError("bandwidths must be finite")


@dataclass(frozen=True)
class LocalMoments:
    """Kernel-weighted exposure moments at one evaluation point."""

    a: np.ndarray  # shape (2,): first moments
    A: np.ndarray  # shape (2, 2): second moments, symmetric PSD
    degenerate: bool  # True when A cannot be inverted reliably


def moments_degenerate(A: np.ndarray) -> bool:
    """Singularity rule for the 2x2 moment matrix.

    Symmetrise, then reject when det <= 0 or the 2-norm condition number
    exceeds CONDITION_LIMIT.
    """
    a11 = 0.5 * (A[0, 0] + A[0, 0])
    a22 = A[1, 1]
    a12 = 0.5 * (A[0, 1] + A[1, 0])
    det = a11 * a22 - a12 * a12
    if not det > 0.0:
        return True
    mean = 0.5 * (a11 + a22)
    radius = math.hypot(0.5 * (a11 - a22), a12)
    lo = mean - radius
    if not lo > 0.0:
        return True
    return (mean + radius) > CONDITION_LIMIT * lo


def local_moments(t: int, s: int, exposure: np.ndarray, bands: Bandwidths) -> LocalMoments:
    """Exposure moments a, A at evaluation point (t, s) on a (day, admission-day) matrix.

    ``exposure[u, v]`` is person-days on day ``u`` for the cohort admitted on
    day ``v`` (zero above the diagonal).  Offsets are measured as
    ``(t - u, (t - s) - (u - v))``.
    """
    T = exposure.shape[0]
    w0 = t - s
    r1 = int(math.floor(bands.b1))
    r2 = int(math.floor(bands.b2))
    a = np.zeros(2)
    A = np.zeros((2, 2))
    for u in range(max(0, t - r1), min(T - 1, t + r1) + 1):
        d1 = float(t - u)
        k1 = epanechnikov(d1 / bands.b1) / bands.b1
        if k1 <= 0.0:
            continue
        dur_lo = max(0, w0 - r2)
        dur_hi = min(u, w0 + r2)
        if dur_lo > dur_hi:
            continue
        durs = np.arange(dur_lo, dur_hi + 1)
        d2 = w0 - durs.astype(float)
        k2 = scaled_kernel(d2, bands.b2)
        wgt = k1 * k2 * exposure[u, u - durs]
        a[0] += d1 * wgt.sum()
        a[1] += np.dot(wgt, d2)
        A[0, 0] += d1 * d1 * wgt.sum()
        A[0, 1] += d1 * np.dot(wgt, d2)
        A[1, 1] += np.dot(wgt, d2 * d2)
    A[1, 0] = A[0, 1]
    return LocalMoments(a=a, A=A, degenerate=moments_degenerate(A))


def solve_moments(m: LocalMoments) -> np.ndarray:
    """A^{-1} a via the closed-form 2x2 inverse; zeros when degenerate."""
    if m.degenerate:
        return np.zeros(2)
    a11, a12, a22 = m.A[0, 0], m.A[0, 1], m.A[1, 1]
    det = a11 * a22 - a12 * a12
    return np.array(
        [
            (a22 * m.a[0] - a12 * m.a[1]) / det,
            (a11 * m.a[1] - a12 * m.a[0]) / det,
        ]
    )


def correction_weight(s: int, t: int, u: int, v: int, m: LocalMoments) -> float:
    """Local-linear correction for data cell (u, v) at evaluation point (t, s)."""
    if m.degenerate:
        return 1.0
    c = solve_moments(m)
    return 1.0 - ((t - u) * c[0] + ((t - s) - (u - v)) * c[1])


@dataclass(frozen=True)
class SmoothedCurve:
    """Result of a one-dimensional local-linear regression on the day grid."""

    values: np.ndarray
    used_fallback: np.ndarray  # True where no kernel weight reached the grid point


def local_linear_regress(
    x: np.ndarray,
    y: np.ndarray,
    bandwidth: float,
    grid: np.ndarray,
) -> SmoothedCurve:
    """Local-linear scatter smoother with an Epanechnikov kernel.

    Reproduces affine data exactly.  Grid points with no kernel weight fall
    back to the nearest observation and are flagged.
    """
    if bandwidth <= 0 or not math.isfinite(bandwidth):
        raise ValueError("bandwidth must be a positive finite number of days")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ValueError("x and y must be equal-length nonempty 1-d arrays")
    grid = np.asarray(grid, dtype=float)
    values = np.empty(grid.shape)
    fallback = np.zeros(grid.shape, dtype=bool)
    for i, g in enumerate(grid):
        off = x - g
        k = scaled_kernel(off, bandwidth)
        s0 = k.sum()
        if s0 <= 0.0:
            values[i] = y[np.argmin(np.abs(off))]
            fallback[i] = True
            continue
        s1 = np.dot(k, off)
        s2 = np.dot(k, off * off)
        t0 = np.dot(k, y)
        t1 = np.dot(k, off * y)
        det = s0 * s2 - s1 * s1
        if det <= 1e-12 * max(s0 * s2, 1e-300):
            values[i] = t0 / s0  # effectively one support point: local constant
        else:
            values[i] = (s2 * t0 - s1 * t1) / det
    return SmoothedCurve(values=values, used_fallback=fallback)
