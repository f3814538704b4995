"""Event grids and the corrected occurrence/exposure surface estimator."""

from __future__ import annotations

import io
import json

import numpy as np
import pytest

from oracles import surface_oracle
from pandemon.hazard import (
    EventGrid,
    GridValidationError,
    HazardSurface,
    build_event_grid_full,
    constant_surface,
    duration_band,
    estimate_hazard,
    estimate_single_surface,
    estimate_surfaces,
    occurrence_exposure_ratio,
    surface_from_json_dict,
)
from pandemon.kernels import Bandwidths


def random_matrices(rng, T, window, occurrence_rate=0.3):
    """Random feasible (exposure, occurrence) matrices with mass up to W."""
    e = np.zeros((T, T))
    o = np.zeros((T, T))
    for u in range(T):
        for v in range(max(0, u - window), u + 1):
            e[u, v] = rng.integers(0, 40)
            if e[u, v] > 0:
                o[u, v] = rng.binomial(int(e[u, v]), occurrence_rate)
    return e, o


def make_grid(rng, T, window):
    e, o = random_matrices(rng, T, window)
    split = rng.uniform(size=o.shape)
    o3 = np.floor(o * split)
    return EventGrid(occurrences_recovery=o3, occurrences_death=o - o3, exposure=e, window=window)


# ---------------------------------------------------------------------------
# grid construction


def test_single_death_record():
    grid = build_event_grid_full([(1, 1, "death")], n_days=4)
    assert grid.occurrences_death[1, 1] == 1.0
    assert grid.exposure[1, 1] == 1.0
    assert grid.occurrences_recovery.sum() == 0.0
    assert grid.exposure.sum() == 1.0  # same-day exit: one exposed day only
    assert np.array_equal(grid.occurrences, grid.occurrences_death)


def test_two_staggered_exits_match_occupancy():
    records = [(1, 2, "recovery"), (1, 3, "death")]
    grid = build_event_grid_full(records, n_days=4)
    assert grid.exposure[1, 1] == 2.0
    assert grid.exposure[2, 1] == 2.0
    assert grid.exposure[3, 1] == 1.0
    assert grid.occurrences_recovery[2, 1] == 1.0
    assert grid.occurrences_death[3, 1] == 1.0
    # daily exposure row sums are the number of occupied beds that day
    assert grid.exposure.sum(axis=1).tolist() == [0.0, 2.0, 2.0, 1.0]


def test_empty_records_zero_grid():
    grid = build_event_grid_full([], n_days=5)
    assert grid.exposure.sum() == 0.0
    assert grid.occurrences.sum() == 0.0
    assert grid.window == 4  # default window on a 5-day panel


def test_censoring_rules():
    # duration beyond the window: exposure stops at admit + W, exit dropped
    grid = build_event_grid_full([(0, 5, "death")], n_days=6, window=2)
    assert grid.occurrences.sum() == 0.0
    assert grid.exposure[:, 0].tolist() == [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]

    # still in hospital at the end of the panel
    grid = build_event_grid_full([(2, None, None)], n_days=6, window=2)
    assert grid.occurrences.sum() == 0.0
    assert grid.exposure[:, 2].tolist() == [0.0, 0.0, 1.0, 1.0, 1.0, 0.0]

    # exit recorded past the panel counts as censored, not as an event
    grid = build_event_grid_full([(4, 9, "death")], n_days=6, window=3)
    assert grid.occurrences.sum() == 0.0
    assert grid.exposure[:, 4].tolist() == [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]


def test_record_validation():
    with pytest.raises(GridValidationError):
        build_event_grid_full([(7, 8, "death")], n_days=5)
    with pytest.raises(GridValidationError):
        build_event_grid_full([(3, 1, "death")], n_days=5)
    with pytest.raises(GridValidationError):
        build_event_grid_full([(1, 2, "discharge")], n_days=5)
    with pytest.raises(GridValidationError):
        build_event_grid_full([], n_days=0)


def test_grid_matrix_validation():
    ok = np.zeros((3, 3))
    with pytest.raises(GridValidationError):
        EventGrid(ok, ok, np.zeros((3, 2)), window=1)
    with pytest.raises(GridValidationError):
        EventGrid(ok - 1.0, ok, ok, window=1)
    above = ok.copy()
    above[0, 2] = 1.0
    with pytest.raises(GridValidationError):
        EventGrid(above, ok, ok, window=1)
    with pytest.raises(GridValidationError):
        EventGrid(ok, ok, ok, window=5)


def test_occurrence_exposure_ratio():
    records = [(0, 1, "death")] + [(0, None, None)] * 4
    grid = build_event_grid_full(records, n_days=4)
    assert occurrence_exposure_ratio(grid, 1, 1) == pytest.approx(0.2)
    assert occurrence_exposure_ratio(grid, 2, 2) == 0.0
    assert occurrence_exposure_ratio(grid, 1, 0) is None  # admitted after day 1
    assert occurrence_exposure_ratio(grid, 2, 3) is None  # infeasible w > t
    assert occurrence_exposure_ratio(grid, 9, 0) is None


def test_duration_band_truncates_beyond_window():
    m = np.zeros((4, 4))
    for u in range(4):
        for v in range(u + 1):
            m[u, v] = 10 * u + v
    band = duration_band(m, window=2)
    assert band.shape == (4, 3)
    assert band[3, 0] == m[3, 3]
    assert band[3, 2] == m[3, 1]
    assert band.sum() == m.sum() - m[3, 0]  # duration-3 mass dropped


# ---------------------------------------------------------------------------
# estimator behaviour


def test_constant_hazard_reproduced_exactly():
    rng = np.random.default_rng(11)
    T, W = 12, 6
    e, _ = random_matrices(rng, T, W)
    e += np.tril(np.ones((T, T))) * (np.arange(T)[None, :] >= np.arange(T)[:, None] - W)
    mu0 = 0.37
    for b1, b2 in [(2.0, 2.0), (3.0, 5.0), (7.0, 4.0)]:
        surf = estimate_single_surface(e, mu0 * e, Bandwidths(b1, b2), window=W)
        assert surf.defined.any()
        assert np.all(np.abs(surf.values[surf.defined] - mu0) < 1e-10)


def test_constant_cause_split_reproduced():
    rng = np.random.default_rng(12)
    e, _ = random_matrices(rng, 10, 5)
    e += 1.0
    e = np.tril(e) * (np.arange(10)[None, :] >= np.arange(10)[:, None] - 5)
    grid = EventGrid(0.25 * e, 0.12 * e, e, window=5)
    s_all, s_rec, s_death = estimate_surfaces(grid, Bandwidths(3.0, 3.0))
    assert np.all(np.abs(s_all.values[s_all.defined] - 0.37) < 1e-10)
    assert np.all(np.abs(s_rec.values[s_rec.defined] - 0.25) < 1e-10)
    assert np.all(np.abs(s_death.values[s_death.defined] - 0.12) < 1e-10)


def test_zero_exposure_masks_everything():
    surf = estimate_single_surface(np.zeros((6, 6)), np.zeros((6, 6)), Bandwidths(2.0, 2.0), window=3)
    assert not surf.defined.any()
    assert np.all(surf.values == 0.0)


def test_matches_bruteforce_oracle():
    rng = np.random.default_rng(404)
    configs = [
        (6, 3, 2.0, 2.0),
        (8, 5, 3.0, 2.0),
        (10, 5, 5.0, 3.0),
        (10, 9, 2.0, 4.0),
        (7, 4, 14.0, 14.0),
    ]
    for T, W, b1, b2 in configs:
        for _ in range(4):
            e, o = random_matrices(rng, T, T - 1)  # mass past W exercises truncation
            fast = estimate_single_surface(e, o, Bandwidths(b1, b2), window=W)
            slow = surface_oracle(e, o, b1, b2, W)
            assert np.array_equal(fast.defined, ~np.isnan(slow))
            diff = np.abs(fast.values[fast.defined] - slow[fast.defined])
            assert diff.size > 0
            assert diff.max() < 1e-10


def test_cause_surfaces_sum_to_all_cause():
    rng = np.random.default_rng(77)
    for _ in range(10):
        grid = make_grid(rng, 9, 4)
        s_all, s_rec, s_death = estimate_surfaces(grid, Bandwidths(2.0, 3.0))
        assert np.array_equal(s_all.defined, s_rec.defined)
        assert np.array_equal(s_all.defined, s_death.defined)
        resid = np.abs(s_rec.values + s_death.values - s_all.values)
        assert resid.max() < 1e-12
        for s in (s_all, s_rec, s_death):
            assert s.values.min() >= 0.0 and s.values.max() <= 1.0


def test_hand_computed_interior_cell():
    # Uniform exposure makes the local moments symmetric around (t, w) =
    # (3, 1), so the correction weight is identically one and the estimate is
    # a plain kernel-weighted ratio over the nine cells within reach of
    # b1 = b2 = 2 (offsets -1, 0, 1 with weights 0.28125, 0.375, 0.28125).
    T, W = 6, 3
    e = np.zeros((T, T))
    for u in range(T):
        for v in range(max(0, u - W), u + 1):
            e[u, v] = 1.0
    o = np.zeros((T, T))
    o[2, 1] = 0.25   # day offset +1, duration 1
    o[3, 2] = 0.5    # day offset 0, duration 1
    o[3, 3] = 0.25   # day offset 0, duration 0
    o[4, 2] = 0.125  # day offset -1, duration 2

    k0, k1 = 0.375, 0.28125
    num = 0.25 * (k1 * k0) + 0.5 * (k0 * k0) + 0.25 * (k0 * k1) + 0.125 * (k1 * k1)
    den = (k0 + 2 * k1) ** 2

    surf = estimate_single_surface(e, o, Bandwidths(2.0, 2.0), window=W)
    assert surf.defined[3, 1]
    assert surf.value_at(3, 1) == pytest.approx(num / den, abs=1e-12)


def test_monotone_in_occurrences_at_cell():
    rng = np.random.default_rng(19)
    for _ in range(10):
        e, o = random_matrices(rng, 8, 4)
        e += np.tril(np.ones((8, 8))) * (np.arange(8)[None, :] >= np.arange(8)[:, None] - 4)
        bands = Bandwidths(3.0, 3.0)
        before = estimate_single_surface(e, o, bands, window=4)
        t, w = 5, 2
        bumped = o.copy()
        bumped[t, t - w] += 1.0
        after = estimate_single_surface(e, bumped, bands, window=4)
        assert before.defined[t, w] and after.defined[t, w]
        assert after.value_at(t, w) >= before.value_at(t, w) - 1e-12
        assert after.value_at(t, w) <= 1.0


def test_values_clipped_to_unit_interval():
    rng = np.random.default_rng(23)
    e, _ = random_matrices(rng, 8, 4)
    e += np.tril(np.ones((8, 8))) * (np.arange(8)[None, :] >= np.arange(8)[:, None] - 4)
    surf = estimate_single_surface(e, 5.0 * e, Bandwidths(2.0, 2.0), window=4)
    assert np.all(surf.values[surf.defined] == 1.0)
    surf = estimate_single_surface(e, 0.0 * e, Bandwidths(2.0, 2.0), window=4)
    assert np.all(surf.values == 0.0)


def test_defined_within_feasible_triangle():
    rng = np.random.default_rng(29)
    for _ in range(5):
        grid = make_grid(rng, 10, 6)
        surf = estimate_hazard(grid, "all", Bandwidths(2.0, 2.0))
        t = np.arange(surf.n_days)[:, None]
        w = np.arange(surf.window + 1)[None, :]
        assert not np.any(surf.defined & (w > t))
        assert np.all(surf.values[~surf.defined] == 0.0)


def test_estimate_hazard_rejects_unknown_cause():
    grid = build_event_grid_full([(0, 1, "death")], n_days=4)
    with pytest.raises(ValueError):
        estimate_hazard(grid, "deaths", Bandwidths(2.0, 2.0))


# ---------------------------------------------------------------------------
# surface container


def test_constant_surface_and_cohort_slice():
    surf = constant_surface(0.2, n_days=8, window=4)
    w, values, defined = surf.cohort_slice(6)
    assert w.tolist() == [0, 1]
    assert np.all(values == 0.2) and np.all(defined)
    w, values, defined = surf.cohort_slice(0)
    assert w.tolist() == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        surf.cohort_slice(-1)
    with pytest.raises(ValueError):
        surf.cohort_slice(8)


def test_json_round_trip_is_exact():
    rng = np.random.default_rng(31)
    grid = make_grid(rng, 9, 4)
    surf = estimate_hazard(grid, "death", Bandwidths(3.0, 2.0))
    payload = json.loads(json.dumps(surf.to_json_dict()))
    back = surface_from_json_dict(payload)
    assert np.array_equal(back.values, surf.values)
    assert np.array_equal(back.defined, surf.defined)
    assert back.cause == "death" and back.window == 4
    assert back.bandwidths == surf.bandwidths


def test_csv_round_trip_is_exact():
    rng = np.random.default_rng(37)
    grid = make_grid(rng, 7, 3)
    surf = estimate_hazard(grid, "all", Bandwidths(2.0, 2.0))
    buf = io.StringIO()
    surf.to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,w,value,defined"
    values = np.zeros_like(surf.values)
    defined = np.zeros_like(surf.defined)
    for line in lines[1:]:
        t, w, val, flag = line.split(",")
        values[int(t), int(w)] = float(val)
        defined[int(t), int(w)] = bool(int(flag))
    assert np.array_equal(values, surf.values)
    assert np.array_equal(defined, surf.defined)
    assert surf.to_csv() == buf.getvalue()


def test_surface_shape_validation():
    values = np.zeros((4, 3))
    with pytest.raises(ValueError):
        HazardSurface(values, np.zeros((4, 2), dtype=bool), "all", None, window=2)
    with pytest.raises(ValueError):
        HazardSurface(values, values.astype(bool), "deceased", None, window=2)
    with pytest.raises(ValueError):
        HazardSurface(values, values.astype(bool), "all", None, window=4)
