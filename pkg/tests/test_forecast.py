"""Indicators, death forecasts and the C2 holdout search."""

from __future__ import annotations

import json

import numpy as np
import pytest

from pandemon.forecast import (
    DEFAULT_C2_GRID,
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
from pandemon.hazard import constant_surface
from pandemon.panel import DailyPanel


def make_panel(n2, n3, n4, n_out=None):
    return DailyPanel(
        start_date="2020-03-01",
        n2=np.array(n2),
        n3=np.array(n3),
        n4=np.array(n4),
        n_out=None if n_out is None else np.array(n_out),
    )


def flat_ratio(value):
    return RatioCurve(
        values=np.array([value]),
        floor_applied=np.array([False]),
        bandwidth_num=14.0,
        bandwidth_den=14.0,
        floor=0.5,
    )


class Fitted:
    """Minimal stand-in for a fitted model: the protocol run_forecast needs."""

    def __init__(self, panel, surface_all, surface_death, ratio_curve):
        self.panel = panel
        self.surface_all = surface_all
        self.surface_death = surface_death
        self._ratio = ratio_curve

    def ratio(self):
        return self._ratio


# ---------------------------------------------------------------------------
# ratio curve


def test_ratio_of_identical_series_is_one():
    T = 20
    panel = make_panel([10] * T, [2] * T, [5] * T, n_out=[5] * T)
    curve = estimate_ratio(panel)
    assert np.abs(curve.values - 1.0).max() < 1e-12
    assert not curve.floor_applied.any()
    assert curve.last == pytest.approx(1.0, abs=1e-12)


def test_ratio_scales_linearly():
    T = 15
    panel = make_panel([20] * T, [2] * T, [4] * T, n_out=[8] * T)
    curve = estimate_ratio(panel)
    assert np.abs(curve.values - 2.0).max() < 1e-12
    zero = estimate_ratio(make_panel([20] * T, [2] * T, [4] * T, n_out=[0] * T))
    assert np.all(zero.values == 0.0)


def test_ratio_floor_binds_without_hospital_deaths():
    T = 10
    panel = make_panel([10] * T, [1] * T, [0] * T, n_out=[3] * T)
    curve = estimate_ratio(panel)
    assert curve.floor_applied.all()
    assert np.abs(curve.values - 3.0 / 0.5).max() < 1e-12


def test_ratio_requires_out_of_hospital_series():
    panel = make_panel([10, 10], [1, 1], [1, 1])
    with pytest.raises(ValueError, match="n_out"):
        estimate_ratio(panel)


# ---------------------------------------------------------------------------
# indicator extrapolation


def test_extrapolation_closed_forms():
    assert extrapolate_ratio(0.5, 3.0, 10, 10) == pytest.approx(1.5, abs=1e-15)
    assert extrapolate_ratio(0.5, 3.0, 10, 5) == pytest.approx(1.0, abs=1e-15)
    for step in range(1, 11):
        assert extrapolate_ratio(0.7, 1.0, 10, step) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(ValueError):
        extrapolate_ratio(0.5, 2.0, 10, 0)
    with pytest.raises(ValueError):
        extrapolate_ratio(0.5, 2.0, 10, 11)


def test_extrapolation_is_linear_and_hits_c2_exactly():
    rng = np.random.default_rng(2)
    for _ in range(20):
        g_last = float(rng.uniform(0.01, 3.0))
        c2 = float(rng.uniform(0.0, 4.0))
        h = int(rng.integers(2, 40))
        path = np.array([extrapolate_ratio(g_last, c2, h, s) for s in range(1, h + 1)])
        assert path[-1] == pytest.approx(c2 * g_last, rel=1e-15, abs=1e-300)
        if h > 2:
            second_diff = np.diff(path, n=2)
            assert np.abs(second_diff).max() < 1e-14 * max(1.0, abs(g_last))


# ---------------------------------------------------------------------------
# admissions


def test_admissions_persistence_and_bending():
    T = 25
    panel = make_panel([7] * T, [0] * T, [0] * T)
    flat = forecast_admissions(panel, ForecastScenario(cutoff=T, horizon=10, c1=1.0))
    assert np.abs(flat - 7.0).max() < 1e-10
    bent = forecast_admissions(panel, ForecastScenario(cutoff=T, horizon=10, c1=1.542))
    assert bent[-1] == pytest.approx(1.542 * 7.0, abs=1e-9)
    assert bent[4] == pytest.approx(7.0 * (1.0 + 0.542 * 0.5), abs=1e-9)
    down = forecast_admissions(panel, ForecastScenario(cutoff=T, horizon=10, c1=0.0))
    assert down[-1] == pytest.approx(0.0, abs=1e-10)
    assert np.all(down >= 0.0)


def test_admissions_override_wins_verbatim():
    panel = make_panel([5, 5, 5], [0] * 3, [0] * 3)
    scenario = ForecastScenario(cutoff=3, horizon=4, c1=2.0)
    path = [1.0, 0.0, 12.5, 3.0]
    out = forecast_admissions(panel, scenario, override=path)
    assert out.tolist() == path
    with pytest.raises(ValueError):
        forecast_admissions(panel, scenario, override=[1.0, 2.0])
    with pytest.raises(ValueError):
        forecast_admissions(panel, scenario, override=[1.0, -2.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        forecast_admissions(panel, scenario, override=[1.0, np.nan, 0.0, 0.0])


def test_scenario_validation():
    with pytest.raises(ValueError):
        ForecastScenario(cutoff=0, horizon=5)
    with pytest.raises(ValueError):
        ForecastScenario(cutoff=5, horizon=0)
    with pytest.raises(ValueError):
        ForecastScenario(cutoff=5, horizon=5, c1=-0.1)
    with pytest.raises(ValueError):
        ForecastScenario(cutoff=5, horizon=5, c2=float("inf"))


# ---------------------------------------------------------------------------
# in-hospital deaths


def test_zero_death_hazard_forecasts_zero():
    T = 3
    panel = make_panel([50, 0, 0], [0, 0, 0], [0, 0, 0])
    scenario = ForecastScenario(cutoff=T, horizon=5)
    all_s = constant_surface(0.2, T, window=2)
    death_s = constant_surface(0.0, T, window=2)
    deaths = forecast_in_hospital_deaths(all_s, death_s, panel, scenario, np.full(5, 9.0))
    assert np.all(deaths == 0.0)


def test_single_cohort_geometric_decay():
    # 100 standing patients, constant all-cause = death hazard 0.1:
    # expected deaths 10, 9, 8.1, ...
    T = 3
    panel = make_panel([100, 0, 0], [0, 0, 0], [0, 0, 0])
    scenario = ForecastScenario(cutoff=T, horizon=4)
    surf = constant_surface(0.1, T, window=2)
    deaths = forecast_in_hospital_deaths(surf, surf, panel, scenario, np.zeros(4))
    expected = 100.0 * 0.1 * 0.9 ** np.arange(4)
    assert np.abs(deaths - expected).max() < 1e-10


def test_new_admissions_enter_at_duration_zero():
    T = 2
    panel = make_panel([0, 0], [0, 0], [0, 0])  # empty hospital at cutoff
    scenario = ForecastScenario(cutoff=T, horizon=3)
    surf = constant_surface(0.1, T, window=1)
    deaths = forecast_in_hospital_deaths(surf, surf, panel, scenario, np.array([50.0, 0.0, 0.0]))
    assert deaths[0] == pytest.approx(5.0, abs=1e-12)
    assert deaths[1] == pytest.approx(4.5, abs=1e-12)
    assert deaths[2] == pytest.approx(4.05, abs=1e-12)


def test_certain_exit_spreads_cohorts_by_admissions():
    # hazard one: model survival mass vanishes although people remain, so the
    # standing population falls back to admission-count shares
    T = 2
    panel = make_panel([10, 10], [0, 0], [0, 0])
    scenario = ForecastScenario(cutoff=T, horizon=2)
    surf = constant_surface(1.0, T, window=1)
    deaths = forecast_in_hospital_deaths(surf, surf, panel, scenario, np.array([7.0, 3.0]))
    assert deaths[0] == pytest.approx(27.0, abs=1e-12)  # 20 standing + 7 admitted
    assert deaths[1] == pytest.approx(3.0, abs=1e-12)


def test_forecast_input_validation():
    T = 3
    panel = make_panel([10, 0, 0], [0, 0, 0], [0, 0, 0])
    surf = constant_surface(0.1, T, window=2)
    with pytest.raises(ValueError):
        forecast_in_hospital_deaths(surf, surf, panel, ForecastScenario(cutoff=2, horizon=3), np.zeros(3))
    with pytest.raises(ValueError):
        forecast_in_hospital_deaths(surf, surf, panel, ForecastScenario(cutoff=3, horizon=3), np.zeros(2))


# ---------------------------------------------------------------------------
# assembled totals


def test_total_deaths_identity_and_arithmetic():
    scenario = ForecastScenario(cutoff=5, horizon=4, c2=2.732)
    deaths_in = np.array([10.0, 8.0, 6.0, 4.0])
    result = forecast_total_deaths(deaths_in, flat_ratio(0.5), scenario)
    steps = np.arange(1, 5)
    expected_g = 0.5 * (1.0 + 1.732 * steps / 4.0)
    assert np.abs(result.g_tilde - expected_g).max() < 1e-12
    assert np.abs(result.deaths_out - deaths_in * expected_g).max() < 1e-12
    assert np.abs(result.deaths_total - deaths_in * (1.0 + expected_g)).max() < 1e-12
    assert np.abs(result.deaths_total - (result.deaths_in + result.deaths_out)).max() < 1e-12
    with pytest.raises(ValueError):
        forecast_total_deaths(np.zeros(3), flat_ratio(0.5), scenario)


def test_result_exports():
    scenario = ForecastScenario(cutoff=7, horizon=3, c1=1.2, c2=0.8)
    deaths_in = np.array([3.0, 2.5, 2.0])
    result = forecast_total_deaths(deaths_in, flat_ratio(1.25), scenario, admissions=np.array([4.0, 4.0, 4.0]))
    payload = json.loads(json.dumps(result.to_json_dict()))
    assert payload["scenario"] == {"T": 7, "h": 3, "c1": 1.2, "c2": 0.8}
    assert payload["series"]["deaths_in"] == deaths_in.tolist()
    assert payload["series"]["deaths_total"] == result.deaths_total.tolist()

    lines = result.to_csv().strip().splitlines()
    assert lines[0] == "step,day,admissions,deaths_in,g_tilde,deaths_out,deaths_total"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "1" and first[1] == "7"
    assert float(first[3]) == result.deaths_in[0]
    assert float(first[6]) == result.deaths_total[0]


def test_run_forecast_persistence_scenario():
    T = 12
    panel = make_panel([30] * T, [0] * T, [0] * T, n_out=[0] * T)
    surf = constant_surface(0.05, T, window=6)
    fitted = Fitted(panel, surf, surf, flat_ratio(0.4))
    scenario = ForecastScenario(cutoff=T, horizon=6)
    result = run_forecast(fitted, scenario)
    assert np.abs(result.admissions - 30.0).max() < 1e-9
    assert np.abs(result.g_tilde - 0.4).max() < 1e-15
    assert np.abs(result.deaths_total - result.deaths_in * 1.4).max() < 1e-12
    assert np.all(result.deaths_in > 0.0)


# ---------------------------------------------------------------------------
# C2 holdout search


def holdout_fixture():
    # fitted on one day: 64 standing patients, hazard 1/2, ratio exactly 1
    fit_panel = make_panel([64], [0], [0], n_out=[0])
    surf = constant_surface(0.5, 1, window=0)
    fitted = Fitted(fit_panel, surf, surf, flat_ratio(1.0))
    # holdout totals equal the persistence forecast: deaths_in [32, 16, 8]
    # doubled by the unit ratio, split evenly between the two death columns
    full = make_panel(
        [64, 0, 0, 0],
        [0, 0, 0, 0],
        [0, 32, 16, 8],
        n_out=[0, 32, 16, 8],
    )
    return fitted, full


def test_c2_search_recovers_persistence():
    fitted, full = holdout_fixture()
    result = optimize_c2(fitted, full, horizon=3, admissions_override=[0.0, 0.0, 0.0])
    assert result.c2_star == 1.0
    assert len(result.grid) == 76
    assert result.sse.min() == pytest.approx(0.0, abs=1e-18)
    assert np.count_nonzero(result.sse == result.sse.min()) == 1

    cumulative = optimize_c2(fitted, full, horizon=3, admissions_override=[0.0, 0.0, 0.0], cumulative=True)
    assert cumulative.c2_star == 1.0


def test_c2_default_grid_shape():
    assert len(DEFAULT_C2_GRID) == 76
    assert DEFAULT_C2_GRID[0] == 0.25 and DEFAULT_C2_GRID[-1] == 4.0
    assert 1.0 in DEFAULT_C2_GRID


def test_c2_search_validation():
    fitted, full = holdout_fixture()
    with pytest.raises(ValueError):
        optimize_c2(fitted, full, horizon=9)
    no_out = make_panel([64, 0, 0, 0], [0] * 4, [0, 32, 16, 8])
    with pytest.raises(ValueError, match="n_out"):
        optimize_c2(fitted, no_out, horizon=3)
    with pytest.raises(ValueError):
        optimize_c2(fitted, full, horizon=3, c2_grid=[])


# ---------------------------------------------------------------------------
# stay indicators


def test_median_stay_closed_forms():
    T = 30
    assert median_stay(constant_surface(0.1, T, 20), 0) == 6
    assert median_stay(constant_surface(0.5, T, 20), 0) == 0
    assert median_stay(constant_surface(0.0, T, 20), 0) is None
    # window too short for the median to be reached
    assert median_stay(constant_surface(0.1, T, 3), 0) is None
    # cohort admitted near the end of the panel runs out of observed days
    assert median_stay(constant_surface(0.1, T, 20), T - 2) is None
    with pytest.raises(ValueError):
        median_stay(constant_surface(0.1, T, 20), T)


def test_exit_probability_shares_and_mass():
    T, W = 40, 25
    rec_s = constant_surface(0.06, T, W)
    death_s = constant_surface(0.01, T, W)
    split = exit_probability(rec_s, death_s, s=0)
    assert split.recovery / (split.recovery + split.death) == pytest.approx(6.0 / 7.0, abs=1e-12)
    assert split.recovery + split.death + split.truncated_mass == pytest.approx(1.0, abs=1e-12)
    assert split.truncated_mass == pytest.approx(0.93 ** (W + 1), abs=1e-12)
    assert split.for_cause("recovery") == split.recovery
    assert split.for_cause("death") == split.death
    with pytest.raises(ValueError):
        split.for_cause("all")


def test_exit_probability_days_in():
    T, W = 20, 10
    rec_s = constant_surface(0.2, T, W)
    death_s = constant_surface(0.1, T, W)
    fresh = exit_probability(rec_s, death_s, s=0, days_in=0)
    seasoned = exit_probability(rec_s, death_s, s=0, days_in=4)
    # constant hazards: the conditional split is duration-free
    assert seasoned.recovery / seasoned.death == pytest.approx(fresh.recovery / fresh.death, abs=1e-12)
    assert seasoned.recovery < fresh.recovery
    beyond = exit_probability(rec_s, death_s, s=0, days_in=W + 5)
    assert beyond.recovery == 0.0 and beyond.death == 0.0 and beyond.truncated_mass == 1.0
    with pytest.raises(ValueError):
        exit_probability(rec_s, death_s, s=0, days_in=-1)


def test_exit_probability_mass_identity_random_surfaces():
    rng = np.random.default_rng(97)
    T, W = 15, 8
    feasible = np.arange(W + 1)[None, :] <= np.arange(T)[:, None]
    from pandemon.hazard import HazardSurface

    for _ in range(20):
        p3 = rng.uniform(0.0, 0.5, size=(T, W + 1))
        p4 = rng.uniform(0.0, 0.4, size=(T, W + 1))
        rec_s = HazardSurface(np.where(feasible, p3, 0.0), feasible, "recovery", None, W)
        death_s = HazardSurface(np.where(feasible, p4, 0.0), feasible, "death", None, W)
        s = int(rng.integers(0, T))
        split = exit_probability(rec_s, death_s, s=s)
        assert split.recovery + split.death + split.truncated_mass == pytest.approx(1.0, abs=1e-9)
