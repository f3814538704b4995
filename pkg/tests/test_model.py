"""Fitting pipeline and directory persistence."""

from __future__ import annotations

import numpy as np
import pytest

from pandemon.forecast import ForecastScenario, run_forecast
from pandemon.kernels import Bandwidths
from pandemon.model import fit_panel, load_model, save_model
from pandemon.simulate import TrueModel, simulate_cohorts


@pytest.fixture(scope="module")
def panel():
    model = TrueModel.benchmark(T_sim=30, expected_admissions=600.0, window=10, outside_ratio=0.8)
    return simulate_cohorts(model, 314).panel


def test_fit_panel_explicit_bandwidths(panel):
    fitted = fit_panel(panel, bandwidths=(3.0, 5.0))
    assert fitted.bandwidths == Bandwidths(3.0, 5.0)
    assert fitted.cv is None
    assert fitted.window == min(60, panel.T - 1)
    resid = np.abs(fitted.surface_recovery.values + fitted.surface_death.values - fitted.surface_all.values)
    assert resid.max() < 1e-12
    assert fitted.surface("death") is fitted.surface_death
    assert fitted.diagnostics.bandwidths == fitted.bandwidths
    assert len(fitted.diagnostics.sup_rel_change) == fitted.diagnostics.iterations
    curve = fitted.ratio()
    assert curve.values.shape == (panel.T,)


def test_fit_panel_auto_selects_and_freezes(panel):
    fitted = fit_panel(panel, candidates=[3.0, 5.0])
    assert fitted.cv is not None
    assert fitted.cv.chosen == fitted.bandwidths
    assert len(fitted.cv.candidates) == 4


def test_fit_panel_rejects_unknown_spec(panel):
    with pytest.raises(ValueError):
        fit_panel(panel, bandwidths="fastest")


def test_refit_writes_byte_identical_artifacts(panel, tmp_path):
    a = save_model(fit_panel(panel, bandwidths=(3.0, 3.0)), tmp_path / "a")
    b = save_model(fit_panel(panel, bandwidths=(3.0, 3.0)), tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "surface_all.json" in names and "panel.csv" in names and "meta.json" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_save_load_round_trip(panel, tmp_path):
    fitted = fit_panel(panel, bandwidths=(3.0, 5.0))
    save_model(fitted, tmp_path / "m")
    loaded = load_model(tmp_path / "m")

    assert loaded.window == fitted.window
    assert loaded.bandwidths == fitted.bandwidths
    for cause in ("all", "recovery", "death"):
        assert np.array_equal(loaded.surface(cause).values, fitted.surface(cause).values)
        assert np.array_equal(loaded.surface(cause).defined, fitted.surface(cause).defined)
    assert np.array_equal(loaded.panel.n2, fitted.panel.n2)
    assert np.array_equal(loaded.panel.n_out, fitted.panel.n_out)
    assert loaded.panel.start_date == fitted.panel.start_date
    assert loaded.diagnostics == fitted.diagnostics

    scenario = ForecastScenario(cutoff=panel.T, horizon=7, c1=1.3, c2=0.9)
    assert np.array_equal(
        run_forecast(loaded, scenario).deaths_total,
        run_forecast(fitted, scenario).deaths_total,
    )


def test_cv_trace_saved_only_when_auto(panel, tmp_path):
    explicit = save_model(fit_panel(panel, bandwidths=(3.0, 3.0)), tmp_path / "explicit")
    assert not (explicit / "cv_trace.csv").exists()
    auto = save_model(fit_panel(panel, candidates=[3.0, 5.0]), tmp_path / "auto")
    assert (auto / "cv_trace.csv").exists()


def test_load_missing_directory_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "nope")
