import dataclasses
import math

import pytest

from preterm_sd.calibration import (
    CALIBRATION_WINDOW,
    CalibrationError,
    FreeParameter,
    default_free_parameters,
    fit,
    metrics,
    objective,
    synthetic_bundle,
)
from preterm_sd.data_io import TimeSeries
from preterm_sd.engine import SimConfig, run
from preterm_sd.model import Parameters, PretermModel


@pytest.fixture(scope="module")
def base_params():
    return Parameters()


@pytest.fixture(scope="module")
def synthetic(base_params):
    return synthetic_bundle(base_params)


@pytest.fixture(scope="module")
def calibration_run(base_params):
    model = PretermModel(base_params)
    config = SimConfig(start_time=CALIBRATION_WINDOW[0], end_time=CALIBRATION_WINDOW[1])
    return run(model, config, model.initial_state(config.start_time))


class TestFreeParameter:
    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown parameter"):
            FreeParameter("no_such_param", 0.0, 1.0, 0.5)

    def test_initial_outside_bounds_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            FreeParameter("shock_magnitude", 0.0, 0.7, 0.9)

    def test_defaults_start_at_base_values(self, base_params):
        for fp in default_free_parameters(base_params):
            assert fp.initial == getattr(base_params, fp.name)
            assert fp.lower <= fp.initial <= fp.upper


class TestObjective:
    def test_zero_on_self_generated_data(self, base_params, synthetic):
        assert objective(base_params, synthetic) == pytest.approx(0.0, abs=1e-18)

    def test_weight_linearity(self, base_params, synthetic):
        perturbed = dataclasses.replace(base_params, shock_magnitude=0.3)
        one = objective(perturbed, synthetic, weights={"pbr": 1.0})
        three = objective(perturbed, synthetic, weights={"pbr": 3.0})
        assert three == pytest.approx(3.0 * one, rel=1e-12)
        assert one > 0.0

    def test_sums_over_series(self, base_params, synthetic):
        perturbed = dataclasses.replace(base_params, shock_magnitude=0.3)
        parts = [
            objective(perturbed, synthetic, weights={name: 1.0})
            for name in ("pbr", "total_population", "vulnerable_population")
        ]
        whole = objective(perturbed, synthetic)
        assert whole == pytest.approx(sum(parts), rel=1e-12)

    def test_uniform_offset_oracle(self, base_params, synthetic):
        # shift every observation up by 1% of the series mean: each residual
        # becomes 0.01*mean normalized by the new mean 1.01*mean, so the
        # objective is exactly n_years * (0.01/1.01)^2
        obs = synthetic["pbr"]
        mean = sum(obs.values) / len(obs)
        shifted = TimeSeries("pbr", obs.years, tuple(v + 0.01 * mean for v in obs.values))
        got = objective(base_params, {"pbr": shifted}, weights={"pbr": 1.0})
        expected = len(obs) * (0.01 / 1.01) ** 2
        assert got == pytest.approx(expected, rel=1e-9)

    def test_no_overlap_raises(self, base_params):
        lonely = TimeSeries("pbr", (1950,), (10.0,))
        with pytest.raises(CalibrationError, match="no overlap"):
            objective(base_params, {"pbr": lonely}, weights={"pbr": 1.0})


class TestMetrics:
    def test_perfect_fit_is_zero(self, calibration_run, synthetic):
        for rmse, mape in metrics(calibration_run, synthetic).values():
            assert rmse == pytest.approx(0.0, abs=1e-12)
            assert mape == pytest.approx(0.0, abs=1e-12)

    def test_multiplicative_error_oracle(self, calibration_run, synthetic):
        # obs = 1.1 * sim gives |sim - obs| / obs = 1/11 at every year
        obs = synthetic["pbr"]
        scaled = TimeSeries("pbr", obs.years, tuple(1.1 * v for v in obs.values))
        _, mape = metrics(calibration_run, {"pbr": scaled})["pbr"]
        assert mape == pytest.approx(100.0 / 11.0, rel=1e-9)

    def test_constant_offset_rmse(self, calibration_run, synthetic):
        obs = synthetic["pbr"]
        shifted = TimeSeries("pbr", obs.years, tuple(v + 0.5 for v in obs.values))
        rmse, _ = metrics(calibration_run, {"pbr": shifted})["pbr"]
        assert rmse == pytest.approx(0.5, rel=1e-9)


class TestFit:
    def test_empty_free_set_rejected(self, synthetic):
        with pytest.raises(CalibrationError, match="empty"):
            fit([], synthetic)

    def test_recovers_single_parameter(self, base_params):
        true = dataclasses.replace(base_params, shock_magnitude=0.45)
        data = synthetic_bundle(true)
        free = [FreeParameter("shock_magnitude", 0.0, 0.7, 0.2)]
        result = fit(free, data, base_params=base_params)
        assert result.values["shock_magnitude"] == pytest.approx(0.45, abs=1e-4)
        assert result.objective < 1e-10
        assert result.objective <= result.initial_objective

    def test_recovers_two_parameters(self, base_params):
        true = dataclasses.replace(
            base_params, shock_magnitude=0.5, frac_becoming_vulnerable=0.35
        )
        data = synthetic_bundle(true)
        free = [
            FreeParameter("shock_magnitude", 0.0, 0.7, 0.2),
            FreeParameter("frac_becoming_vulnerable", 0.0, 1.0, 0.5),
        ]
        result = fit(free, data, base_params=base_params)
        assert result.values["shock_magnitude"] == pytest.approx(0.5, abs=1e-3)
        assert result.values["frac_becoming_vulnerable"] == pytest.approx(0.35, abs=1e-3)

    def test_deterministic(self, base_params):
        true = dataclasses.replace(base_params, shock_magnitude=0.45)
        data = synthetic_bundle(true)
        free = [FreeParameter("shock_magnitude", 0.0, 0.7, 0.2)]
        a = fit(free, data, base_params=base_params)
        b = fit(free, data, base_params=base_params)
        assert a.values == b.values
        assert a.objective == b.objective
        assert a.evaluations == b.evaluations

    def test_never_worse_than_start(self, base_params, synthetic):
        # starting at the optimum, the fit must not drift away from it
        free = [FreeParameter("shock_magnitude", 0.0, 0.7, base_params.shock_magnitude)]
        result = fit(free, synthetic, base_params=base_params, max_evaluations=50)
        assert result.objective <= result.initial_objective
        assert result.initial_objective == pytest.approx(0.0, abs=1e-18)

    def test_respects_bounds(self, base_params):
        # data generated outside the box: the fitted value must stay inside
        true = dataclasses.replace(base_params, shock_magnitude=0.65)
        data = synthetic_bundle(true)
        free = [FreeParameter("shock_magnitude", 0.0, 0.5, 0.2)]
        result = fit(free, data, base_params=base_params)
        assert 0.0 <= result.values["shock_magnitude"] <= 0.5

    def test_to_jsonable_round_trips(self, base_params):
        import json

        true = dataclasses.replace(base_params, shock_magnitude=0.45)
        data = synthetic_bundle(true)
        free = [FreeParameter("shock_magnitude", 0.0, 0.7, 0.2)]
        result = fit(free, data, base_params=base_params, max_evaluations=100)
        blob = json.loads(json.dumps(result.to_jsonable()))
        assert set(blob) == {
            "values",
            "objective",
            "evaluations",
            "initial_objective",
            "per_series",
        }
        assert math.isfinite(blob["objective"])
