"""Historical-data calibration of the model's scalar parameters.

Normalized sum-of-squares objective over the 1995-2017 window, minimized
by derivative-free simplex descent with box constraints. Free parameters
are scalar rates and fractions only; the model structure and its lookup
tables stay fixed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .data_io import DataBundle, TimeSeries
from .engine import RunResult, SimConfig, run
from .model import Parameters, PretermModel, Switches, _PARAM_NAMES

CALIBRATION_WINDOW = (1995.0, 2017.0)

DEFAULT_WEIGHTS = {
    "pbr": 1.0,
    "total_population": 1.0,
    "vulnerable_population": 1.0,
}

# Which trace each calibration series is compared against.
SERIES_TRACES = {
    "pbr": "pbr",
    "total_population": "total_pop",
    "vulnerable_population": "vul_pop",
}


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FreeParameter:
    name: str
    lower: float
    upper: float
    initial: float

    def __post_init__(self):
        if self.name not in _PARAM_NAMES:
            raise ValueError(f"unknown parameter: {self.name!r}")
        if not self.lower <= self.initial <= self.upper:
            raise ValueError(
                f"{self.name}: initial {self.initial} outside [{self.lower}, {self.upper}]"
            )


def default_free_parameters(base: Parameters | None = None) -> list[FreeParameter]:
    """The scalars that dominate the population split and migration."""
    p = base or Parameters()
    return [
        FreeParameter("relative_vul_immigration", 0.0, 1.0, p.relative_vul_immigration),
        FreeParameter("shock_magnitude", 0.0, 0.7, p.shock_magnitude),
        FreeParameter("frac_becoming_vulnerable", 0.0, 1.0, p.frac_becoming_vulnerable),
        FreeParameter("initial_percent_vul", 0.15, 0.4, p.initial_percent_vul),
        FreeParameter("relative_contribution_vul", 0.3, 1.0, p.relative_contribution_vul),
    ]


@dataclass
class FitResult:
    values: dict[str, float]
    objective: float
    evaluations: int
    per_series: dict[str, tuple[float, float]]  # name -> (rmse, mape)
    initial_objective: float = math.nan

    def to_jsonable(self) -> dict:
        return {
            "values": self.values,
            "objective": self.objective,
            "evaluations": self.evaluations,
            "initial_objective": self.initial_objective,
            "per_series": {
                name: {"rmse": rmse, "mape": mape}
                for name, (rmse, mape) in self.per_series.items()
            },
        }


def _simulate(params: Parameters, switches: Switches, config: SimConfig) -> RunResult:
    model = PretermModel(params, switches)
    return run(model, config, model.initial_state(config.start_time))


def _calibration_config(config: SimConfig | None) -> SimConfig:
    if config is not None:
        return config
    return SimConfig(start_time=CALIBRATION_WINDOW[0], end_time=CALIBRATION_WINDOW[1])


def _series_error(result: RunResult, series: TimeSeries, trace_name: str) -> tuple[float, int]:
    """Sum of squared normalized errors over overlapping years."""
    sim = {t: v for t, v in zip(result.times, result.traces[trace_name])}
    obs_pairs = [(y, v) for y, v in zip(series.years, series.values) if float(y) in sim]
    if not obs_pairs:
        raise CalibrationError(
            f"no overlap between simulated years and data series '{series.name}'"
        )
    mean_obs = sum(v for _, v in obs_pairs) / len(obs_pairs)
    total = sum(((sim[float(y)] - v) / mean_obs) ** 2 for y, v in obs_pairs)
    return total, len(obs_pairs)


def objective(
    params: Parameters,
    data: DataBundle | Mapping[str, TimeSeries],
    weights: Mapping[str, float] | None = None,
    switches: Switches | None = None,
    config: SimConfig | None = None,
) -> float:
    """Weighted normalized SSE of simulation against the historical series."""
    weights = dict(weights) if weights is not None else dict(DEFAULT_WEIGHTS)
    switches = switches or Switches()
    series = data.calibration_series() if isinstance(data, DataBundle) else dict(data)
    result = _simulate(params, switches, _calibration_config(config))
    total = 0.0
    for name, weight in weights.items():
        if name not in series:
            continue
        err, _ = _series_error(result, series[name], SERIES_TRACES[name])
        total += weight * err
    return total


def metrics(
    result: RunResult,
    data: DataBundle | Mapping[str, TimeSeries],
) -> dict[str, tuple[float, float]]:
    """Per-series (RMSE, MAPE percent) over overlapping years."""
    series = data.calibration_series() if isinstance(data, DataBundle) else dict(data)
    out: dict[str, tuple[float, float]] = {}
    for name, obs in series.items():
        trace_name = SERIES_TRACES.get(name, name)
        if trace_name not in result.traces:
            continue
        sim = {t: v for t, v in zip(result.times, result.traces[trace_name])}
        pairs = [(sim[float(y)], v) for y, v in zip(obs.years, obs.values) if float(y) in sim]
        if not pairs:
            raise CalibrationError(f"no overlap for series '{name}'")
        rmse = math.sqrt(sum((s - o) ** 2 for s, o in pairs) / len(pairs))
        mape = 100.0 * sum(abs(s - o) / abs(o) for s, o in pairs) / len(pairs)
        out[name] = (rmse, mape)
    return out


def fit(
    free: Sequence[FreeParameter],
    data: DataBundle | Mapping[str, TimeSeries],
    weights: Mapping[str, float] | None = None,
    base_params: Parameters | None = None,
    switches: Switches | None = None,
    config: SimConfig | None = None,
    max_evaluations: int = 2000,
    tolerance: float = 1e-8,
) -> FitResult:
    """Simplex descent over the free parameters within their boxes."""
    if not free:
        raise CalibrationError("empty free set")
    base = base_params or Parameters()
    switches = switches or Switches()
    config = _calibration_config(config)
    names = [f.name for f in free]
    bounds = [(f.lower, f.upper) for f in free]
    x0 = np.array([f.initial for f in free], dtype=float)

    n_evals = 0
    any_finite = False

    def f(x: np.ndarray) -> float:
        nonlocal n_evals, any_finite
        n_evals += 1
        values = {n: float(np.clip(v, lo, hi)) for n, v, (lo, hi) in zip(names, x, bounds)}
        params = dataclasses.replace(base, **values)
        try:
            val = objective(params, data, weights, switches, config)
        except (CalibrationError, ValueError, OverflowError):
            return math.inf
        if math.isfinite(val):
            any_finite = True
            return val
        return math.inf

    initial_objective = f(x0)
    result = minimize(
        f,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "maxfev": max_evaluations,
            "fatol": tolerance,
            "xatol": 1e-10,
            "adaptive": True,
        },
    )
    if not any_finite:
        raise CalibrationError("objective was non-finite at every evaluation")

    best_x = result.x if result.fun <= initial_objective else x0
    best_obj = min(float(result.fun), initial_objective)
    values = {
        n: float(np.clip(v, lo, hi)) for n, v, (lo, hi) in zip(names, best_x, bounds)
    }
    fitted = dataclasses.replace(base, **values)
    fitted_run = _simulate(fitted, switches, config)
    per_series = metrics(fitted_run, data)
    return FitResult(
        values=values,
        objective=best_obj,
        evaluations=n_evals,
        per_series=per_series,
        initial_objective=initial_objective,
    )


def synthetic_bundle(
    params: Parameters,
    switches: Switches | None = None,
    config: SimConfig | None = None,
) -> dict[str, TimeSeries]:
    """Model-generated series, for self-consistency checks."""
    config = _calibration_config(config)
    result = _simulate(params, switches or Switches(), config)
    years = tuple(int(t) for t in result.times)
    return {
        name: TimeSeries(name, years, tuple(result.traces[trace]))
        for name, trace in SERIES_TRACES.items()
    }
