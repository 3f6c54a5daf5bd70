"""FastAPI service exposing scenario runs, comparisons, and calibration.

Every endpoint is a pure function of its request body, so responses are
deterministic and safe to serve concurrently: each run owns its whole
state and shares nothing mutable.
"""

from __future__ import annotations

import dataclasses

from fastapi import FastAPI, HTTPException

from .. import calibration as cal
from ..data_io import TimeSeries
from ..engine import RunResult, SimConfig, SimulationAbort, run
from ..model import (
    SCENARIOS,
    PretermModel,
    UnknownParameterError,
    UnknownScenarioError,
    build_scenario,
    find_crossing_years,
)
from . import schemas


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def _sim_config(model: schemas.SimConfigModel) -> SimConfig:
    try:
        return SimConfig(
            start_time=model.start_time,
            end_time=model.end_time,
            dt=model.dt,
            save_interval=model.save_interval,
        )
    except ValueError as exc:
        raise _error(400, "config_error", str(exc)) from exc


def _execute(scenario: str, overrides: dict[str, float], config: SimConfig) -> RunResult:
    try:
        params, switches = build_scenario(scenario, overrides)
    except UnknownScenarioError as exc:
        raise _error(400, "unknown_scenario", str(exc)) from exc
    except UnknownParameterError as exc:
        raise _error(400, "unknown_parameter", str(exc)) from exc
    except ValueError as exc:
        raise _error(400, "config_error", str(exc)) from exc
    model = PretermModel(params, switches)
    try:
        return run(model, config, model.initial_state(config.start_time))
    except SimulationAbort as exc:
        raise _error(422, "simulation_abort", str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(
        title="preterm-sd",
        description="Stock-and-flow simulator of county preterm-birth dynamics",
        version="0.1.0",
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/scenarios")
    def scenarios() -> dict:
        return {"scenarios": sorted(SCENARIOS)}

    @app.post("/simulate/run", response_model=schemas.RunResponse)
    def simulate_run(req: schemas.RunRequest) -> schemas.RunResponse:
        config = _sim_config(req.config)
        result = _execute(req.scenario, req.overrides, config)
        return schemas.RunResponse(
            scenario=req.scenario,
            times=result.times,
            traces=result.traces,
            warnings=result.warnings,
        )

    @app.post("/simulate/compare", response_model=schemas.CompareResponse)
    def simulate_compare(req: schemas.CompareRequest) -> schemas.CompareResponse:
        config = _sim_config(req.config)
        baseline = req.scenarios[0]
        results: dict[str, RunResult] = {}
        for name in req.scenarios:
            if name not in results:
                results[name] = _execute(name, req.overrides, config)
        base_result = results[baseline]
        findings: list[schemas.CrossingFinding] = []
        for variable in req.variables:
            if variable not in base_result.traces:
                raise _error(400, "config_error", f"unknown variable: {variable!r}")
            for name in req.scenarios:
                if name == baseline:
                    continue
                other = results[name]
                base_trace = base_result.traces[variable]
                other_trace = other.traces[variable]
                crossings = find_crossing_years(
                    base_result.times, base_trace, other_trace
                )
                findings.append(
                    schemas.CrossingFinding(
                        variable=variable,
                        scenario=name,
                        crossing_years=crossings,
                        delta_at_end=other_trace[-1] - base_trace[-1],
                    )
                )
        return schemas.CompareResponse(
            baseline=baseline,
            times=base_result.times,
            runs={
                name: schemas.RunResponse(
                    scenario=name,
                    times=r.times,
                    traces=r.traces,
                    warnings=r.warnings,
                )
                for name, r in results.items()
            },
            findings=findings,
        )

    @app.post("/calibrate", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest) -> schemas.CalibrateResponse:
        if not req.free:
            raise _error(400, "config_error", "empty free set")
        try:
            params, switches = build_scenario(req.scenario, req.overrides)
        except (UnknownScenarioError, UnknownParameterError) as exc:
            raise _error(400, "config_error", str(exc)) from exc
        try:
            free = [
                cal.FreeParameter(f.name, f.lower, f.upper, f.initial) for f in req.free
            ]
        except ValueError as exc:
            raise _error(400, "config_error", str(exc)) from exc
        try:
            series = {
                name: TimeSeries(name, tuple(s.years), tuple(s.values))
                for name, s in req.series.items()
            }
        except ValueError as exc:
            raise _error(400, "config_error", str(exc)) from exc
        config = _sim_config(req.config) if req.config is not None else None
        try:
            result = cal.fit(
                free,
                series,
                weights=req.weights,
                base_params=params,
                switches=switches,
                config=config,
                max_evaluations=req.termination.max_evaluations,
                tolerance=req.termination.tolerance,
            )
        except cal.CalibrationError as exc:
            raise _error(422, "optimizer_failure", str(exc)) from exc
        except SimulationAbort as exc:
            raise _error(422, "simulation_abort", str(exc)) from exc
        fitted_params = dataclasses.replace(params, **result.values)
        model = PretermModel(fitted_params, switches)
        run_config = cal._calibration_config(config)
        fitted_run = run(model, run_config, model.initial_state(run_config.start_time))
        return schemas.CalibrateResponse(
            values=result.values,
            objective=result.objective,
            initial_objective=result.initial_objective,
            evaluations=result.evaluations,
            per_series={
                name: schemas.SeriesMetrics(rmse=rmse, mape=mape)
                for name, (rmse, mape) in result.per_series.items()
            },
            times=fitted_run.times,
            traces=fitted_run.traces,
        )

    return app


app = create_app()
