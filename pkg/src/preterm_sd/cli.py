"""Command-line client for the simulation service.

The CLI is a thin client: it posts requests to the FastAPI service
(in-process by default, or a remote `--server` URL) and turns the JSON
responses into the CSV/SVG artifacts on disk.

Exit codes: 0 success, 1 configuration error, 2 simulation abort,
3 optimizer failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import httpx

from .data_io import (
    ChartPanel,
    ChartSeries,
    DataBundle,
    DataFormatError,
    export_comparison,
    export_run,
    load_bundle,
    render_chart,
)
from .engine import RunResult

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIM_ABORT = 2
EXIT_OPTIMIZER = 3

_CODE_EXITS = {
    "config_error": EXIT_CONFIG,
    "unknown_scenario": EXIT_CONFIG,
    "unknown_parameter": EXIT_CONFIG,
    "simulation_abort": EXIT_SIM_ABORT,
    "optimizer_failure": EXIT_OPTIMIZER,
}

COMPARE_VARIABLES = ("pbr", "healthcare_allocation", "vul_pop", "total_pop")

# Which historical series overlays which trace in charts.
_OVERLAYS = {
    "pbr": ("pbr_history", lambda b: b.pbr_history),
    "total_pop": ("total population", lambda b: b.total_population),
    "vul_pop": ("vulnerable population", lambda b: b.vulnerable_population),
}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_CONFIG):
        super().__init__(message)
        self.exit_code = exit_code


def _make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=300.0)
    # In-process transport against the bundled service.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient
    from .service.app import create_app

    return TestClient(create_app())


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = None
    if isinstance(detail, dict) and "code" in detail:
        raise CliError(
            detail.get("message", "service error"),
            _CODE_EXITS.get(detail["code"], EXIT_CONFIG),
        )
    raise CliError(f"service error ({response.status_code}): {response.text}", EXIT_CONFIG)


def _parse_set(values: list[str]) -> dict[str, float]:
    overrides: dict[str, float] = {}
    for item in values:
        name, sep, raw = item.partition("=")
        if not sep:
            raise CliError(f"--set expects name=value, got {item!r}")
        try:
            overrides[name.strip()] = float(raw)
        except ValueError:
            raise CliError(f"--set {name}: not a number: {raw!r}") from None
    return overrides


def _load_config_file(path: str | None) -> tuple[dict, dict[str, float]]:
    """Config JSON: optional SimConfig fields plus a `parameters` override map."""
    if not path:
        return {}, {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise CliError(f"config {path}: expected a JSON object")
    overrides = raw.pop("parameters", {})
    sim_keys = {"start_time", "end_time", "dt", "save_interval"}
    unknown = set(raw) - sim_keys
    if unknown:
        raise CliError(f"config {path}: unknown keys {sorted(unknown)}")
    return raw, {str(k): float(v) for k, v in overrides.items()}


def _build_config(args: argparse.Namespace) -> tuple[dict, dict[str, float]]:
    config, overrides = _load_config_file(args.config)
    if args.dt is not None:
        config["dt"] = args.dt
    if args.start is not None:
        config["start_time"] = args.start
    if args.end is not None:
        config["end_time"] = args.end
    overrides.update(_parse_set(args.set or []))
    return config, overrides


def _data_dir(args: argparse.Namespace, required: bool = False) -> str | None:
    data_dir = args.data_dir or os.environ.get("SD_DATA_DIR")
    if required and not data_dir:
        raise CliError("no data directory; pass --data-dir or set SD_DATA_DIR")
    return data_dir


def _load_bundle_opt(data_dir: str | None) -> DataBundle | None:
    if not data_dir:
        return None
    try:
        return load_bundle(data_dir)
    except (OSError, DataFormatError) as exc:
        raise CliError(f"cannot load data bundle: {exc}") from exc


def _run_result(payload: dict) -> RunResult:
    return RunResult(
        times=payload["times"],
        traces=payload["traces"],
        warnings=payload.get("warnings", []),
    )


def _trace_panels(result: RunResult, label: str, bundle: DataBundle | None) -> list[ChartPanel]:
    panels = []
    for trace_name, title in (("pbr", "Preterm birth rate (%)"), ("total_pop", "Population")):
        series = [
            ChartSeries(
                label=f"{label} (simulated)",
                x=tuple(result.times),
                y=tuple(result.traces[trace_name]),
            )
        ]
        if bundle is not None and trace_name in _OVERLAYS:
            overlay_label, getter = _OVERLAYS[trace_name]
            hist = getter(bundle)
            series.append(
                ChartSeries(
                    label=f"{overlay_label} (historical)",
                    x=tuple(float(y) for y in hist.years),
                    y=tuple(hist.values),
                    historical=True,
                )
            )
        panels.append(ChartPanel(title=title, series=tuple(series)))
    return panels


def cmd_run(args: argparse.Namespace, client: httpx.Client) -> int:
    config, overrides = _build_config(args)
    bundle = _load_bundle_opt(_data_dir(args))
    payload = {"scenario": args.scenario, "overrides": overrides}
    if config:
        payload["config"] = config
    data = _post(client, "/simulate/run", payload)
    result = _run_result(data)
    os.makedirs(args.output_dir, exist_ok=True)
    csv_path = os.path.join(args.output_dir, f"{args.scenario}.csv")
    svg_path = os.path.join(args.output_dir, f"{args.scenario}.svg")
    export_run(result, csv_path)
    render_chart(_trace_panels(result, args.scenario, bundle), svg_path)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {csv_path} and {svg_path}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, client: httpx.Client) -> int:
    if len(args.scenarios) < 2:
        raise CliError("compare needs at least two scenarios")
    config, overrides = _build_config(args)
    payload = {
        "scenarios": args.scenarios,
        "overrides": overrides,
        "variables": list(COMPARE_VARIABLES),
    }
    if config:
        payload["config"] = config
    data = _post(client, "/simulate/compare", payload)
    os.makedirs(args.output_dir, exist_ok=True)
    times = data["times"]
    runs = data["runs"]
    ordered = list(dict.fromkeys(args.scenarios))
    for variable in COMPARE_VARIABLES:
        columns = {name: runs[name]["traces"][variable] for name in ordered}
        export_comparison(
            times, columns, os.path.join(args.output_dir, f"compare_{variable}.csv")
        )
        panel = ChartPanel(
            title=variable,
            series=tuple(
                ChartSeries(label=name, x=tuple(times), y=tuple(columns[name]))
                for name in ordered
            ),
        )
        render_chart([panel], os.path.join(args.output_dir, f"compare_{variable}.svg"))

    findings_path = os.path.join(args.output_dir, "findings.json")
    with open(findings_path, "w", newline="") as fh:
        json.dump({"baseline": data["baseline"], "findings": data["findings"]}, fh, indent=2)
        fh.write("\n")
    summary_path = os.path.join(args.output_dir, "findings.txt")
    with open(summary_path, "w", newline="") as fh:
        for finding in data["findings"]:
            years = finding["crossing_years"]
            year_text = ", ".join(str(y) for y in years) if years else "none"
            fh.write(
                f"{finding['variable']}: {finding['scenario']} vs {data['baseline']}: "
                f"crossing years: {year_text}; "
                f"end delta: {finding['delta_at_end']:+.6g}\n"
            )
    print(f"wrote comparison outputs to {args.output_dir}")
    return EXIT_OK


def _load_calibration_spec(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read calibration spec {path}: {exc}") from exc
    if not isinstance(spec, dict):
        raise CliError(f"calibration spec {path}: expected a JSON object")
    return spec


def cmd_calibrate(args: argparse.Namespace, client: httpx.Client) -> int:
    config, overrides = _build_config(args)
    bundle = _load_bundle_opt(_data_dir(args, required=True))
    spec = _load_calibration_spec(args.spec)

    if "free" in spec:
        free = spec["free"]
        if not free:
            raise CliError("empty free set")
    else:
        from .calibration import default_free_parameters

        free = [
            {"name": f.name, "lower": f.lower, "upper": f.upper, "initial": f.initial}
            for f in default_free_parameters()
        ]

    series = {
        name: {"years": list(ts.years), "values": list(ts.values)}
        for name, ts in bundle.calibration_series().items()
    }
    payload: dict = {
        "series": series,
        "free": free,
        "scenario": args.scenario,
        "overrides": overrides,
    }
    if "weights" in spec:
        payload["weights"] = spec["weights"]
    if "termination" in spec:
        payload["termination"] = spec["termination"]
    if config:
        calib_config = {"start_time": 1995.0, "end_time": 2017.0}
        calib_config.update(config)
        payload["config"] = calib_config

    data = _post(client, "/calibrate", payload)
    os.makedirs(args.output_dir, exist_ok=True)
    fit_path = os.path.join(args.output_dir, "fit_result.json")
    with open(fit_path, "w", newline="") as fh:
        json.dump(
            {k: data[k] for k in ("values", "objective", "initial_objective",
                                  "evaluations", "per_series")},
            fh,
            indent=2,
        )
        fh.write("\n")
    result = _run_result(data)
    export_run(result, os.path.join(args.output_dir, "calibrated.csv"))
    render_chart(
        _trace_panels(result, "calibrated", bundle),
        os.path.join(args.output_dir, "calibrated.svg"),
    )
    for name, m in data["per_series"].items():
        print(f"{name}: MAPE {m['mape']:.2f}%  RMSE {m['rmse']:.4g}")
    print(f"objective {data['objective']:.6g} after {data['evaluations']} evaluations")
    print(f"wrote calibration outputs to {args.output_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preterm-sd",
        description="Run, compare, and calibrate county preterm-birth scenarios.",
    )
    parser.add_argument("--server", help="URL of a running service; default is in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with SimConfig fields and parameters")
        p.add_argument("--data-dir", help="historical data directory (or SD_DATA_DIR)")
        p.add_argument("--output-dir", default=".", help="where to write artifacts")
        p.add_argument("--dt", type=float, help="integration step in years")
        p.add_argument("--start", type=float, help="start year")
        p.add_argument("--end", type=float, help="end year")
        p.add_argument(
            "--set",
            action="append",
            metavar="NAME=VALUE",
            help="override a parameter or switch (repeatable)",
        )

    p_run = sub.add_parser("run", help="run one scenario and export its traces")
    p_run.add_argument("--scenario", default="base")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run scenarios against the first one")
    p_cmp.add_argument("scenarios", nargs="+", help="scenario names; first is the baseline")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_cal = sub.add_parser("calibrate", help="fit free parameters to historical data")
    p_cal.add_argument("--scenario", default="base")
    p_cal.add_argument("--spec", help="calibration spec JSON (free set, weights, termination)")
    common(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        client = _make_client(args.server)
        try:
            return args.func(args, client)
        finally:
            client.close()
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
