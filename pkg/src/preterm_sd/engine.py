"""Fixed-step simulation substrate.

Provides the generic pieces every run needs: clamped piecewise-linear
lookup tables, the PULSE builtin, first-order material delays and
information smooths, explicit Euler stock updates, and the run loop that
records yearly traces. Nothing in here knows about the preterm model.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

logger = logging.getLogger(__name__)

MATERIAL_DELAY = "material-delay"
INFORMATION_SMOOTH = "information-smooth"


class SimulationAbort(RuntimeError):
    """A non-finite value appeared during integration."""

    def __init__(self, time: float, variable: str, value: float):
        self.time = time
        self.variable = variable
        self.value = value
        super().__init__(
            f"non-finite value for '{variable}' at t={time}: {value!r}"
        )


@dataclass(frozen=True)
class LookupTable:
    """Piecewise-linear function over strictly increasing breakpoints.

    Evaluation clamps to the first/last y value outside the covered range.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) < 2:
            raise ValueError("lookup table needs at least 2 points")
        if len(self.xs) != len(self.ys):
            raise ValueError("lookup table xs and ys differ in length")
        for a, b in zip(self.xs, self.xs[1:]):
            if not a < b:
                raise ValueError(f"lookup x values not strictly increasing: {a} >= {b}")
        if any(not math.isfinite(v) for v in self.xs + self.ys):
            raise ValueError("lookup table contains non-finite values")

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]]) -> "LookupTable":
        return cls(tuple(float(x) for x, _ in points), tuple(float(y) for _, y in points))

    @property
    def points(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.xs, self.ys))

    def __call__(self, x: float) -> float:
        xs, ys = self.xs, self.ys
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        i = bisect_right(xs, x)
        x0, x1 = xs[i - 1], xs[i]
        y0, y1 = ys[i - 1], ys[i]
        return y0 + (x - x0) / (x1 - x0) * (y1 - y0)


def pulse(t: float, start: float, width: float) -> float:
    """1.0 on the right-open window [start, start + width), else 0.0."""
    if width < 0:
        raise ValueError("pulse width must be >= 0")
    return 1.0 if start <= t < start + width else 0.0


@dataclass(frozen=True)
class FirstOrderState:
    """State of a first-order material delay or information smooth.

    A material delay stores in-transit material (level = output * tau);
    a smooth stores the output itself. Both relax exponentially toward a
    constant input.
    """

    kind: str
    level: float
    tau: float

    def __post_init__(self):
        if self.kind not in (MATERIAL_DELAY, INFORMATION_SMOOTH):
            raise ValueError(f"unknown first-order kind: {self.kind!r}")
        if not self.tau > 0:
            raise ValueError("first-order time constant must be positive")

    @property
    def output(self) -> float:
        if self.kind == MATERIAL_DELAY:
            return self.level / self.tau
        return self.level

    def step(self, u: float, dt: float) -> "FirstOrderState":
        """Advance one Euler step with input u, returning the new state."""
        if self.kind == MATERIAL_DELAY:
            new_level = self.level + dt * (u - self.level / self.tau)
        else:
            new_level = self.level + dt * (u - self.level) / self.tau
        return replace(self, level=new_level)


def first_order_init(kind: str, init_output: float, tau: float) -> FirstOrderState:
    """State whose output equals init_output before any step."""
    if kind == MATERIAL_DELAY:
        return FirstOrderState(kind, init_output * tau, tau)
    return FirstOrderState(kind, init_output, tau)


def euler_step(stocks: Sequence[float], net_flows: Sequence[float], dt: float) -> list[float]:
    """stock_i + dt * net_flow_i, elementwise."""
    if len(stocks) != len(net_flows):
        raise ValueError("stocks and net_flows differ in length")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return [s + dt * f for s, f in zip(stocks, net_flows)]


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step integration window with a coarser save cadence."""

    start_time: float = 1995.0
    end_time: float = 2022.0
    dt: float = 1.0 / 16.0
    save_interval: float = 1.0

    def __post_init__(self):
        if not self.start_time < self.end_time:
            raise ValueError("start_time must precede end_time")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        ratio = self.save_interval / self.dt
        if abs(ratio - round(ratio)) > 1e-12 * max(1.0, ratio):
            raise ValueError("dt must evenly divide save_interval")
        span = (self.end_time - self.start_time) / self.dt
        if abs(span - round(span)) > 1e-9 * max(1.0, span):
            raise ValueError("dt must evenly divide the simulated span")

    @property
    def steps_per_save(self) -> int:
        return round(self.save_interval / self.dt)

    @property
    def n_steps(self) -> int:
        return round((self.end_time - self.start_time) / self.dt)


@dataclass
class RunResult:
    """Saved times plus one equally long value sequence per variable."""

    times: list[float]
    traces: dict[str, list[float]]
    warnings: list[str] = field(default_factory=list)

    def trace(self, name: str) -> list[float]:
        return self.traces[name]

    def at(self, name: str, time: float) -> float:
        for t, v in zip(self.times, self.traces[name]):
            if t == time:
                return v
        raise KeyError(f"no saved value of '{name}' at t={time}")


class SteppableModel(Protocol):
    def step(self, state, t: float, dt: float):  # -> (next_state, aux mapping)
        ...


def run(model: SteppableModel, config: SimConfig, initial_state) -> RunResult:
    """Integrate from start_time to end_time, recording auxiliaries.

    Deterministic for identical inputs. Aborts with SimulationAbort on the
    first non-finite auxiliary. Variables listed in model.warn_nonnegative
    emit a warning (once each per run) when they go negative, but do not
    halt the run.
    """
    times: list[float] = []
    traces: dict[str, list[float]] = {}
    warnings: list[str] = []
    warned: set[str] = set()
    watch = tuple(getattr(model, "warn_nonnegative", ()))

    state = initial_state
    steps_per_save = config.steps_per_save
    for i in range(config.n_steps + 1):
        t = config.start_time + i * config.dt
        next_state, aux = model.step(state, t, config.dt)
        for name, value in aux.items():
            if not math.isfinite(value):
                raise SimulationAbort(t, name, value)
        for name in watch:
            if name not in warned and aux.get(name, 0.0) < 0.0:
                warned.add(name)
                message = f"stock '{name}' went negative at t={t}: {aux[name]}"
                logger.warning(message)
                warnings.append(message)
        if i % steps_per_save == 0:
            times.append(t)
            if not traces:
                traces = {name: [] for name in aux}
            for name, value in aux.items():
                traces[name].append(value)
        state = next_state
    return RunResult(times=times, traces=traces, warnings=warnings)
