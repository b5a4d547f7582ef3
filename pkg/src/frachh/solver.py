"""Explicit Euler integration of the gate-noise model against a sampled fBm driver.

One scheme step from state (m, h, n, V) with driver increments dB:

    x' = x + b(x) dt + sigma(x) dB

followed by the configured gate policy. Continuous-time theory keeps the gates
in [0,1], but the Euler image of the cube need not stay inside it, so the
default `clamp_and_log` policy projects gates back onto [0,1] and records every
event; the clamp count is a discretization artifact and shrinks as dt does.
`error_on_exit` instead raises once a gate leaves [0,1] by more than 1e-9.

Stochastic runs are restricted to Hurst parameters in ]1/2,1[, where the
pathwise integral is a Young integral and the explicit first-order scheme is
justified; the static boundary conditions checked in `viability` hold more
widely, but this solver does not.

Driver increments for step k are B((k+1) dt) - B(k dt) from a single
pre-sampled path; nothing is re-sampled inside a run, which is what makes runs
reproducible and lets `convergence_probe` refine dt on a common noise path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import fbm, viability
from .fbm import GENERATOR_WOOD_CHAN, GENERATORS
from .kinetics import HHParams, State, rates

__all__ = [
    "CLAMP_AND_LOG",
    "ERROR_ON_EXIT",
    "CLAMP_POLICIES",
    "SolverConfig",
    "ClampEvent",
    "StepResult",
    "SimulationResult",
    "ViabilityBreachError",
    "DivergenceError",
    "ConvergenceTable",
    "step_euler",
    "simulate",
    "simulate_deterministic",
    "convergence_probe",
    "write_trajectory_csv",
    "write_clamp_csv",
]

CLAMP_AND_LOG = "clamp_and_log"
ERROR_ON_EXIT = "error_on_exit"
CLAMP_POLICIES = (CLAMP_AND_LOG, ERROR_ON_EXIT)

# error_on_exit tolerates boundary overshoot up to this much before raising.
_BREACH_TOL = 1e-9

_GATE_NAMES = ("m", "h", "n")


class ViabilityBreachError(RuntimeError):
    """A gate left [0,1] by more than the tolerance under error_on_exit."""

    def __init__(self, step: int, coord: str, pre_value: float):
        super().__init__(
            f"gate {coord} left [0,1] at step {step} (pre-clamp value {pre_value!r}); "
            f"tolerance {_BREACH_TOL}"
        )
        self.step = step
        self.coord = coord
        self.pre_value = pre_value


class DivergenceError(RuntimeError):
    """The state became non-finite during integration."""

    def __init__(self, step: int):
        super().__init__(f"state became non-finite at step {step}; reduce dt")
        self.step = step


class ClampEvent(NamedTuple):
    """One gate projection: 0-based step index, gate name, raw pre-clamp value."""

    step: int
    coord: str
    pre_value: float


@dataclass(frozen=True)
class SolverConfig:
    """Integration setup: horizon T, step dt (dt must divide T up to rounding),
    Hurst parameter for stochastic runs (ignored when all sigmas are zero),
    driver seed, gate policy and fBm generator."""

    T: float = 50.0
    dt: float = 0.01
    hurst_H: float = 0.75
    seed: int = 0
    clamp_policy: str = CLAMP_AND_LOG
    generator: str = GENERATOR_WOOD_CHAN

    def __post_init__(self) -> None:
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive and finite, got {self.T!r}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt!r}")
        n = round(self.T / self.dt)
        if n < 1 or abs(n * self.dt - self.T) > 1e-6 * self.T:
            raise ValueError(f"dt={self.dt} must divide T={self.T} up to rounding")
        if not (0.0 < self.hurst_H < 1.0):
            raise ValueError(f"hurst_H must lie in ]0,1[, got {self.hurst_H!r}")
        if self.clamp_policy not in CLAMP_POLICIES:
            raise ValueError(
                f"clamp_policy must be one of {CLAMP_POLICIES}, got {self.clamp_policy!r}"
            )
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}, got {self.generator!r}")

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Full trajectory plus the bookkeeping the invariants are asserted on.

    `trajectory` has one row per grid point, columns (m, h, n, V).
    `gate_pre_clamp_min/max` are the extremes of the raw gate proposals before
    any projection, so boundary overshoot is visible even under clamping.
    """

    grid: np.ndarray
    trajectory: np.ndarray
    clamp_events: tuple[ClampEvent, ...]
    driver_seed: int
    max_abs_V: float
    apriori_bound: float
    bound_satisfied: bool
    gate_pre_clamp_min: float
    gate_pre_clamp_max: float

    @property
    def voltage(self) -> np.ndarray:
        return self.trajectory[:, 3]

    @property
    def gates(self) -> np.ndarray:
        return self.trajectory[:, :3]

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    def state(self, i: int) -> State:
        return State.from_array(self.trajectory[i])

    @property
    def final_state(self) -> State:
        return self.state(self.grid.size - 1)


class StepResult(NamedTuple):
    state: State
    clamp_events: tuple[ClampEvent, ...]


def _apply_policy(value: float, coord_index: int, step: int, policy: str,
                  events: list[ClampEvent]) -> float:
    if 0.0 <= value <= 1.0:
        return value
    if policy == ERROR_ON_EXIT and (value < -_BREACH_TOL or value > 1.0 + _BREACH_TOL):
        raise ViabilityBreachError(step=step, coord=_GATE_NAMES[coord_index], pre_value=value)
    events.append(ClampEvent(step=step, coord=_GATE_NAMES[coord_index], pre_value=value))
    return min(1.0, max(0.0, value))


def step_euler(
    x: State,
    dt: float,
    dB: Sequence[float],
    params: HHParams,
    policy: str = CLAMP_AND_LOG,
    step: int = 0,
) -> StepResult:
    """One explicit Euler step x + b(x) dt + sigma(x) dB with the gate policy
    applied afterwards; `step` only labels any clamp events raised here."""
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError(f"dt must be positive and finite, got {dt!r}")
    if not x.gates_in_unit_box():
        raise ValueError(f"state gates must lie in [0,1], got {x!r}")
    if policy not in CLAMP_POLICIES:
        raise ValueError(f"unknown clamp policy {policy!r}")
    db1, db2, db3 = (float(b) for b in dB)
    am, bm, ah, bh, an, bn = rates(x.V)
    m, h, n, v = x.m, x.h, x.n, x.V
    raw_m = m + (am - (am + bm) * m) * dt + params.sigma_1 * m * (1.0 - m) * db1
    raw_h = h + (ah - (ah + bh) * h) * dt + params.sigma_2 * h * (1.0 - h) * db2
    raw_n = n + (an - (an + bn) * n) * dt + params.sigma_3 * n * (1.0 - n) * db3
    ion = (
        params.gbar_Na * m * m * m * h * (v - params.E_Na)
        + params.gbar_K * n * n * n * n * (v - params.E_K)
        + params.gbar_L * (v - params.E_L)
    )
    new_v = v + (params.current_I - ion) / params.capacitance_C * dt
    events: list[ClampEvent] = []
    new_m = _apply_policy(raw_m, 0, step, policy, events)
    new_h = _apply_policy(raw_h, 1, step, policy, events)
    new_n = _apply_policy(raw_n, 2, step, policy, events)
    if not all(math.isfinite(c) for c in (new_m, new_h, new_n, new_v)):
        raise DivergenceError(step=step)
    return StepResult(State(new_m, new_h, new_n, new_v), tuple(events))


def _integrate(
    x0: State,
    params: HHParams,
    dt: float,
    n_steps: int,
    increments: np.ndarray | None,
    policy: str,
) -> tuple[np.ndarray, list[ClampEvent], float, float]:
    """Scalar integration loop shared by `simulate` and `convergence_probe`.

    Returns (trajectory, clamp events, raw gate minimum, raw gate maximum).
    """
    C = params.capacitance_C
    I = params.current_I
    g_na, g_k, g_l = params.gbar_Na, params.gbar_K, params.gbar_L
    e_na, e_k, e_l = params.E_Na, params.E_K, params.E_L
    s1, s2, s3 = params.sigmas
    error_on_exit = policy == ERROR_ON_EXIT

    if increments is not None:
        inc1 = increments[:, 0].tolist()
        inc2 = increments[:, 1].tolist()
        inc3 = increments[:, 2].tolist()

    m, h, n, v = x0.m, x0.h, x0.n, x0.V
    traj = np.empty((n_steps + 1, 4))
    traj[0] = (m, h, n, v)
    events: list[ClampEvent] = []
    pre_min = min(m, h, n)
    pre_max = max(m, h, n)

    for k in range(n_steps):
        am, bm, ah, bh, an, bn = rates(v)
        new_m = m + (am - (am + bm) * m) * dt
        new_h = h + (ah - (ah + bh) * h) * dt
        new_n = n + (an - (an + bn) * n) * dt
        ion = (
            g_na * m * m * m * h * (v - e_na)
            + g_k * n * n * n * n * (v - e_k)
            + g_l * (v - e_l)
        )
        new_v = v + (I - ion) / C * dt
        if increments is not None:
            new_m += s1 * m * (1.0 - m) * inc1[k]
            new_h += s2 * h * (1.0 - h) * inc2[k]
            new_n += s3 * n * (1.0 - n) * inc3[k]

        if new_m < pre_min:
            pre_min = new_m
        elif new_m > pre_max:
            pre_max = new_m
        if new_h < pre_min:
            pre_min = new_h
        elif new_h > pre_max:
            pre_max = new_h
        if new_n < pre_min:
            pre_min = new_n
        elif new_n > pre_max:
            pre_max = new_n

        if new_m < 0.0 or new_m > 1.0:
            if error_on_exit and (new_m < -_BREACH_TOL or new_m > 1.0 + _BREACH_TOL):
                raise ViabilityBreachError(step=k, coord="m", pre_value=new_m)
            events.append(ClampEvent(step=k, coord="m", pre_value=new_m))
            new_m = min(1.0, max(0.0, new_m))
        if new_h < 0.0 or new_h > 1.0:
            if error_on_exit and (new_h < -_BREACH_TOL or new_h > 1.0 + _BREACH_TOL):
                raise ViabilityBreachError(step=k, coord="h", pre_value=new_h)
            events.append(ClampEvent(step=k, coord="h", pre_value=new_h))
            new_h = min(1.0, max(0.0, new_h))
        if new_n < 0.0 or new_n > 1.0:
            if error_on_exit and (new_n < -_BREACH_TOL or new_n > 1.0 + _BREACH_TOL):
                raise ViabilityBreachError(step=k, coord="n", pre_value=new_n)
            events.append(ClampEvent(step=k, coord="n", pre_value=new_n))
            new_n = min(1.0, max(0.0, new_n))

        if not (
            math.isfinite(new_v)
            and math.isfinite(new_m)
            and math.isfinite(new_h)
            and math.isfinite(new_n)
        ):
            raise DivergenceError(step=k)

        m, h, n, v = new_m, new_h, new_n, new_v
        traj[k + 1, 0] = m
        traj[k + 1, 1] = h
        traj[k + 1, 2] = n
        traj[k + 1, 3] = v

    return traj, events, pre_min, pre_max


def _require_start_in_box(x0: State) -> None:
    if not x0.is_finite() or not x0.gates_in_unit_box():
        raise ValueError(f"initial state must lie in [0,1]^3 x R, got {x0!r}")


def _check_stochastic_hurst(config: SolverConfig) -> None:
    if not (0.5 < config.hurst_H < 1.0):
        raise ValueError(
            f"stochastic runs need a Hurst parameter in ]1/2,1[ (Young-integral "
            f"range of the explicit scheme), got {config.hurst_H}; the boundary "
            f"viability conditions themselves hold for H in ]1/4,1[, but this "
            f"solver does not integrate below 1/2"
        )


def simulate(x0: State, params: HHParams, config: SolverConfig) -> SimulationResult:
    """Integrate the model over [0, T] against a freshly sampled three-component
    driver (skipped when all sigmas are zero). Deterministic given its inputs."""
    _require_start_in_box(x0)
    n = config.n_steps
    if params.is_deterministic:
        increments = None
    else:
        _check_stochastic_hurst(config)
        driver = fbm.sample_driver(
            n, n * config.dt, config.hurst_H, config.seed, config.generator
        )
        increments = driver.increments()
    traj, events, pre_min, pre_max = _integrate(
        x0, params, config.dt, n, increments, config.clamp_policy
    )
    max_abs_v = float(np.abs(traj[:, 3]).max())
    bound = viability.apriori_voltage_bound(params, x0, n * config.dt)
    return SimulationResult(
        grid=config.grid,
        trajectory=traj,
        clamp_events=tuple(events),
        driver_seed=config.seed,
        max_abs_V=max_abs_v,
        apriori_bound=bound,
        bound_satisfied=max_abs_v <= bound,
        gate_pre_clamp_min=pre_min,
        gate_pre_clamp_max=pre_max,
    )


def simulate_deterministic(x0: State, params: HHParams, config: SolverConfig) -> SimulationResult:
    """`simulate` with the noise amplitudes forced to zero."""
    return simulate(
        x0, replace(params, sigma_1=0.0, sigma_2=0.0, sigma_3=0.0), config
    )


@dataclass(frozen=True)
class ConvergenceTable:
    """Sup-norm gaps of coarser runs against the finest run on a common driver
    path, plus an estimated convergence order.

    The order is the log-log slope over gaps between *consecutive* refinement
    levels, not over the to-finest gaps in `entries`: a to-finest gap carries
    the factor (1 - (dt_finest/dt)^p), which varies along the ladder and biases
    the naive slope upward by ~0.2-0.3 for a 16:1 ladder. None when fewer than
    two consecutive gaps are positive."""

    entries: tuple[tuple[float, float], ...]
    observed_order: float | None

    def gaps(self) -> list[float]:
        return [g for _, g in self.entries]


def convergence_probe(
    x0: State,
    params: HHParams,
    T: float,
    H: float,
    seed: int,
    dt_list: Sequence[float],
    clamp_policy: str = CLAMP_AND_LOG,
    generator: str = GENERATOR_WOOD_CHAN,
) -> ConvergenceTable:
    """Dyadic step-refinement study on one noise path.

    The driver is sampled once at the finest dt; coarser runs see block sums of
    the same increments (the piecewise-linear restriction of one path), so the
    gaps isolate the scheme error. `dt_list` must be dyadically nested.
    """
    _require_start_in_box(x0)
    if len(dt_list) == 0:
        raise ValueError("dt_list must not be empty")
    dts = sorted((float(d) for d in dt_list), reverse=True)
    dt_fine = dts[-1]
    blocks = []
    for d in dts:
        j = round(math.log2(d / dt_fine))
        if j < 0 or abs(d - dt_fine * 2 ** j) > 1e-9 * d:
            raise ValueError(f"dt_list must be dyadically nested, {d} is not a "
                             f"power-of-two multiple of {dt_fine}")
        n = round(T / d)
        if n < 1 or abs(n * d - T) > 1e-6 * T:
            raise ValueError(f"every dt must divide T={T}, got {d}")
        blocks.append(2 ** j)

    n_fine = round(T / dt_fine)
    if params.is_deterministic:
        fine_increments = None
    else:
        if not (0.5 < float(H) < 1.0):
            raise ValueError(f"stochastic refinement needs H in ]1/2,1[, got {H}")
        fine_increments = fbm.sample_driver(
            n_fine, n_fine * dt_fine, H, seed, generator
        ).increments()

    trajectories: dict[float, np.ndarray] = {}
    for d, block in zip(dts, blocks):
        if fine_increments is None:
            increments = None
        else:
            n_coarse = n_fine // block
            increments = fine_increments.reshape(n_coarse, block, 3).sum(axis=1)
        traj, _, _, _ = _integrate(x0, params, d, round(T / d), increments, clamp_policy)
        trajectories[d] = traj

    finest = trajectories[dt_fine]
    entries = []
    for d, block in zip(dts, blocks):
        if d == dt_fine:
            continue
        coarse = trajectories[d]
        gap = float(np.abs(coarse - finest[::block]).max())
        entries.append((d, gap))

    consecutive = []
    for (da, ba), (db, bb) in zip(zip(dts, blocks), zip(dts[1:], blocks[1:])):
        stride = ba // bb
        gap = float(np.abs(trajectories[da] - trajectories[db][::stride]).max())
        if gap > 0.0:
            consecutive.append((da, gap))
    order = None
    if len(consecutive) >= 2:
        log_dt = np.log([d for d, _ in consecutive])
        log_gap = np.log([g for _, g in consecutive])
        order = float(np.polyfit(log_dt, log_gap, 1)[0])
    return ConvergenceTable(entries=tuple(entries), observed_order=order)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_trajectory_csv(result: SimulationResult, path) -> None:
    """Rows `t,V,m,h,n` with 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,V,m,h,n\n")
        for t, (m, h, n, v) in zip(result.grid, result.trajectory):
            fh.write(f"{t:.17g},{v:.17g},{m:.17g},{h:.17g},{n:.17g}\n")


def write_clamp_csv(result: SimulationResult, path) -> None:
    """Rows `step,coord,pre_value`; step is the 0-based index of the Euler step
    whose raw proposal was projected."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,coord,pre_value\n")
        for ev in result.clamp_events:
            fh.write(f"{ev.step},{ev.coord},{ev.pre_value:.17g}\n")
