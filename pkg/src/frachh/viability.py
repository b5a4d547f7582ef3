"""Numerical verification that the model cannot push the gates out of [0,1]^3.

The constraint set is K = [0,1]^3 x R (gates in the unit cube, voltage free).
For a box the normal cone at a boundary point is finitely generated by signed
coordinate axes of the active faces, so checking the extreme rays suffices:
the inner product is linear in the cone element. The check evaluates, over a
boundary sampling plan,

    <s, b(x)>        <= 0   for every generator s (drift points inward), and
    <s, sigma_k(x)>   = 0   for every generator s and noise column k,

and additionally that the voltage row of sigma vanishes, which the
non-explosion argument for the unbounded V direction needs. Violations are
data, not errors; the report records the worst offenders.

`apriori_voltage_bound` turns the linear growth of the voltage drift on K into
an exponential-in-time bound on |V| via Gronwall's lemma. The constant is read
off the parameter magnitudes, so the bound is a non-explosion certificate, not
a tight envelope; at the classic parameter scale it overflows to inf.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import kinetics
from .kinetics import HHParams, State

__all__ = [
    "NormalConeSample",
    "BoundarySamplingPlan",
    "ViabilityReport",
    "normal_cone_generators",
    "normal_cone_sample",
    "check_viability",
    "linear_growth_constant",
    "apriori_voltage_bound",
]

# Gate coordinates within 1e-12 of a face count as on it.
_FACE_ATOL = 1e-12
# A violation is real once it exceeds 1e-12 of the observed field scale.
_VIOLATION_RTOL = 1e-12

_GATE_NAMES = ("m", "h", "n")


def normal_cone_generators(x: State, atol: float = _FACE_ATOL) -> list[np.ndarray]:
    """Extreme rays of the normal cone to [0,1]^3 x R at `x`.

    One signed basis vector per active gate face: -e_i where x_i = 0, +e_i
    where x_i = 1. The voltage direction never contributes (K is all of R
    there). Interior points get an empty list.
    """
    generators = []
    for i, value in enumerate(x.gates):
        if abs(value) <= atol:
            e = np.zeros(4)
            e[i] = -1.0
            generators.append(e)
        elif abs(value - 1.0) <= atol:
            e = np.zeros(4)
            e[i] = 1.0
            generators.append(e)
    return generators


@dataclass(frozen=True)
class NormalConeSample:
    """A boundary point together with the extreme rays of its normal cone."""

    boundary_point: State
    generators: list[np.ndarray]


def normal_cone_sample(x: State) -> NormalConeSample:
    generators = normal_cone_generators(x)
    if not generators:
        raise ValueError(f"state {x!r} has no gate coordinate on a face of [0,1]^3")
    return NormalConeSample(boundary_point=x, generators=generators)


def _default_v_grid() -> np.ndarray:
    return np.arange(-50.0, 151.0, 10.0)


def _default_interior_grid() -> np.ndarray:
    return np.linspace(0.1, 0.9, 5)


@dataclass(frozen=True)
class BoundarySamplingPlan:
    """Deterministic sweep of the gate-cube boundary crossed with a voltage grid.

    Every face, edge and corner of [0,1]^3 appears: each gate coordinate is
    either pinned to 0, pinned to 1, or runs over `interior_values`, with at
    least one pinned coordinate. The voltage runs over `v_values` throughout.
    """

    v_values: np.ndarray = field(default_factory=_default_v_grid)
    interior_values: np.ndarray = field(default_factory=_default_interior_grid)

    def boundary_states(self) -> Iterator[State]:
        choices = {0: (0.0,), 1: (1.0,), 2: tuple(float(g) for g in self.interior_values)}
        for mask in itertools.product((0, 1, 2), repeat=3):
            if mask == (2, 2, 2):
                continue
            for m, h, n in itertools.product(choices[mask[0]], choices[mask[1]], choices[mask[2]]):
                for v in self.v_values:
                    yield State(m, h, n, float(v))

    def interior_states(self) -> Iterator[State]:
        """Companion interior sweep, used only for the voltage-row-of-sigma scan
        (a row that vanishes on the boundary could still be nonzero inside)."""
        grid = tuple(float(g) for g in self.interior_values)
        for m, h, n in itertools.product(grid, grid, grid):
            for v in self.v_values:
                yield State(m, h, n, float(v))


@dataclass(frozen=True)
class ViabilityReport:
    """Outcome of the boundary sweep; `passed` means no violation above
    1e-12 of the observed drift/diffusion scale."""

    points_checked: int
    interior_points_checked: int
    max_drift_violation: float
    max_diffusion_violation: float
    drift_tolerance: float
    diffusion_tolerance: float
    passed: bool
    worst_drift_point: State | None
    worst_diffusion_point: State | None

    def to_dict(self) -> dict:
        def state_dict(x: State | None):
            if x is None:
                return None
            return {"m": x.m, "h": x.h, "n": x.n, "V": x.V}

        return {
            "points_checked": self.points_checked,
            "interior_points_checked": self.interior_points_checked,
            "max_drift_violation": self.max_drift_violation,
            "max_diffusion_violation": self.max_diffusion_violation,
            "drift_tolerance": self.drift_tolerance,
            "diffusion_tolerance": self.diffusion_tolerance,
            "pass": self.passed,
            "worst_drift_point": state_dict(self.worst_drift_point),
            "worst_diffusion_point": state_dict(self.worst_diffusion_point),
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_viability(
    params: HHParams,
    plan: BoundarySamplingPlan | None = None,
    drift_fn: Callable[[State], np.ndarray] | None = None,
    diffusion_fn: Callable[[State], np.ndarray] | None = None,
) -> ViabilityReport:
    """Sweep the boundary plan and report the worst inward-drift and
    noise-tangency violations for (b, sigma).

    `drift_fn` / `diffusion_fn` default to the model fields with `params`;
    passing replacements is how adversarial fields are audited.
    """
    plan = plan or BoundarySamplingPlan()
    drift_fn = drift_fn or (lambda x: kinetics.drift(x, params))
    diffusion_fn = diffusion_fn or (lambda x: kinetics.diffusion(x, params))

    points = 0
    max_drift = -math.inf
    max_diff = 0.0
    drift_scale = 0.0
    diff_scale = 0.0
    worst_drift_point: State | None = None
    worst_diff_point: State | None = None

    for x in plan.boundary_states():
        points += 1
        b = np.asarray(drift_fn(x), dtype=float)
        sigma = np.asarray(diffusion_fn(x), dtype=float)
        for s in normal_cone_generators(x):
            sb = float(s @ b)
            drift_scale = max(drift_scale, abs(sb))
            if sb > max_drift:
                max_drift = sb
                worst_drift_point = x
            for k in range(sigma.shape[1]):
                ssig = abs(float(s @ sigma[:, k]))
                if ssig > max_diff:
                    max_diff = ssig
                    worst_diff_point = x
        row_v = float(np.max(np.abs(sigma[3, :])))
        diff_scale = max(diff_scale, float(np.max(np.abs(sigma))))
        if row_v > max_diff:
            max_diff = row_v
            worst_diff_point = x

    interior_points = 0
    for x in plan.interior_states():
        interior_points += 1
        sigma = np.asarray(diffusion_fn(x), dtype=float)
        diff_scale = max(diff_scale, float(np.max(np.abs(sigma))))
        row_v = float(np.max(np.abs(sigma[3, :])))
        if row_v > max_diff:
            max_diff = row_v
            worst_diff_point = x

    drift_tol = _VIOLATION_RTOL * max(1.0, drift_scale)
    diff_tol = _VIOLATION_RTOL * max(1.0, diff_scale)
    return ViabilityReport(
        points_checked=points,
        interior_points_checked=interior_points,
        max_drift_violation=max_drift,
        max_diffusion_violation=max_diff,
        drift_tolerance=drift_tol,
        diffusion_tolerance=diff_tol,
        passed=(max_drift <= drift_tol) and (max_diff <= diff_tol),
        worst_drift_point=worst_drift_point,
        worst_diffusion_point=worst_diff_point,
    )


def linear_growth_constant(params: HHParams) -> float:
    """Constant c1 with |b_V(p, v)| <= c1 (1 + ||p|| + |v|) on K, read off the
    parameter magnitudes (conservative by design)."""
    affine = (
        abs(params.current_I)
        + params.gbar_Na * abs(params.E_Na)
        + params.gbar_K * abs(params.E_K)
        + params.gbar_L * abs(params.E_L)
    )
    slope = params.gbar_Na + params.gbar_K + params.gbar_L
    return max(affine, slope) / params.capacitance_C


def apriori_voltage_bound(params: HHParams, x0: State, T: float) -> float:
    """Gronwall bound c2 exp(c1 T) on max |V(t)| over [0, T] for any solution
    started at `x0` in K, with c2 = |V(0)| + c1 T (1 + sqrt(3)).

    sqrt(3) bounds the gate block on the unit cube. The result may be inf
    when c1 T exceeds the double exponent range; the bound is still valid
    (and then vacuous) in that case.
    """
    if not x0.is_finite() or not x0.gates_in_unit_box():
        raise ValueError(f"initial state must lie in [0,1]^3 x R, got {x0!r}")
    T = float(T)
    if not (T > 0.0):
        raise ValueError(f"horizon T must be positive, got {T!r}")
    c1 = linear_growth_constant(params)
    c2 = abs(x0.V) + c1 * T * (1.0 + math.sqrt(3.0))
    if c2 == 0.0:
        return 0.0
    log_bound = math.log(c2) + c1 * T
    if log_bound >= math.log(np.finfo(float).max):
        return math.inf
    return c2 * math.exp(c1 * T)
