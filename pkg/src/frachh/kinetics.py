"""Hodgkin-Huxley kinetics: gate rate functions, drift field, and the gate-noise map.

Voltage convention follows the original 1952 squid-axon parametrization: V is
the displacement of the membrane potential from its resting value, in mV, with
depolarization positive (rest at V = 0). Time is in ms, so every rate carries
1/ms; currents are uA/cm^2 and conductances mS/cm^2.

State layout is (m, h, n, V): sodium activation, sodium inactivation,
potassium activation, then voltage. All array-valued operations and the CSV
writers in `solver` stick to this ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "HHParams",
    "State",
    "GatingRates",
    "rates",
    "drift",
    "diffusion",
    "equilibrium",
    "ionic_current",
    "rest_current",
]

_EXP_MAX = 700.0  # beyond this exp() overflows the double range


def _exp(z: float) -> float:
    """exp() that saturates to inf instead of raising OverflowError."""
    if z > _EXP_MAX:
        return math.inf
    return math.exp(z)


def _expm1_ratio(x: float) -> float:
    """x / (exp(x/10) - 1), continued through the removable singularity at 0.

    For |x| < 1e-4 the closed form loses digits to cancellation, so a truncated
    Bernoulli series 10 - x/2 + x^2/120 is used instead; the first dropped term
    is x^4/720000, below 1e-21 on that branch.
    """
    if abs(x) < 1e-4:
        return 10.0 - 0.5 * x + x * x / 120.0
    if x > 10.0 * _EXP_MAX:
        return 0.0
    return x / math.expm1(0.1 * x)


class GatingRates(NamedTuple):
    """Opening (alpha) and closing (beta) rates of the three gates, in 1/ms."""

    alpha_m: float
    beta_m: float
    alpha_h: float
    beta_h: float
    alpha_n: float
    beta_n: float


def rates(v: float) -> GatingRates:
    """Voltage-dependent transition rates of the m, h and n gates.

    alpha_m(v) = 0.1 (25 - v) / (exp((25 - v)/10) - 1)   beta_m(v) = 4 exp(-v/18)
    alpha_h(v) = 0.07 exp(-v/20)                         beta_h(v) = 1 / (exp((30 - v)/10) + 1)
    alpha_n(v) = 0.01 (10 - v) / (exp((10 - v)/10) - 1)  beta_n(v) = 0.125 exp(-v/80)

    The removable singularities at v = 25 (alpha_m) and v = 10 (alpha_n) are
    filled with their analytic limits, see `_expm1_ratio`. All six values are
    nonnegative for every finite voltage.
    """
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"voltage must be finite, got {v!r}")
    return GatingRates(
        alpha_m=0.1 * _expm1_ratio(25.0 - v),
        beta_m=4.0 * _exp(-v / 18.0),
        alpha_h=0.07 * _exp(-v / 20.0),
        beta_h=1.0 / (_exp((30.0 - v) / 10.0) + 1.0),
        alpha_n=0.01 * _expm1_ratio(10.0 - v),
        beta_n=0.125 * _exp(-v / 80.0),
    )


@dataclass(frozen=True)
class HHParams:
    """Physical constants of the membrane model.

    Defaults are the classic squid-axon values of Hodgkin & Huxley (1952),
    Part II. `sigma_1..3` scale the multiplicative gate noise
    sigma_k p_k (1 - p_k); all-zero sigmas give the deterministic model.
    """

    capacitance_C: float = 1.0  # uF/cm^2
    current_I: float = 0.0      # uA/cm^2
    E_Na: float = 115.0         # mV
    E_K: float = -12.0          # mV
    E_L: float = 10.6           # mV
    gbar_Na: float = 120.0      # mS/cm^2
    gbar_K: float = 36.0        # mS/cm^2
    gbar_L: float = 0.3         # mS/cm^2
    sigma_1: float = 0.0
    sigma_2: float = 0.0
    sigma_3: float = 0.0

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.capacitance_C <= 0.0:
            raise ValueError(f"capacitance_C must be positive, got {self.capacitance_C}")
        for name in ("gbar_Na", "gbar_K", "gbar_L", "sigma_1", "sigma_2", "sigma_3"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")

    @property
    def sigmas(self) -> tuple[float, float, float]:
        return (self.sigma_1, self.sigma_2, self.sigma_3)

    @property
    def is_deterministic(self) -> bool:
        return self.sigma_1 == 0.0 and self.sigma_2 == 0.0 and self.sigma_3 == 0.0

    @classmethod
    def classic(cls, current_I: float = 0.0, sigma: float = 0.0) -> "HHParams":
        """Squid-axon constants with applied current `current_I` and a shared
        noise amplitude `sigma` for all three gates."""
        return cls(current_I=current_I, sigma_1=sigma, sigma_2=sigma, sigma_3=sigma)


@dataclass(frozen=True)
class State:
    """Model state (m, h, n, V): three gate proportions and the voltage displacement."""

    m: float
    h: float
    n: float
    V: float

    def as_array(self) -> np.ndarray:
        return np.array([self.m, self.h, self.n, self.V], dtype=float)

    @classmethod
    def from_array(cls, x: np.ndarray) -> "State":
        m, h, n, v = (float(c) for c in x)
        return cls(m, h, n, v)

    @property
    def gates(self) -> tuple[float, float, float]:
        return (self.m, self.h, self.n)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.m, self.h, self.n, self.V))

    def gates_in_unit_box(self, tol: float = 0.0) -> bool:
        return all(-tol <= g <= 1.0 + tol for g in self.gates)


def _require_finite(x: State) -> None:
    if not x.is_finite():
        raise ValueError(f"state must be finite, got {x!r}")


def ionic_current(x: State, params: HHParams) -> float:
    """Total ionic current gNa m^3 h (V - ENa) + gK n^4 (V - EK) + gL (V - EL)."""
    _require_finite(x)
    return (
        params.gbar_Na * x.m ** 3 * x.h * (x.V - params.E_Na)
        + params.gbar_K * x.n ** 4 * (x.V - params.E_K)
        + params.gbar_L * (x.V - params.E_L)
    )


def drift(x: State, params: HHParams) -> np.ndarray:
    """Deterministic vector field over (m, h, n, V).

    Gate components are alpha_x(V)(1 - x) - beta_x(V) x; the voltage component
    is (I - I_ion) / C. On each face x_i in {0, 1} the i-th gate component
    points into the unit cube (alpha >= 0 at 0, -beta <= 0 at 1), which is what
    keeps the gate proportions viable.
    """
    _require_finite(x)
    r = rates(x.V)
    fv = (params.current_I - ionic_current(x, params)) / params.capacitance_C
    return np.array(
        [
            r.alpha_m * (1.0 - x.m) - r.beta_m * x.m,
            r.alpha_h * (1.0 - x.h) - r.beta_h * x.h,
            r.alpha_n * (1.0 - x.n) - r.beta_n * x.n,
            fv,
        ]
    )


def diffusion(x: State, params: HHParams) -> np.ndarray:
    """Gate-noise map as a 4x3 matrix: diag(sigma_k p_k (1 - p_k)) over the
    gates, with an identically zero voltage row.

    Each gate row vanishes on its own faces p_k in {0, 1} and the voltage row
    is zero everywhere; together these make the noise compatible with keeping
    (m, h, n) in [0, 1]^3 while the voltage stays noise-free.
    """
    _require_finite(x)
    out = np.zeros((4, 3))
    out[0, 0] = params.sigma_1 * x.m * (1.0 - x.m)
    out[1, 1] = params.sigma_2 * x.h * (1.0 - x.h)
    out[2, 2] = params.sigma_3 * x.n * (1.0 - x.n)
    return out


def equilibrium(v: float) -> State:
    """State with every gate at its voltage-conditional fixed point
    alpha_x(v) / (alpha_x(v) + beta_x(v)) and voltage v.

    The gate drift vanishes there by construction; the voltage drift does not
    unless the applied current balances the ionic current (see `rest_current`).
    """
    r = rates(v)
    return State(
        m=r.alpha_m / (r.alpha_m + r.beta_m),
        h=r.alpha_h / (r.alpha_h + r.beta_h),
        n=r.alpha_n / (r.alpha_n + r.beta_n),
        V=float(v),
    )


def rest_current(params: HHParams, v: float = 0.0) -> float:
    """Applied current that makes `equilibrium(v)` a full fixed point of the drift."""
    return ionic_current(equilibrium(v), params)
