"""Speed-gradient control laws for the averaged oscillator.

Five laws are available, all sharing the :class:`Controller` interface:

* ``sga-d``   differential form, controls are integrated states
* ``sga-dr``  differential form with leakage toward (0, n*)
* ``sga-f``   finite form, controls are algebraic in the state
* ``incoherent-finite``       u = 0, n = -Gamma (E - E*)
* ``incoherent-exponential``  u = 0, n = ((1 - kappa) E + kappa E*) / omega0

Gains are always configured with the *untilded* incoherent gain ``gamma2``;
the differential and finite forms multiply it by ``2 gamma omega0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import ConfigError
from .model import ControlInput, MeanState, OscillatorParams, Target


class Law(str, enum.Enum):
    SGA_D = "sga-d"
    SGA_DR = "sga-dr"
    SGA_F = "sga-f"
    INCOHERENT_FINITE = "incoherent-finite"
    INCOHERENT_EXPONENTIAL = "incoherent-exponential"

    @property
    def differential(self) -> bool:
        return self in (Law.SGA_D, Law.SGA_DR)


@dataclass(frozen=True)
class SgaGains:
    gamma1: float = 0.0
    gamma2: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0
    kappa: float = 1.0
    gamma_fin: float = 1.0

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "alpha1", "alpha2", "kappa", "gamma_fin"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigError(f"gain {name} must be finite, got {value!r}")
            if value < 0:
                raise ConfigError(f"gain {name} must be >= 0, got {value}")
        if not 0.0 < self.kappa <= 1.0:
            raise ConfigError(f"kappa must lie in (0, 1], got {self.kappa}")

    def gamma2_tilde(self, params: OscillatorParams) -> float:
        return 2.0 * params.gamma * params.omega0 * self.gamma2


class ControllerMemory(NamedTuple):
    u: float
    n: float


def goal_speed(
    state: MeanState, ctrl: ControlInput, params: OscillatorParams, e_star: float
) -> float:
    """Rate of change of the goal function along the averaged dynamics."""
    E, _, P = state
    u, n = ctrl
    return (E - e_star) * (-u * P + 2.0 * params.gamma * (params.omega0 * n - E))


def speed_gradient(
    state: MeanState, params: OscillatorParams, e_star: float
) -> tuple[float, float]:
    """Gradient of :func:`goal_speed` with respect to (u, n).

    Independent of the controls, since the speed is affine in them.
    """
    E, _, P = state
    e = E - e_star
    return -P * e, 2.0 * params.gamma * params.omega0 * e


def sga_d_rhs(
    state: MeanState,
    mem: ControllerMemory,
    gains: SgaGains,
    params: OscillatorParams,
    e_star: float,
) -> tuple[float, float]:
    e = state.E - e_star
    return gains.gamma1 * state.P * e, -gains.gamma2_tilde(params) * e


def sga_f(
    state: MeanState, gains: SgaGains, params: OscillatorParams, e_star: float
) -> ControlInput:
    e = state.E - e_star
    return ControlInput(gains.gamma1 * state.P * e, -gains.gamma2_tilde(params) * e)


def incoherent_finite(E: float, gains: SgaGains, e_star: float) -> float:
    if gains.gamma_fin <= 0:
        raise ConfigError("gamma_fin must be > 0 for the incoherent finite law")
    return -gains.gamma_fin * (E - e_star)


def incoherent_exponential(
    E: float, gains: SgaGains, params: OscillatorParams, e_star: float
) -> float:
    """Bath occupation that makes ``E`` relax to ``e_star`` at rate 2 gamma kappa."""
    kappa = gains.kappa
    if not 0.0 < kappa <= 1.0:
        raise ConfigError(f"kappa must lie in (0, 1], got {kappa}")
    return ((1.0 - kappa) * E + kappa * e_star) / params.omega0


def sga_dr_rhs(
    state: MeanState,
    mem: ControllerMemory,
    gains: SgaGains,
    params: OscillatorParams,
    target: Target,
    use_tilde: bool = False,
) -> tuple[float, float]:
    """Robustified differential law: SGA-D plus leakage toward (0, n*).

    The incoherent gain enters untilded unless ``use_tilde`` is set.
    """
    e = state.E - target.e_star
    g2 = gains.gamma2_tilde(params) if use_tilde else gains.gamma2
    du = gains.gamma1 * state.P * e - gains.alpha1 * mem.u
    dn = -g2 * e - gains.alpha2 * (mem.n - target.n_star)
    return du, dn


@dataclass(frozen=True)
class ControllerConfig:
    """Law selector, gains, target and initial controller memory.

    ``u0``/``n0`` default to the V0-minimizing pair (0, n*).
    ``clamp_n`` clips the applied bath occupation at zero (off by default;
    negative n is a diagnostic, not an error). ``literal_paper_update`` only
    affects sampled-data runs, see :func:`sgosc.integrator.simulate_sampled`.
    """

    law: Law
    gains: SgaGains = field(default_factory=SgaGains)
    e_star: float = 0.0
    u0: Optional[float] = None
    n0: Optional[float] = None
    dr_use_tilde: bool = False
    clamp_n: bool = False
    literal_paper_update: bool = False

    def __post_init__(self):
        object.__setattr__(self, "law", Law(self.law))
        if not math.isfinite(self.e_star) or self.e_star < 0:
            raise ConfigError(f"e_star must be finite and >= 0, got {self.e_star}")
        if self.law is Law.INCOHERENT_FINITE and self.gains.gamma_fin <= 0:
            raise ConfigError("gamma_fin must be > 0 for the incoherent finite law")


class Controller:
    """A control law bound to a plant.

    Finite laws expose :meth:`controls`; differential laws additionally
    expose :meth:`memory_rhs` and report the memory itself as the control.
    """

    def __init__(self, config: ControllerConfig, params: OscillatorParams):
        self.config = config
        self.params = params
        self.law = config.law
        self.gains = config.gains
        self.target = Target.from_energy(config.e_star, params.omega0)

    @property
    def differential(self) -> bool:
        return self.law.differential

    def initial_memory(self) -> ControllerMemory:
        u0 = 0.0 if self.config.u0 is None else self.config.u0
        n0 = self.target.n_star if self.config.n0 is None else self.config.n0
        return ControllerMemory(u0, n0)

    def controls(self, state: MeanState, mem: Optional[ControllerMemory] = None) -> ControlInput:
        law, e_star = self.law, self.target.e_star
        if law.differential:
            ctrl = ControlInput(mem.u, mem.n)
        elif law is Law.SGA_F:
            ctrl = sga_f(state, self.gains, self.params, e_star)
        elif law is Law.INCOHERENT_FINITE:
            ctrl = ControlInput(0.0, incoherent_finite(state.E, self.gains, e_star))
        else:
            ctrl = ControlInput(
                0.0, incoherent_exponential(state.E, self.gains, self.params, e_star)
            )
        if self.config.clamp_n and ctrl.n < 0:
            ctrl = ControlInput(ctrl.u, 0.0)
        return ctrl

    def memory_rhs(self, state: MeanState, mem: ControllerMemory) -> tuple[float, float]:
        if self.law is Law.SGA_D:
            return sga_d_rhs(state, mem, self.gains, self.params, self.target.e_star)
        if self.law is Law.SGA_DR:
            return sga_dr_rhs(
                state, mem, self.gains, self.params, self.target, self.config.dr_use_tilde
            )
        raise ConfigError(f"law {self.law.value} has no controller memory")
