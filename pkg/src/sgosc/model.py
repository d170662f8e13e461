"""Averaged oscillator model: parameters, state and moment equations.

All quantities are dimensionless (hbar = 1). The mean energy is taken as
``E = omega0 * <a^dagger a>``, i.e. without the zero-point term, which is
the convention under which the energy equation below is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidInputError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class OscillatorParams:
    omega0: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        _check_finite(omega0=self.omega0, gamma=self.gamma)
        if self.omega0 <= 0:
            raise InvalidInputError(f"omega0 must be > 0, got {self.omega0}")
        if self.gamma <= 0:
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma}")

    @property
    def drift_matrix(self):
        """Matrix of the unforced (P, Q) subsystem, ``dX/dt = A X + B u``."""
        return np.array([[-self.gamma, -self.omega0**2], [1.0, -self.gamma]])

    @property
    def input_vector(self):
        return np.array([-1.0, 0.0])


class MeanState(NamedTuple):
    """Mean energy, position and momentum (also used for their derivatives)."""

    E: float
    Q: float
    P: float


class ControlInput(NamedTuple):
    u: float
    n: float

    @property
    def physical(self) -> bool:
        """True when the bath occupation is non-negative."""
        return self.n >= 0


@dataclass(frozen=True)
class Target:
    """Target energy and the matching equilibrium controls.

    Build it with :meth:`from_energy` so that ``n_star = e_star / omega0``.
    """

    e_star: float
    n_star: float
    u_star: float = 0.0

    def __post_init__(self):
        _check_finite(e_star=self.e_star, n_star=self.n_star)
        if self.e_star < 0:
            raise InvalidInputError(f"e_star must be >= 0, got {self.e_star}")
        if self.u_star != 0.0:
            raise InvalidInputError("u_star is fixed at 0")

    @classmethod
    def from_energy(cls, e_star: float, omega0: float) -> "Target":
        return cls(e_star=e_star, n_star=e_star / omega0)


def mean_field_rhs(
    state: MeanState, ctrl: ControlInput, params: OscillatorParams
) -> MeanState:
    """Time derivative of (E, Q, P) under controls (u, n)."""
    E, Q, P = state
    u, n = ctrl
    _check_finite(E=E, Q=Q, P=P, u=u, n=n)
    w, g = params.omega0, params.gamma
    return MeanState(
        E=-u * P + 2.0 * g * (w * n - E),
        Q=P - g * Q,
        P=-(w**2) * Q - u - g * P,
    )


def objective(E: float, e_star: float) -> float:
    """Goal function ``W(E) = (E - E*)^2 / 2``."""
    _check_finite(E=E, e_star=e_star)
    return 0.5 * (E - e_star) ** 2


def n_from_temperature(beta: float, omega0: float) -> float:
    """Bose occupation of a thermal bath at inverse temperature ``beta``."""
    _check_finite(beta=beta, omega0=omega0)
    if beta <= 0:
        raise InvalidInputError(f"beta must be > 0, got {beta}")
    if omega0 <= 0:
        raise InvalidInputError(f"omega0 must be > 0, got {omega0}")
    # expm1 keeps precision for small omega0*beta; large arguments underflow to 0
    x = omega0 * beta
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)
