"""Certificates and monitors for the closed loops.

Covers the quadratic Lyapunov function of the differential law, the
non-negativity bounds on the incoherent gain, the closed-form response of
the incoherent finite law, the stability condition of the robustified law,
a Lyapunov matrix for the (P, Q) subsystem and an empirical decay-rate fit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
import scipy.linalg

from .controllers import ControllerMemory, SgaGains
from .errors import InvalidInputError
from .model import MeanState, OscillatorParams, Target

if TYPE_CHECKING:
    from .integrator import Trajectory

GAMMA2_CAP = 1e12


class Mode(str, enum.Enum):
    HEATING = "heating"
    COOLING = "cooling"

    @classmethod
    def from_energies(cls, e0: float, e_star: float) -> Optional["Mode"]:
        if e_star > e0:
            return cls.HEATING
        if e_star < e0:
            return cls.COOLING
        return None


@dataclass(frozen=True)
class PositivityVerdict:
    mode: str
    gamma2_max: float
    alpha: float
    satisfied: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lyapunov_v1(state: MeanState, mem: ControllerMemory, gains: SgaGains, target: Target) -> float:
    """``W(E) + (u - u*)^2 / (2 Gamma1) + (n - n*)^2 / (2 Gamma2)``."""
    if gains.gamma1 <= 0 or gains.gamma2 <= 0:
        raise ZeroDivisionError(
            "V1 needs gamma1 > 0 and gamma2 > 0; use the objective W(E) as monitor instead"
        )
    return (
        0.5 * (state.E - target.e_star) ** 2
        + (mem.u - target.u_star) ** 2 / (2.0 * gains.gamma1)
        + (mem.n - target.n_star) ** 2 / (2.0 * gains.gamma2)
    )


def lyapunov_v1_rate(state: MeanState, params: OscillatorParams, e_star: float) -> float:
    """Exact derivative of V1 along the SGA-D closed loop, ``-2 gamma (E - E*)^2``."""
    return -2.0 * params.gamma * (state.E - e_star) ** 2


def positivity_bound(mode, e0: float, e_star: float, omega0: float) -> float:
    """Largest untilded ``gamma2`` that keeps n(t) >= 0 under SGA-D.

    Sufficient, not necessary. Assumes the controller starts at (0, n*).
    """
    mode = Mode(mode)
    if omega0 <= 0:
        raise InvalidInputError(f"omega0 must be > 0, got {omega0}")
    if mode is Mode.HEATING:
        if not e_star > e0:
            raise InvalidInputError(f"heating needs e_star > e0 (got {e_star} <= {e0})")
        return 1.0 / omega0**2
    if e_star <= 0:
        raise InvalidInputError("cooling bound is unbounded for e_star = 0")
    if not e0 > e_star:
        raise InvalidInputError(f"cooling needs e0 > e_star (got {e0} <= {e_star})")
    ratio = e0 / e_star - 1.0
    if ratio == 0.0:
        return GAMMA2_CAP
    return min(GAMMA2_CAP, 1.0 / (omega0**2 * ratio**2))


def positivity_verdict(
    e0: float, e_star: float, omega0: float, gamma2: float
) -> Optional[PositivityVerdict]:
    """Verdict for the configured gain; ``None`` when e0 == e_star."""
    mode = Mode.from_energies(e0, e_star)
    if mode is None:
        return None
    bound = positivity_bound(mode, e0, e_star, omega0)
    return PositivityVerdict(
        mode=mode.value,
        gamma2_max=bound,
        alpha=math.sqrt(gamma2) * omega0,
        satisfied=gamma2 <= bound,
    )


def cooling_floor(alpha: float, e0: float) -> float:
    """Lowest energy reachable by cooling with guaranteed n >= 0."""
    if alpha < 0 or e0 < 0:
        raise InvalidInputError("alpha and e0 must be >= 0")
    return alpha / (1.0 + alpha) * e0


def finite_form_solution(
    t, e0: float, e_star: float, gamma_fin: float, params: OscillatorParams
):
    """Energy under u = 0, n = -Gamma (E - E*); accepts scalar or array ``t``."""
    if gamma_fin <= 0:
        raise InvalidInputError("gamma_fin must be > 0")
    w, g = params.omega0, params.gamma
    rate = 2.0 * g * (w * gamma_fin + 1.0)
    decay = np.exp(-rate * np.asarray(t, dtype=float))
    limit = e_star / (1.0 + 1.0 / (w * gamma_fin))
    result = limit * (1.0 - decay) + e0 * decay
    return float(result) if np.ndim(result) == 0 else result


def finite_form_rate(gamma_fin: float, params: OscillatorParams) -> float:
    return 2.0 * params.gamma * (params.omega0 * gamma_fin + 1.0)


def exponential_law_solution(t, e0: float, e_star: float, kappa: float, params: OscillatorParams):
    """Energy under the exponential incoherent law: E* + (E0 - E*) exp(-2 gamma kappa t)."""
    return e_star + (e0 - e_star) * np.exp(-2.0 * params.gamma * kappa * np.asarray(t, dtype=float))


def stability_condition_dr(gamma: float, gamma1: float, gamma2: float) -> bool:
    """Sufficient condition for exponential stability of SGA-DR."""
    return gamma > 4.0 * gamma1 * gamma2


def lyapunov_matrix(params: OscillatorParams, gamma0: float) -> np.ndarray:
    """Symmetric R > 0 with ``R A + A^T R <= -gamma0 R`` for the (P, Q) block.

    Solves ``R M + M^T R = -I`` with ``M = A + gamma0 I / 2``.
    """
    if not 0.0 < gamma0 < params.gamma:
        raise InvalidInputError(
            f"need 0 < gamma0 < gamma={params.gamma} for a feasible solution, got {gamma0}"
        )
    A = params.drift_matrix
    M = A + 0.5 * gamma0 * np.eye(2)
    R = scipy.linalg.solve_continuous_lyapunov(M.T, -np.eye(2))
    R = 0.5 * (R + R.T)
    verify_lyapunov_matrix(R, params, gamma0)
    return R


def lyapunov_residual(R: np.ndarray, params: OscillatorParams, gamma0: float) -> np.ndarray:
    A = params.drift_matrix
    return R @ A + A.T @ R + gamma0 * R


def verify_lyapunov_matrix(
    R: np.ndarray, params: OscillatorParams, gamma0: float, tol: float = 1e-10
) -> None:
    """Raise unless R is symmetric positive definite and satisfies the inequality."""
    R = np.asarray(R, dtype=float)
    if not np.allclose(R, R.T, atol=tol):
        raise InvalidInputError("R is not symmetric")
    if np.linalg.eigvalsh(R).min() <= 0:
        raise InvalidInputError("R is not positive definite")
    worst = np.linalg.eigvalsh(lyapunov_residual(R, params, gamma0)).max()
    if worst > tol:
        raise InvalidInputError(f"Lyapunov inequality violated: max eigenvalue {worst:.3g}")


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    saturated: bool
    max_residual: float
    relative_residual: float
    window: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def distance_to(traj: "Trajectory", equilibrium) -> np.ndarray:
    """Euclidean distance of (E, P, Q, u, n) from ``equilibrium``.

    Uses the controller memory for (u, n) when the trajectory has one.
    """
    z_star = np.asarray(equilibrium, dtype=float)
    uv = traj.memory if traj.memory is not None else traj.controls
    z = np.column_stack([traj.E, traj.P, traj.Q, uv[:, 0], uv[:, 1]])
    return np.linalg.norm(z - z_star, axis=1)


def exponential_rate_fit(
    traj: "Trajectory", equilibrium, tail_fraction: float = 0.5, floor: float = 1e-14
) -> RateFit:
    """Least-squares decay rate of ``log ||z(t) - z*||`` over the tail window.

    ``equilibrium`` is ordered (E, P, Q, u, n). A positive rate means
    exponential decay. Samples below ``floor`` (relative to the equilibrium
    scale) are numerically zero: the fit then stops there and is flagged
    saturated. ``relative_residual`` is the largest deviation from the fit
    divided by the fitted log-drop across the window.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise InvalidInputError("tail_fraction must lie in (0, 1]")
    d = distance_to(traj, equilibrium)
    t = traj.times
    start = int(len(t) * (1.0 - tail_fraction))
    t_win, d_win = t[start:], d[start:]
    zero = floor * max(1.0, float(np.linalg.norm(equilibrium)))
    below = np.nonzero(d_win <= zero)[0]
    saturated = len(below) > 0
    if saturated:
        t_win, d_win = t_win[: below[0]], d_win[: below[0]]
    if len(t_win) < 2:
        return RateFit(math.inf, math.nan, True, math.nan, math.nan, (float(t[start]), float(t[-1])))
    logd = np.log(d_win)
    slope, intercept = np.polyfit(t_win, logd, 1)
    resid = logd - (slope * t_win + intercept)
    max_res = float(np.max(np.abs(resid)))
    drop = abs(slope) * (t_win[-1] - t_win[0])
    rel = max_res / drop if drop > 0 else math.inf
    return RateFit(
        rate=float(-slope),
        intercept=float(intercept),
        saturated=saturated,
        max_residual=max_res,
        relative_residual=float(rel),
        window=(float(t_win[0]), float(t_win[-1])),
    )


def equilibrium_point(target: Target) -> tuple:
    """The closed-loop equilibrium (E*, P=0, Q=0, u=0, n*)."""
    return (target.e_star, 0.0, 0.0, target.u_star, target.n_star)
