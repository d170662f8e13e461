"""Fixed-step RK4 integration of the closed loop.

Two drivers share the same plant model:

``simulate_continuous``
    controls act continuously; differential laws integrate the augmented
    state (E, Q, P, u, n), finite laws substitute algebraically into (E, Q, P).

``simulate_sampled``
    SGA-DR with zero-order hold: controls are frozen on each sampling
    interval and the controller memory is advanced once per interval from
    the measurement taken at the start of the previous interval.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .controllers import Controller, ControllerConfig, ControllerMemory, Law
from .errors import ConfigError, IntegrationBlowup
from .model import MeanState, OscillatorParams

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e12

VectorField = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(rhs: VectorField, y: np.ndarray, t: float, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size ``h`` from ``(t, y)``.

    Works for any array shape, including density matrices.
    """
    if not h > 0:
        raise ConfigError(f"step must be > 0, got {h}")
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # a non-finite stage always propagates into the combination
    if not np.all(np.isfinite(y_next)):
        raise IntegrationBlowup("non-finite value in RK4 stage", t)
    return y_next


@dataclass
class Trajectory:
    """Uniformly sampled closed-loop record.

    ``states`` is (K, 3) with columns E, Q, P; ``controls`` is (K, 2) with
    the *applied* u, n; ``memory`` holds the controller's own (u, n) when
    it has one. ``monitors`` columns are W, V1, goal speed (V1 is NaN for
    laws without a quadratic Lyapunov certificate).
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    monitors: np.ndarray
    memory: Optional[np.ndarray] = None
    hold: str = "linear"
    e_star: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.times)
        arrays = [self.states, self.controls, self.monitors]
        if self.memory is not None:
            arrays.append(self.memory)
        if any(len(a) != k for a in arrays):
            raise ValueError("trajectory arrays must share their length")
        if k > 1:
            dt = np.diff(self.times)
            if np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
                raise ValueError("trajectory times must be uniformly increasing")
        if self.hold not in ("linear", "zoh"):
            raise ValueError(f"unknown hold mode {self.hold!r}")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    E = property(lambda self: self.states[:, 0])
    Q = property(lambda self: self.states[:, 1])
    P = property(lambda self: self.states[:, 2])
    u = property(lambda self: self.controls[:, 0])
    n = property(lambda self: self.controls[:, 1])
    W = property(lambda self: self.monitors[:, 0])
    V1 = property(lambda self: self.monitors[:, 1])
    speed = property(lambda self: self.monitors[:, 2])

    @property
    def min_n(self) -> float:
        return float(np.min(self.n))

    @property
    def negative_n_times(self) -> np.ndarray:
        return self.times[self.n < 0]

    def terminal_error(self) -> float:
        return abs(float(self.E[-1]) - self.e_star)

    def control_at(self, index: int, frac: float) -> tuple[float, float]:
        """Applied control between samples ``index`` and ``index + 1``.

        ``frac`` in [0, 1]; linear interpolation or zero-order hold per
        :attr:`hold`.
        """
        u0, n0 = self.controls[index]
        if self.hold == "zoh" or frac == 0.0:
            return float(u0), float(n0)
        u1, n1 = self.controls[index + 1]
        return float(u0 + frac * (u1 - u0)), float(n0 + frac * (n1 - n0))


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one closed-loop run.

    ``initial_energies`` may hold several values; such a batch is run
    member by member (see :meth:`members`).
    """

    id: str
    params: OscillatorParams
    controller: ControllerConfig
    initial_energies: tuple
    q0: float = 1.0
    p0: float = 0.0
    t_final: float = 20.0
    h_int: float = 1e-3
    sample_interval: Optional[float] = None
    oracle_dim: Optional[int] = None
    notes: tuple = ()

    def __post_init__(self):
        energies = self.initial_energies
        if isinstance(energies, (int, float)):
            energies = (float(energies),)
        object.__setattr__(self, "initial_energies", tuple(float(e) for e in energies))
        if not self.initial_energies:
            raise ConfigError("initial energy is mandatory")
        for value in (*self.initial_energies, self.q0, self.p0, self.t_final, self.h_int):
            if not math.isfinite(value):
                raise ConfigError(f"scenario {self.id}: non-finite value {value!r}")
        if self.h_int <= 0:
            raise ConfigError(f"h_int must be > 0, got {self.h_int}")
        if self.t_final <= 0:
            raise ConfigError(f"t_final must be > 0, got {self.t_final}")
        _steps(self.t_final, self.h_int, "t_final")
        if self.sample_interval is not None:
            if self.sample_interval <= 0:
                raise ConfigError("sample_interval must be > 0")
            _steps(self.sample_interval, self.h_int, "sample_interval")
        if self.oracle_dim is not None and self.oracle_dim < 2:
            raise ConfigError(f"oracle dimension must be >= 2, got {self.oracle_dim}")

    @property
    def is_batch(self) -> bool:
        return len(self.initial_energies) > 1

    @property
    def initial(self) -> MeanState:
        if self.is_batch:
            raise ConfigError(f"scenario {self.id} is a batch; iterate members()")
        return MeanState(self.initial_energies[0], self.q0, self.p0)

    def members(self) -> list["Scenario"]:
        return [
            dataclasses.replace(self, initial_energies=(e0,)) for e0 in self.initial_energies
        ]


def _steps(span: float, h: float, name: str) -> int:
    ratio = span / h
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"{name}={span} is not an integer multiple of h_int={h}")
    return steps


def _monitors(
    states: np.ndarray,
    controls: np.ndarray,
    memory: Optional[np.ndarray],
    controller: Controller,
) -> np.ndarray:
    params, target, gains = controller.params, controller.target, controller.gains
    E, P = states[:, 0], states[:, 2]
    u, n = controls[:, 0], controls[:, 1]
    e = E - target.e_star
    W = 0.5 * e**2
    speed = e * (-u * P + 2.0 * params.gamma * (params.omega0 * n - E))
    if memory is not None and gains.gamma1 > 0 and gains.gamma2 > 0:
        V1 = (
            W
            + (memory[:, 0] - target.u_star) ** 2 / (2.0 * gains.gamma1)
            + (memory[:, 1] - target.n_star) ** 2 / (2.0 * gains.gamma2)
        )
    else:
        V1 = np.full_like(W, np.nan)
    return np.column_stack([W, V1, speed])


def _check_bounds(y: np.ndarray, t: float) -> None:
    if np.abs(y).max() > BLOWUP_LIMIT:
        raise IntegrationBlowup(f"state magnitude exceeded {BLOWUP_LIMIT:g}", t)


def closed_loop_field(controller: Controller) -> VectorField:
    """Vector field of the continuous closed loop.

    Differential laws act on (E, Q, P, u, n); finite laws on (E, Q, P).
    """
    p = controller.params
    w, g = p.omega0, p.gamma
    w2 = w * w
    clamp = controller.config.clamp_n

    if controller.differential:
        # sga_d_rhs / sga_dr_rhs unrolled with constants hoisted; this loop
        # dominates the run time. SGA-D is SGA-DR without leak terms.
        gains, target = controller.gains, controller.target
        e_star, n_star = target.e_star, target.n_star
        g1 = gains.gamma1
        if controller.law is Law.SGA_D:
            k2, a1, a2 = gains.gamma2_tilde(p), 0.0, 0.0
        else:
            tilde = controller.config.dr_use_tilde
            k2 = gains.gamma2_tilde(p) if tilde else gains.gamma2
            a1, a2 = gains.alpha1, gains.alpha2

        def field_(t, y):
            E, Q, P, u, n = y.tolist()
            e = E - e_star
            du = g1 * P * e - a1 * u
            dn = -k2 * e - a2 * (n - n_star)
            if clamp and n < 0:
                n = 0.0
            return np.array(
                [-u * P + 2.0 * g * (w * n - E), P - g * Q, -w2 * Q - u - g * P, du, dn]
            )

    else:
        controls = controller.controls

        def field_(t, y):
            E, Q, P = y.tolist()
            u, n = controls(MeanState(E, Q, P))
            return np.array([-u * P + 2.0 * g * (w * n - E), P - g * Q, -w2 * Q - u - g * P])

    return field_


def simulate_continuous(scenario: Scenario) -> Trajectory:
    controller = Controller(scenario.controller, scenario.params)
    h = scenario.h_int
    steps = _steps(scenario.t_final, h, "t_final")
    x0 = scenario.initial
    rhs = closed_loop_field(controller)
    if controller.differential:
        y = np.array([*x0, *controller.initial_memory()], dtype=float)
    else:
        y = np.array(x0, dtype=float)

    history = np.empty((steps + 1, len(y)))
    history[0] = y
    for k in range(steps):
        t = k * h
        y = rk4_step(rhs, y, t, h)
        _check_bounds(y, t + h)
        history[k + 1] = y

    times = np.arange(steps + 1) * h
    states = history[:, :3]
    if controller.differential:
        memory = history[:, 3:5].copy()
        controls = memory.copy()
        if scenario.controller.clamp_n:
            controls[:, 1] = np.maximum(controls[:, 1], 0.0)
    else:
        memory = None
        controls = np.array([controller.controls(MeanState(*row)) for row in states])
    traj = Trajectory(
        times=times,
        states=states.copy(),
        controls=controls,
        monitors=_monitors(states, controls, memory, controller),
        memory=memory,
        hold="linear",
        e_star=controller.target.e_star,
    )
    _log_negative_n(scenario, traj)
    return traj


def simulate_sampled(scenario: Scenario) -> Trajectory:
    """Zero-order-hold SGA-DR.

    Over ``[t_k, t_k+1)`` the held pair (u_k, n_k) drives the plant. At
    ``t_k+1`` the memory advances as::

        u_k+1 = u_k + s * (Gamma1 P(t_k) (E(t_k) - E*) - alpha1 u_k)
        n_k+1 = n_k + s * (-Gamma2 (E(t_k) - E*) - alpha2 (n_k - n*))

    with ``s = h`` by default and ``s = 1`` when the controller sets
    ``literal_paper_update``.
    """
    if scenario.sample_interval is None:
        raise ConfigError("sampled simulation needs a sample_interval")
    if scenario.controller.law is not Law.SGA_DR:
        raise ConfigError("sampled-data simulation is defined for sga-dr only")
    controller = Controller(scenario.controller, scenario.params)
    h_int, h = scenario.h_int, scenario.sample_interval
    steps = _steps(scenario.t_final, h_int, "t_final")
    per_hold = _steps(h, h_int, "sample_interval")
    scale = 1.0 if scenario.controller.literal_paper_update else h
    clamp = scenario.controller.clamp_n

    p = scenario.params
    w, g = p.omega0, p.gamma
    w2 = w * w
    held = [0.0, 0.0]

    def plant(t, y):
        E, Q, P = y.tolist()
        u, n = held
        return np.array([-u * P + 2.0 * g * (w * n - E), P - g * Q, -w2 * Q - u - g * P])

    y = np.array(scenario.initial, dtype=float)
    mem = next_mem = controller.initial_memory()
    states = np.empty((steps + 1, 3))
    memory = np.empty((steps + 1, 2))
    states[0] = y
    for k in range(steps):
        if k % per_hold == 0:
            mem = next_mem
            # measurement at t_k feeds the value applied from t_k+1 on
            du, dn = controller.memory_rhs(MeanState(*y.tolist()), mem)
            next_mem = ControllerMemory(mem.u + scale * du, mem.n + scale * dn)
            held[0] = mem.u
            held[1] = max(mem.n, 0.0) if clamp else mem.n
        memory[k] = mem
        t = k * h_int
        y = rk4_step(plant, y, t, h_int)
        _check_bounds(y, t + h_int)
        states[k + 1] = y
    memory[steps] = next_mem if steps % per_hold == 0 else mem

    controls = memory.copy()
    if clamp:
        controls[:, 1] = np.maximum(controls[:, 1], 0.0)
    traj = Trajectory(
        times=np.arange(steps + 1) * h_int,
        states=states,
        controls=controls,
        monitors=_monitors(states, controls, memory, controller),
        memory=memory,
        hold="zoh",
        e_star=controller.target.e_star,
        diagnostics={"sample_interval": h, "update_scale": scale},
    )
    _log_negative_n(scenario, traj)
    return traj


def simulate(scenario: Scenario) -> Trajectory:
    """Dispatch on whether the scenario is sampled."""
    if scenario.sample_interval is not None:
        return simulate_sampled(scenario)
    return simulate_continuous(scenario)


def _log_negative_n(scenario: Scenario, traj: Trajectory) -> None:
    negative = traj.negative_n_times
    if len(negative):
        logger.info(
            "%s: n(t) < 0 on %d samples, first at t=%.4g (min n=%.4g)",
            scenario.id,
            len(negative),
            negative[0],
            traj.min_n,
        )
