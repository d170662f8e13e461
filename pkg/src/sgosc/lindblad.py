"""Master-equation oracle in a truncated Fock basis.

Integrates the full GKSL equation for the driven, damped oscillator and
reads off (E, Q, P) so the averaged model can be checked against it. The
controls are replayed from a mean-field run rather than recomputed from
oracle expectations.

Energy is ``omega0 * <a^dagger a>``; the Hamiltonian used in the
commutator is ``omega0 a^dagger a`` (constant shifts drop out).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    InfeasibleStateError,
    InvalidInputError,
    OracleIntegrityError,
    TruncationError,
    UnphysicalBathError,
)
from .integrator import Scenario, Trajectory, rk4_step
from .model import MeanState, OscillatorParams

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-6
HERMITIAN_TOL = 1e-10
NEGATIVITY_TOL = 1e-6
TAIL_WARN = 1e-6
TAIL_FAIL = 1e-4
STATE_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FockOperators:
    dim: int
    omega0: float
    annihilate: np.ndarray
    create: np.ndarray
    number: np.ndarray
    position: np.ndarray
    momentum: np.ndarray
    h0: np.ndarray


def build_operators(dim: int, omega0: float) -> FockOperators:
    if dim < 2:
        raise InvalidInputError(f"Fock dimension must be >= 2, got {dim}")
    if omega0 <= 0:
        raise InvalidInputError(f"omega0 must be > 0, got {omega0}")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    number = np.diag(np.arange(dim, dtype=complex))
    return FockOperators(
        dim=dim,
        omega0=omega0,
        annihilate=a,
        create=ad,
        number=number,
        position=(a + ad) / math.sqrt(2.0 * omega0),
        momentum=math.sqrt(omega0 / 2.0) * (a - ad) / 1j,
        h0=omega0 * number,
    )


@dataclass
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise InvalidInputError("density matrix must be square")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(herm).min())

    def tail_mass(self, levels: int = 2) -> float:
        return float(np.sum(np.real(np.diag(self.entries)[-levels:])))

    def validate(self, herm_tol=1e-10, trace_tol=1e-10, eig_tol=1e-8) -> None:
        if self.hermiticity_residual() > herm_tol:
            raise OracleIntegrityError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > trace_tol:
            raise OracleIntegrityError(f"trace {self.trace()!r} differs from 1")
        if self.min_eigenvalue() < -eig_tol:
            raise OracleIntegrityError("density matrix has a negative eigenvalue")

    def moments(self, omega0: float) -> MeanState:
        return _moments(self.entries, omega0)


def _moments(rho: np.ndarray, omega0: float) -> MeanState:
    dim = rho.shape[0]
    levels = np.arange(dim)
    mean_a = np.sum(np.sqrt(levels[1:]) * np.diagonal(rho, offset=-1))
    return MeanState(
        E=omega0 * float(np.real(np.diagonal(rho) @ levels)),
        Q=math.sqrt(2.0 / omega0) * float(mean_a.real),
        P=math.sqrt(2.0 * omega0) * float(mean_a.imag),
    )


def coherent_amplitude(q0: float, p0: float, omega0: float) -> complex:
    """``<a>`` for mean position ``q0`` and momentum ``p0``."""
    return complex(math.sqrt(omega0 / 2.0) * q0, p0 / math.sqrt(2.0 * omega0))


def displaced_thermal_state(
    dim: int, q0: float, p0: float, e0: float, omega0: float
) -> DensityMatrix:
    """Thermal state displaced to mean (q0, p0) with energy ``e0``.

    The thermal occupation makes up whatever energy the coherent
    displacement does not carry. Built in a padded space, then truncated;
    the discarded population must stay below 1e-8.
    """
    beta = coherent_amplitude(q0, p0, omega0)
    n_th = e0 / omega0 - abs(beta) ** 2
    if n_th < -1e-12:
        raise InfeasibleStateError(
            f"energy {e0} is below the coherent floor {omega0 * abs(beta) ** 2} "
            f"for Q={q0}, P={p0}"
        )
    n_th = max(n_th, 0.0)
    big = dim + max(20, dim // 2)
    k = np.arange(big)
    if n_th == 0.0:
        pops = (k == 0).astype(float)
    else:
        pops = np.exp(k * math.log(n_th) - (k + 1) * math.log1p(n_th))
    rho = np.diag(pops).astype(complex)
    if beta != 0:
        a = np.diag(np.sqrt(np.arange(1, big, dtype=float)), k=1).astype(complex)
        D = scipy.linalg.expm(beta * a.conj().T - np.conj(beta) * a)
        rho = D @ rho @ D.conj().T
    kept = rho[:dim, :dim]
    tail = 1.0 - float(np.real(np.trace(kept)))
    if tail > STATE_TAIL_TOL:
        raise TruncationError(
            f"dimension {dim} too small: population {tail:.3g} beyond the top level"
        )
    kept = kept / np.trace(kept)
    return DensityMatrix(0.5 * (kept + kept.conj().T))


def initial_ensemble(
    dim: int, q0: float, p0: float, e0: float, omega0: float
) -> list[tuple[float, DensityMatrix]]:
    """Physical states whose affine combination has moments (e0, q0, p0).

    A single displaced thermal state when that is feasible. Mean-field
    initial data with ``e0 < omega0 |<a>|^2`` lie outside the physical set;
    they are written as ``c |beta/c><beta/c| + (1 - c) |0><0|`` with
    ``c = omega0 |beta|^2 / e0 > 1``. The master equation is linear, so
    integrating the components separately and recombining gives the exact
    evolution of that (non-positive) initial operator while every
    integrated component remains a valid state.
    """
    beta = coherent_amplitude(q0, p0, omega0)
    floor = omega0 * abs(beta) ** 2
    if e0 >= floor - 1e-12:
        return [(1.0, displaced_thermal_state(dim, q0, p0, e0, omega0))]
    if e0 <= 0:
        raise InfeasibleStateError("zero energy with nonzero mean displacement")
    c = floor / e0
    scaled = beta / c
    q1 = scaled.real / math.sqrt(omega0 / 2.0)
    p1 = scaled.imag * math.sqrt(2.0 * omega0)
    coherent = displaced_thermal_state(dim, q1, p1, omega0 * abs(scaled) ** 2, omega0)
    vacuum = displaced_thermal_state(dim, 0.0, 0.0, 0.0, omega0)
    return [(c, coherent), (1.0 - c, vacuum)]


def lindblad_rhs(rho, u: float, n: float, ops: FockOperators, params: OscillatorParams) -> np.ndarray:
    """``-i[H0 + u Q, rho] + L(rho)`` evaluated with dense matrix products."""
    if n < 0:
        raise UnphysicalBathError(f"bath occupation must be >= 0, got {n}")
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    a, ad = ops.annihilate, ops.create
    H = ops.h0 + u * ops.position
    g = params.gamma
    ada = ad @ a
    aad = a @ ad
    out = -1j * (H @ r - r @ H)
    out += g * (n + 1.0) * (2.0 * a @ r @ ad - r @ ada - ada @ r)
    out += g * n * (2.0 * ad @ r @ a - aad @ r - r @ aad)
    return out


class BandedGenerator:
    """Same generator as :func:`lindblad_rhs`, using the ladder structure.

    Every product with a, a^dagger reduces to a shifted slice, so one
    evaluation costs O(N^2) instead of O(N^3).
    """

    def __init__(self, dim: int, params: OscillatorParams):
        if dim < 2:
            raise InvalidInputError(f"Fock dimension must be >= 2, got {dim}")
        self.dim = dim
        self.params = params
        g = params.gamma
        # complex coefficient arrays avoid real->complex casts in the hot loop
        s = np.sqrt(np.arange(1, dim, dtype=float)).astype(complex)
        self._s_col = s[:, None]
        self._s_row = s[None, :]
        self._ss = s[:, None] * s[None, :]
        num = np.arange(dim, dtype=float)
        nump = np.append(np.arange(1, dim, dtype=float), 0.0)  # diag of a a^dagger
        num_sum = num[:, None] + num[None, :]
        nump_sum = nump[:, None] + nump[None, :]
        # diagonal part: -i omega0 (k - l) - gamma (n + 1) (k + l) - gamma n (k' + l')
        self._diag0 = -1j * params.omega0 * (num[:, None] - num[None, :]) - g * num_sum
        self._diag_n = (-g * (num_sum + nump_sum)).astype(complex)
        self._q_scale = 1.0 / math.sqrt(2.0 * params.omega0)

    def __call__(self, rho: np.ndarray, u: float, n: float) -> np.ndarray:
        if n < 0:
            raise UnphysicalBathError(f"bath occupation must be >= 0, got {n}")
        g = self.params.gamma
        out = (self._diag0 + n * self._diag_n) * rho
        # 2 gamma (n + 1) a rho a^dagger
        out[:-1, :-1] += (2.0 * g * (n + 1.0)) * (self._ss * rho[1:, 1:])
        if n != 0.0:
            # 2 gamma n a^dagger rho a
            out[1:, 1:] += (2.0 * g * n) * (self._ss * rho[:-1, :-1])
        if u != 0.0:
            # -i u (Q rho - rho Q), Q = (a + a^dagger) / sqrt(2 omega0)
            c = -1j * u * self._q_scale
            col = c * self._s_col
            row = c * self._s_row
            out[:-1, :] += col * rho[1:, :]
            out[1:, :] += col * rho[:-1, :]
            out[:, 1:] -= rho[:, :-1] * row
            out[:, :-1] -= rho[:, 1:] * row
        return out


@dataclass
class _Integrity:
    max_trace_drift: float = 0.0
    max_hermiticity: float = 0.0
    min_eigenvalue: float = math.inf
    max_tail_mass: float = 0.0
    warnings: list = field(default_factory=list)


def _integrate_component(
    rho0: DensityMatrix,
    controls_from: Trajectory,
    generator: BandedGenerator,
    omega0: float,
    check_every: int,
    audit: _Integrity,
) -> np.ndarray:
    times = controls_from.times
    h = controls_from.step
    steps = len(times) - 1
    out = np.empty((steps + 1, 3))
    rho = rho0.entries.copy()
    out[0] = _moments(rho, omega0)
    k = 0

    def rhs(t, r):
        frac = (t - times[k]) / h
        u, n = controls_from.control_at(k, min(1.0, max(0.0, frac)))
        return generator(r, u, n)

    for k in range(steps):
        rho = rk4_step(rhs, rho, times[k], h)
        t = times[k + 1]
        drift = abs(float(np.real(np.trace(rho))) - 1.0)
        audit.max_trace_drift = max(audit.max_trace_drift, drift)
        if drift > TRACE_TOL:
            raise OracleIntegrityError(f"trace drift {drift:.3g} at t={t:.4g}")
        tail = float(np.sum(np.real(np.diagonal(rho)[-2:])))
        audit.max_tail_mass = max(audit.max_tail_mass, tail)
        if tail > TAIL_FAIL:
            raise TruncationError(f"tail mass {tail:.3g} at t={t:.4g}; increase the dimension")
        if (k + 1) % check_every == 0 or k + 1 == steps:
            herm = float(np.max(np.abs(rho - rho.conj().T)))
            audit.max_hermiticity = max(audit.max_hermiticity, herm)
            if herm > HERMITIAN_TOL:
                raise OracleIntegrityError(f"hermiticity residual {herm:.3g} at t={t:.4g}")
            lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
            audit.min_eigenvalue = min(audit.min_eigenvalue, lam)
            if lam < -NEGATIVITY_TOL:
                raise OracleIntegrityError(f"eigenvalue {lam:.3g} at t={t:.4g}")
        out[k + 1] = _moments(rho, omega0)
    if audit.max_tail_mass > TAIL_WARN:
        msg = f"tail mass reached {audit.max_tail_mass:.3g}"
        audit.warnings.append(msg)
        logger.warning(msg)
    return out


def simulate_lindblad(
    scenario: Scenario, controls_from: Trajectory, check_every: int = 100
) -> Trajectory:
    """Replay the recorded controls through the master equation.

    Returns the oracle's (E, Q, P) on the same time grid, with integrity
    figures in ``diagnostics``.
    """
    if scenario.oracle_dim is None:
        raise ConfigError(f"scenario {scenario.id} has no oracle dimension")
    if np.any(controls_from.n < 0):
        raise UnphysicalBathError(
            f"replayed n(t) goes negative (min {controls_from.min_n:.3g}); "
            "the master equation needs n >= 0"
        )
    params = scenario.params
    dim = scenario.oracle_dim
    x0 = scenario.initial
    ensemble = initial_ensemble(dim, x0.Q, x0.P, x0.E, params.omega0)
    generator = BandedGenerator(dim, params)
    audit = _Integrity()
    states = np.zeros((len(controls_from), 3))
    for weight, rho0 in ensemble:
        rho0.validate()
        states += weight * _integrate_component(
            rho0, controls_from, generator, params.omega0, check_every, audit
        )

    E, P = states[:, 0], states[:, 2]
    u, n = controls_from.u, controls_from.n
    e = E - controls_from.e_star
    monitors = np.column_stack(
        [
            0.5 * e**2,
            np.full_like(E, np.nan),
            e * (-u * P + 2.0 * params.gamma * (params.omega0 * n - E)),
        ]
    )
    return Trajectory(
        times=controls_from.times.copy(),
        states=states,
        controls=controls_from.controls.copy(),
        monitors=monitors,
        hold=controls_from.hold,
        e_star=controls_from.e_star,
        diagnostics={
            "dim": dim,
            "weights": [w for w, _ in ensemble],
            "max_trace_drift": audit.max_trace_drift,
            "max_hermiticity": audit.max_hermiticity,
            "min_eigenvalue": audit.min_eigenvalue,
            "max_tail_mass": audit.max_tail_mass,
            "warnings": audit.warnings,
        },
    )


def max_discrepancy(meanfield: Trajectory, oracle: Trajectory) -> dict:
    """Largest pointwise |oracle - mean-field| in E, Q and P."""
    diff = np.max(np.abs(oracle.states - meanfield.states), axis=0)
    return {"E": float(diff[0]), "Q": float(diff[1]), "P": float(diff[2])}
