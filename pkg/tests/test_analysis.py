import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sgosc.analysis import (
    GAMMA2_CAP,
    cooling_floor,
    equilibrium_point,
    exponential_rate_fit,
    finite_form_rate,
    finite_form_solution,
    lyapunov_matrix,
    lyapunov_residual,
    lyapunov_v1,
    lyapunov_v1_rate,
    positivity_bound,
    positivity_verdict,
    stability_condition_dr,
    verify_lyapunov_matrix,
)
from sgosc.controllers import Controller, ControllerConfig, ControllerMemory, Law, SgaGains
from sgosc.errors import InvalidInputError
from sgosc.integrator import Scenario, Trajectory, simulate_continuous
from sgosc.model import MeanState, OscillatorParams, Target

UNIT = OscillatorParams(1.0, 1.0)


class TestLyapunovV1:
    target = Target.from_energy(1.8, 1.0)
    gains = SgaGains(3.0, 0.5)

    def test_zero_at_equilibrium(self):
        assert lyapunov_v1(MeanState(1.8, 0.4, 0.1), ControllerMemory(0.0, 1.8), self.gains, self.target) == 0.0

    def test_value(self):
        v = lyapunov_v1(MeanState(2.8, 0, 0), ControllerMemory(0.6, 2.0), self.gains, self.target)
        assert v == pytest.approx(0.6)

    def test_zero_gain(self):
        with pytest.raises(ZeroDivisionError, match="W"):
            lyapunov_v1(MeanState(1, 0, 0), ControllerMemory(0, 0), SgaGains(3.0, 0.0), self.target)

    def test_derivative_identity(self, registry):
        traj = simulate_continuous(registry("fig1-left").members()[0])
        h = traj.step
        fd = (traj.V1[2:] - traj.V1[:-2]) / (2 * h)
        exact = np.array([lyapunov_v1_rate(MeanState(*s), UNIT, 1.8) for s in traj.states[1:-1]])
        assert np.max(np.abs(fd - exact)) < 1e-4
        assert np.max(np.diff(traj.V1)) <= 1e-8


class TestPositivity:
    def test_heating(self):
        assert positivity_bound("heating", 0.1, 0.8, 1.0) == 1.0
        assert positivity_bound("heating", 0.1, 0.8, 2.0) == 0.25

    def test_cooling(self):
        assert positivity_bound("cooling", 0.8, 0.2, 1.0) == pytest.approx(1 / 9)

    def test_shallow_cooling_capped(self):
        assert positivity_bound("cooling", 0.8 * (1 + 1e-15), 0.8, 1.0) == GAMMA2_CAP

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            positivity_bound("cooling", 0.8, 0.0, 1.0)
        with pytest.raises(InvalidInputError):
            positivity_bound("heating", 0.8, 0.2, 1.0)
        with pytest.raises(InvalidInputError):
            positivity_bound("cooling", 0.2, 0.8, 1.0)
        with pytest.raises(ValueError):
            positivity_bound("sideways", 0.2, 0.8, 1.0)

    def test_verdict(self):
        v = positivity_verdict(0.8, 0.2, 1.0, 0.25)
        assert (v.mode, v.alpha, v.satisfied) == ("cooling", 0.5, False)
        assert positivity_verdict(0.1, 0.8, 1.0, 0.5).satisfied
        assert positivity_verdict(0.5, 0.5, 1.0, 0.5) is None

    @pytest.mark.parametrize("alpha, e0, expected", [(0.0, 0.8, 0.0), (1.0, 0.8, 0.4), (3.0, 1.0, 0.75)])
    def test_cooling_floor(self, alpha, e0, expected):
        assert cooling_floor(alpha, e0) == pytest.approx(expected)

    @given(st.floats(0.01, 5), st.floats(1.01, 20), st.floats(0.05, 5), st.floats(1e-4, 50))
    def test_floor_equivalent_to_bound(self, e_star, ratio, omega0, gamma2):
        e0 = ratio * e_star
        bound = positivity_bound("cooling", e0, e_star, omega0)
        assume(abs(gamma2 / bound - 1) > 1e-9)
        alpha = math.sqrt(gamma2) * omega0
        assert (cooling_floor(alpha, e0) <= e_star) == (gamma2 <= bound)


class TestFiniteForm:
    def test_initial_value(self):
        assert finite_form_solution(0.0, 0.1, 0.6, 15, UNIT) == pytest.approx(0.1)

    def test_limit_and_rate(self):
        assert finite_form_solution(10.0, 0.1, 0.6, 15, UNIT) == pytest.approx(0.5625, abs=1e-15)
        assert finite_form_rate(15, UNIT) == 32.0

    def test_large_gain(self):
        assert finite_form_solution(10.0, 0.1, 0.6, 1e12, UNIT) == pytest.approx(0.6, abs=1e-11)

    def test_array(self):
        out = finite_form_solution(np.array([0.0, 1.0]), 0.1, 0.6, 15, UNIT)
        assert out.shape == (2,)

    @given(st.floats(0, 2), st.floats(0, 3), st.floats(0.01, 3), st.floats(0.1, 30), st.floats(0.2, 3), st.floats(0.2, 3))
    def test_solves_ode(self, t, e0, e_star, gain, omega0, gamma):
        params = OscillatorParams(omega0, gamma)
        h = 1e-5
        t = max(t, h)
        E = finite_form_solution(t, e0, e_star, gain, params)
        dE = (finite_form_solution(t + h, e0, e_star, gain, params) - finite_form_solution(t - h, e0, e_star, gain, params)) / (2 * h)
        residual = dE + 2 * gamma * (gain * (E - e_star) * omega0 + E)
        # central difference error scales with rate^3 h^2
        rate = finite_form_rate(gain, params)
        assert abs(residual) < 1e-8 * max(1.0, rate**3 * (e0 + e_star))

    def test_matches_simulation(self):
        s = Scenario("f", UNIT, ControllerConfig(Law.INCOHERENT_FINITE, SgaGains(gamma_fin=15), e_star=0.6), (0.3,), t_final=2.0)
        traj = simulate_continuous(s)
        exact = finite_form_solution(traj.times, 0.3, 0.6, 15, UNIT)
        assert np.max(np.abs(traj.E - exact)) < 1e-6


class TestStability:
    def test_cases(self):
        assert stability_condition_dr(1.0, 0.2, 0.2)
        assert not stability_condition_dr(1.0, 3.0, 0.5)
        assert not stability_condition_dr(1.0, 0.5, 0.5)

    @pytest.mark.parametrize("gamma0", [0.5, 1e-9, 0.999])
    def test_lyapunov_matrix(self, gamma0):
        R = lyapunov_matrix(UNIT, gamma0)
        assert np.allclose(R, R.T)
        assert np.linalg.eigvalsh(R).min() > 0
        assert np.linalg.eigvalsh(lyapunov_residual(R, UNIT, gamma0)).max() <= 1e-10
        M = UNIT.drift_matrix + 0.5 * gamma0 * np.eye(2)
        np.testing.assert_allclose(R @ M + M.T @ R, -np.eye(2), atol=1e-10)

    @pytest.mark.parametrize("gamma0", [1.0, 2.0, 0.0])
    def test_infeasible_gamma0(self, gamma0):
        with pytest.raises(InvalidInputError):
            lyapunov_matrix(UNIT, gamma0)

    def test_rejects_negative_definite(self):
        with pytest.raises(InvalidInputError):
            verify_lyapunov_matrix(-np.eye(2), UNIT, 0.5)

    def test_rejects_residual(self):
        # identity is positive definite but A + A^T has a positive eigenvalue here
        with pytest.raises(InvalidInputError):
            verify_lyapunov_matrix(np.eye(2), OscillatorParams(3.0, 0.1), 0.05)


def _synthetic(times, z_star, offset):
    z = np.asarray(z_star) + offset
    E, P, Q, u, n = z.T
    states = np.column_stack([E, Q, P])
    memory = np.column_stack([u, n])
    return Trajectory(times, states, memory.copy(), np.zeros((len(times), 3)), memory=memory, e_star=z_star[0])


class TestRateFit:
    z_star = (0.8, 0.0, 0.0, 0.0, 0.8)

    def test_synthetic_rate(self):
        t = np.linspace(0, 20, 2001)
        v = np.array([0.3, -0.2, 0.5, 0.1, 0.4])
        fit = exponential_rate_fit(_synthetic(t, self.z_star, np.exp(-0.7 * t)[:, None] * v), self.z_star)
        assert fit.rate == pytest.approx(0.7, abs=1e-3)
        assert not fit.saturated
        assert fit.relative_residual < 1e-6

    def test_constant_saturated(self):
        t = np.linspace(0, 5, 51)
        fit = exponential_rate_fit(_synthetic(t, self.z_star, np.zeros((51, 5))), self.z_star)
        assert fit.saturated

    def test_compliant_dr_decays(self):
        ctrl = ControllerConfig(Law.SGA_DR, SgaGains(0.2, 0.2, 1.0, 1.0), e_star=0.8)
        s = Scenario("dr", UNIT, ctrl, (0.1,), t_final=20.0)
        traj = simulate_continuous(s)
        target = Controller(ctrl, UNIT).target
        assert exponential_rate_fit(traj, equilibrium_point(target)).rate > 0

    def test_bad_window(self):
        t = np.linspace(0, 1, 11)
        with pytest.raises(InvalidInputError):
            exponential_rate_fit(_synthetic(t, self.z_star, np.ones((11, 5))), self.z_star, tail_fraction=0)
