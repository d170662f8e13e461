import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgosc.controllers import ControllerConfig, Law, SgaGains
from sgosc.errors import ConfigError, InfeasibleStateError, InvalidInputError, TruncationError, UnphysicalBathError
from sgosc.integrator import Scenario, Trajectory, simulate_continuous
from sgosc.lindblad import (
    BandedGenerator,
    DensityMatrix,
    build_operators,
    displaced_thermal_state,
    initial_ensemble,
    lindblad_rhs,
    max_discrepancy,
    simulate_lindblad,
)
from sgosc.model import ControlInput, MeanState, OscillatorParams, mean_field_rhs

UNIT = OscillatorParams(1.0, 1.0)


def random_state(dim, support, seed):
    """Random full-rank density matrix on the lowest ``support`` levels."""
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
    block = G @ G.conj().T
    rho = np.zeros((dim, dim), dtype=complex)
    rho[:support, :support] = block / np.trace(block)
    return rho


def moments(rho, omega0=1.0):
    return np.array(DensityMatrix(rho).moments(omega0))


class TestOperators:
    def test_qubit(self):
        ops = build_operators(2, 1.0)
        np.testing.assert_array_equal(ops.annihilate, [[0, 1], [0, 0]])
        np.testing.assert_array_equal(ops.create, [[0, 0], [1, 0]])

    def test_position_elements(self):
        ops = build_operators(10, 1.0)
        for k in range(9):
            assert ops.position[k, k + 1] == pytest.approx(math.sqrt((k + 1) / 2))
        np.testing.assert_array_equal(np.diag(ops.number).real, np.arange(10))

    @pytest.mark.parametrize("omega0", [1.0, 0.3, 2.5])
    def test_commutator(self, omega0):
        ops = build_operators(12, omega0)
        comm = ops.position @ ops.momentum - ops.momentum @ ops.position
        np.testing.assert_allclose(comm[:-1, :-1], 1j * np.eye(11), atol=1e-12)

    def test_hamiltonian_matches_quadratures(self):
        ops = build_operators(12, 2.0)
        quad = 0.5 * (ops.momentum @ ops.momentum + 4.0 * ops.position @ ops.position)
        np.testing.assert_allclose((quad - 2.0 * 0.5 * np.eye(12))[:-1, :-1], ops.h0[:-1, :-1], atol=1e-12)

    def test_dimension(self):
        with pytest.raises(InvalidInputError):
            build_operators(1, 1.0)


class TestStates:
    def test_vacuum(self):
        rho = displaced_thermal_state(10, 0.0, 0.0, 0.0, 1.0).entries
        expected = np.zeros((10, 10))
        expected[0, 0] = 1
        np.testing.assert_allclose(rho, expected, atol=1e-15)

    def test_coherent(self):
        dm = displaced_thermal_state(30, 1.0, 0.0, 0.5, 1.0)
        rho = dm.entries
        assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-10)
        # Poisson populations with mean |beta|^2 = 1/2
        k = np.arange(30)
        poisson = np.exp(-0.5) * 0.5**k / np.array([math.factorial(i) for i in k], dtype=float)
        np.testing.assert_allclose(np.diag(rho).real, poisson, atol=1e-12)
        np.testing.assert_allclose(dm.moments(1.0), (0.5, 1.0, 0.0), atol=1e-10)

    def test_thermal(self):
        dm = displaced_thermal_state(60, 0.0, 0.0, 0.8, 1.0)
        pops = np.diag(dm.entries).real
        k = np.arange(60)
        np.testing.assert_allclose(pops, 0.8**k / 1.8 ** (k + 1), rtol=1e-9, atol=1e-16)
        assert dm.moments(1.0).E == pytest.approx(0.8, abs=1e-6)

    @given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0, 1.0), st.floats(0.5, 2.0))
    def test_prescribed_moments(self, q0, p0, extra, omega0):
        beta2 = omega0 * q0**2 / 2 + p0**2 / (2 * omega0)
        e0 = omega0 * (beta2 + extra)
        dm = displaced_thermal_state(60, q0, p0, e0, omega0)
        dm.validate()
        np.testing.assert_allclose(dm.moments(omega0), (e0, q0, p0), atol=1e-6)

    def test_infeasible(self):
        with pytest.raises(InfeasibleStateError):
            displaced_thermal_state(30, 1.0, 0.0, 0.3, 1.0)

    def test_truncation(self):
        with pytest.raises(TruncationError):
            displaced_thermal_state(6, 0.0, 0.0, 2.5, 1.0)

    def test_quasi_decomposition(self):
        parts = initial_ensemble(40, 1.0, 0.0, 0.1, 1.0)
        weights = [w for w, _ in parts]
        assert weights == pytest.approx([5.0, -4.0])
        combined = sum(w * np.array(dm.moments(1.0)) for w, dm in parts)
        np.testing.assert_allclose(combined, (0.1, 1.0, 0.0), atol=1e-12)
        for _, dm in parts:
            dm.validate()


class TestGenerator:
    def test_thermal_fixed_point(self):
        n = 0.8
        ops = build_operators(60, 1.0)
        rho = displaced_thermal_state(60, 0, 0, n, 1.0).entries
        assert np.max(np.abs(lindblad_rhs(rho, 0.0, n, ops, UNIT))) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_trace_free(self, seed):
        rng = np.random.default_rng(seed)
        ops = build_operators(12, 1.0)
        rho = random_state(12, 12, seed)
        out = lindblad_rhs(rho, rng.normal(), rng.uniform(0, 3), ops, UNIT)
        assert abs(np.trace(out)) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_moment_identities(self, seed):
        rng = np.random.default_rng(100 + seed)
        params = OscillatorParams(rng.uniform(0.5, 2), rng.uniform(0.3, 2))
        ops = build_operators(14, params.omega0)
        rho = random_state(14, 10, seed)
        u, n = rng.normal(), rng.uniform(0, 3)
        g = params.gamma
        a = ops.annihilate
        H0 = ops.h0
        dissipator = lindblad_rhs(rho, 0.0, n, ops, params) + 1j * (H0 @ rho - rho @ H0)
        mean_a = np.trace(a @ rho)
        assert np.trace(a @ dissipator) == pytest.approx(-g * mean_a, abs=1e-10)
        mean_n = np.trace(ops.number @ rho).real
        assert np.trace(ops.number @ dissipator).real == pytest.approx(2 * g * (n - mean_n), abs=1e-10)
        # the full generator reproduces the averaged equations
        d = lindblad_rhs(rho, u, n, ops, params)
        dm = np.array([np.trace(op @ d).real for op in (params.omega0 * ops.number, ops.position, ops.momentum)])
        expected = mean_field_rhs(MeanState(*moments(rho, params.omega0)), ControlInput(u, n), params)
        np.testing.assert_allclose(dm, expected, atol=1e-10)

    @pytest.mark.parametrize("seed", range(4))
    def test_banded_matches_dense(self, seed):
        rng = np.random.default_rng(seed)
        params = OscillatorParams(rng.uniform(0.5, 2), rng.uniform(0.3, 2))
        dim = 16
        rho = random_state(dim, dim, seed)
        u, n = rng.normal(), rng.uniform(0, 3)
        dense = lindblad_rhs(rho, u, n, build_operators(dim, params.omega0), params)
        banded = BandedGenerator(dim, params)(rho, u, n)
        np.testing.assert_allclose(banded, dense, atol=1e-12)
        np.testing.assert_allclose(BandedGenerator(dim, params)(rho, 0.0, 0.0), lindblad_rhs(rho, 0.0, 0.0, build_operators(dim, params.omega0), params), atol=1e-12)

    def test_negative_bath(self):
        with pytest.raises(UnphysicalBathError):
            lindblad_rhs(np.eye(3) / 3, 0.0, -0.1, build_operators(3, 1.0), UNIT)
        with pytest.raises(UnphysicalBathError):
            BandedGenerator(3, UNIT)(np.eye(3) / 3, 0.0, -0.1)


def replay(times, u, n, e_star=0.0):
    k = len(times)
    controls = np.column_stack([np.full(k, u), np.full(k, n)])
    return Trajectory(times, np.zeros((k, 3)), controls, np.zeros((k, 3)), e_star=e_star)


def oracle_scenario(e0, dim, q0=0.0, p0=0.0):
    ctrl = ControllerConfig(Law.INCOHERENT_EXPONENTIAL, SgaGains(), e_star=0.5)
    return Scenario("o", UNIT, ctrl, (e0,), q0=q0, p0=p0, t_final=3.0, oracle_dim=dim)


class TestSimulateLindblad:
    def test_constant_bath_relaxation(self):
        times = np.arange(3001) * 1e-3
        oracle = simulate_lindblad(oracle_scenario(1.5, 40), replay(times, 0.0, 0.5))
        exact = 0.5 + (1.5 - 0.5) * np.exp(-2 * times)
        assert np.max(np.abs(oracle.E - exact)) < 1e-6
        assert np.max(np.abs(oracle.states[:, 1:])) < 1e-12

    def test_vacuum_stationary(self):
        times = np.arange(501) * 1e-2
        oracle = simulate_lindblad(oracle_scenario(0.0, 10), replay(times, 0.0, 0.0))
        np.testing.assert_array_equal(oracle.states, 0.0)

    def test_integrity_diagnostics(self):
        times = np.arange(1001) * 1e-3
        oracle = simulate_lindblad(oracle_scenario(1.0, 40, q0=1.0, p0=0.3), replay(times, 0.7, 0.2))
        d = oracle.diagnostics
        assert d["max_trace_drift"] < 1e-8
        assert d["max_hermiticity"] < 1e-10
        assert d["min_eigenvalue"] >= -1e-6
        assert d["max_tail_mass"] < 1e-6

    def test_meanfield_agreement(self, registry):
        scenario = registry("fig2-left-caption", t_final=3.0, oracle_dim=40)
        mf = simulate_continuous(scenario)
        oracle = simulate_lindblad(scenario, mf)
        assert oracle.diagnostics["weights"] == pytest.approx([5.0, -4.0])
        assert max(max_discrepancy(mf, oracle).values()) < 1e-6

    def test_rejects_negative_replay(self):
        times = np.arange(11) * 1e-2
        with pytest.raises(UnphysicalBathError):
            simulate_lindblad(oracle_scenario(0.5, 10), replay(times, 0.0, -0.2))

    def test_needs_dimension(self):
        times = np.arange(11) * 1e-2
        s = dataclasses.replace(oracle_scenario(0.5, 10), oracle_dim=None)
        with pytest.raises(ConfigError):
            simulate_lindblad(s, replay(times, 0.0, 0.2))

    def test_truncation_escalates(self):
        times = np.arange(2001) * 1e-3
        with pytest.raises(TruncationError) as info:
            simulate_lindblad(oracle_scenario(0.0, 8), replay(times, 0.0, 5.0))
        assert info.value.exit_code == 4
