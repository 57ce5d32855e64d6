import numpy as np
import pytest
from scipy.linalg import expm as scipy_expm

from pinnctl.network import PulseTable, init_params, sample_pulse
from pinnctl.propagation import (
    expm_hermitian,
    propagate_density,
    propagate_lindblad,
    propagate_oracle,
    propagate_unitary,
)
from pinnctl.spins import (
    PRESETS,
    SpinSystem,
    drift_hamiltonian,
    noise_operators,
    spin_half_operator,
)
from pinnctl.targets import thermal_deviation


def random_hermitian(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


def zero_pulse(duration, n, channels):
    return PulseTable(duration, np.zeros((n, channels, 2)))


class TestExpmHermitian:
    def test_zero_time_is_identity(self):
        h = random_hermitian(np.random.default_rng(0), 4)
        assert np.allclose(expm_hermitian(h, 0.0), np.eye(4))

    def test_defm_drift_phases(self):
        # diagonal drift: phases exp(-i * 2*pi*J * (+-1/4) * dt)
        h0 = drift_hamiltonian(PRESETS["defm"])
        dt = 3.7e-3
        u = expm_hermitian(h0, dt)
        j = 48.2
        expected = np.exp(-1j * 2 * np.pi * j * dt * np.array([0.25, -0.25, -0.25, 0.25]))
        assert np.allclose(np.diag(u), expected)

    def test_matches_pade_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            h = random_hermitian(rng, 4, scale=100.0)
            dt = rng.uniform(0, 1e-2)
            ours = expm_hermitian(h, dt)
            pade = scipy_expm(-1j * h * dt)
            assert np.linalg.norm(ours - pade) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            expm_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)


class TestPropagateUnitary:
    def test_zero_everything_is_identity(self):
        sys_ = SpinSystem(2, ((0,), (1,)))
        res = propagate_unitary(sys_, zero_pulse(0.01, 8, 2))
        assert np.allclose(res.final, np.eye(4))

    def test_drift_only_phases(self):
        sys_ = PRESETS["defm"]
        duration = 1.0 / (2 * 48.2)
        res = propagate_unitary(sys_, zero_pulse(duration, 16, 2))
        expected = np.diag(np.exp(-1j * 2 * np.pi * 48.2 * duration * np.array([0.25, -0.25, -0.25, 0.25])))
        assert np.linalg.norm(res.final - expected) < 1e-9

    def test_pi_rotation_on_one_spin(self):
        # constant x pulse of area pi on spin 0, no drift
        sys_ = SpinSystem(2, ((0,), (1,)))
        duration, n = 1e-3, 64
        samples = np.zeros((n, 2, 2))
        samples[:, 0, 0] = np.pi / duration
        res = propagate_unitary(sys_, PulseTable(duration, samples))
        ix = spin_half_operator(2, 0, "x")
        expected = scipy_expm(-1j * np.pi * ix)
        assert np.linalg.norm(res.final - expected) < 1e-9

    def test_unitarity_drift_per_segment(self):
        p = init_params((1, 16, 16, 4), 2 * np.pi * 1000, 0.02, seed=8)
        res = propagate_unitary(PRESETS["defm"], p, n_fine=4096)
        defect = np.linalg.norm(res.final.conj().T @ res.final - np.eye(4))
        assert defect < 1e-13 * 4096

    def test_time_reversal_returns_identity(self):
        # pulse then its time-reversed negation, drift zeroed
        sys_ = SpinSystem(2, ((0,), (1,)))
        rng = np.random.default_rng(5)
        n = 32
        fwd = rng.normal(0, 1000, size=(n, 2, 2))
        both = np.concatenate([fwd, -fwd[::-1]], axis=0)
        res = propagate_unitary(sys_, PulseTable(2e-3, both))
        assert np.linalg.norm(res.final - np.eye(4)) < 1e-8

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            propagate_unitary(PRESETS["defm"], zero_pulse(0.01, 4, 1))

    def test_second_order_convergence_midpoint(self):
        p = init_params((1, 10, 10, 4), 2 * np.pi * 500, 0.02, seed=2)
        oracle = propagate_oracle(PRESETS["defm"], p, mode="unitary").final
        errs = {}
        for n in (2**6, 2**7, 2**8, 2**9):
            errs[n] = np.linalg.norm(propagate_unitary(PRESETS["defm"], p, n_fine=n).final - oracle)
        for n in (2**6, 2**7, 2**8):
            ratio = errs[n] / errs[2 * n]
            assert 3.0 < ratio < 5.0


class TestPropagateDensity:
    def test_identity_state_unchanged(self):
        p = init_params((1, 8, 8, 4), 2 * np.pi * 500, 0.02, seed=1)
        rho0 = np.eye(4) / 4
        res = propagate_density(PRESETS["defm"], p, rho0, n_fine=256)
        assert np.linalg.norm(res.final - rho0) < 1e-12

    def test_thermal_state_commutes_with_drift(self):
        rho0 = thermal_deviation()
        res = propagate_density(PRESETS["tcp"], zero_pulse(0.05, 64, 1), rho0)
        assert np.linalg.norm(res.final - rho0) < 1e-10

    def test_purity_preserved(self):
        p = init_params((1, 8, 8, 2), 2 * np.pi * 200, 0.05, seed=6)
        rho0 = thermal_deviation()
        res = propagate_density(PRESETS["tcp"], p, rho0, n_fine=512)
        assert abs(np.trace(res.final @ res.final) - np.trace(rho0 @ rho0)) < 1e-9
        assert np.linalg.norm(res.final - res.final.conj().T) < 1e-9


class TestPropagateLindblad:
    def test_gamma_zero_matches_density(self):
        p = init_params((1, 8, 8, 2), 2 * np.pi * 200, 0.05, seed=2)
        noise = noise_operators(PRESETS["tcp"], "global", 0.0)
        rho0 = thermal_deviation()
        a = propagate_lindblad(PRESETS["tcp"], p, rho0, noise, n_fine=1024)
        b = propagate_density(PRESETS["tcp"], p, rho0, n_fine=1024)
        assert np.linalg.norm(a.final - b.final) < 1e-8

    def test_trace_and_hermiticity_preserved(self):
        p = init_params((1, 8, 8, 2), 2 * np.pi * 200, 0.05, seed=2)
        noise = noise_operators(PRESETS["tcp"], "local", 0.06)
        rho0 = np.eye(4) / 4 + 0.1 * thermal_deviation()
        res = propagate_lindblad(PRESETS["tcp"], p, rho0, noise, n_fine=512)
        assert abs(np.trace(res.final) - np.trace(rho0)) < 1e-7
        assert np.linalg.norm(res.final - res.final.conj().T) < 1e-7

    def test_coherence_decays_under_global_noise(self):
        sysc = PRESETS["tcp"]
        noise = noise_operators(sysc, "global", 0.05)
        rho0 = spin_half_operator(2, 0, "x") + spin_half_operator(2, 1, "x")
        times = np.linspace(0, 0.05, 11)
        res = propagate_lindblad(
            sysc, zero_pulse(0.05, 256, 1), rho0, noise, sample_times=times
        )
        norms = [np.linalg.norm(r) for _, r in res.trajectory]
        # overall decay against the dense adaptive oracle
        oracle = propagate_oracle(
            sysc, zero_pulse(0.05, 256, 1), rho0, mode="lindblad", noise=noise,
            rtol=1e-10, atol=1e-12,
        )
        assert np.linalg.norm(res.final - oracle.final) < 1e-7
        assert norms[-1] < norms[0]

    def test_maximally_mixed_is_stationary_under_local_noise(self):
        noise = noise_operators(PRESETS["tcp"], "local", 0.07)
        rho0 = np.eye(4) / 4
        res = propagate_lindblad(PRESETS["tcp"], zero_pulse(0.05, 128, 1), rho0, noise)
        assert np.linalg.norm(res.final - rho0) < 1e-10


class TestOracle:
    def test_zero_hamiltonian_identity(self):
        sys_ = SpinSystem(2, ((0,), (1,)))
        res = propagate_oracle(sys_, zero_pulse(0.01, 4, 2), mode="unitary")
        assert np.linalg.norm(res.final - np.eye(4)) < 1e-8

    def test_constant_hamiltonian_matches_expm(self):
        sys_ = PRESETS["defm"]
        duration, n = 5e-3, 8
        samples = np.full((n, 2, 2), 300.0)
        table = PulseTable(duration, samples)
        h = drift_hamiltonian(sys_)
        from pinnctl.spins import control_operator_stack

        h = h + np.einsum("c,cij->ij", table.flat_amplitudes()[0], control_operator_stack(sys_))
        expected = expm_hermitian(h, duration)
        res = propagate_oracle(sys_, table, mode="unitary", rtol=1e-10, atol=1e-12)
        assert np.linalg.norm(res.final - expected) < 1e-7

    def test_network_pulse_agreement_at_fine_grid(self):
        p = init_params((1, 12, 12, 4), 2 * np.pi * 800, 0.02, seed=4)
        oracle = propagate_oracle(PRESETS["defm"], p, mode="unitary").final
        pwc = propagate_unitary(PRESETS["defm"], p, n_fine=2**14).final
        assert np.linalg.norm(pwc - oracle) < 1e-6
