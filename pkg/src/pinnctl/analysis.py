"""Numerical studies of synthesized pulses: spectra, discretization, robustness."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from .network import NetworkParams, PulseTable, sample_pulse
from .objectives import ObjectiveSpec, evaluate_fidelity, state_fidelity
from .propagation import (
    DEFAULT_N_FINE,
    DEFAULT_SUBSTEP_TOL,
    propagate_density,
    propagate_lindblad,
)
from .spins import NoiseModel, SpinSystem, noise_operators

DEFAULT_SEGMENT_COUNTS = tuple(2**k for k in range(16))  # 2^0 .. 2^15


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("PINNCTL_THREADS", "1")))
    except ValueError:
        return 1


def _map_points(fn, points):
    workers = _max_workers()
    if workers == 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


@dataclass
class SpectrumResult:
    freqs: np.ndarray  # Hz, fftshifted
    magnitude: np.ndarray  # (channels, n) |spectrum|, continuous-time scaling
    energy_bandwidth_99: np.ndarray  # Hz per channel (full symmetric width)


@dataclass
class SweepResult:
    axis_name: str
    axis_values: list
    fidelity: list[float]
    metadata: dict = field(default_factory=dict)

    @property
    def infidelity(self) -> list[float]:
        return [1.0 - f for f in self.fidelity]


def pulse_spectrum(pulse: PulseTable, energy_fraction: float = 0.99) -> SpectrumResult:
    """DFT of the complex control u_x + i u_y per channel.

    The spectrum carries the continuous-time scaling dt * FFT so that
    sum |X|^2 df == sum |u|^2 dt (Parseval) exactly.
    """
    if pulse.n_segments < 2:
        raise ValueError("spectrum needs at least 2 segments")
    dt = pulse.dt
    n = pulse.n_segments
    freqs = np.fft.fftshift(np.fft.fftfreq(n, d=dt))
    mags = []
    widths = []
    for c in range(pulse.n_channels):
        u = pulse.samples[:, c, 0] + 1j * pulse.samples[:, c, 1]
        spec = np.fft.fftshift(np.fft.fft(u)) * dt
        mags.append(np.abs(spec))
        energy = np.abs(spec) ** 2
        total = energy.sum()
        if total == 0:
            widths.append(0.0)
            continue
        order = np.argsort(np.abs(freqs), kind="stable")
        cum = np.cumsum(energy[order])
        cut = np.searchsorted(cum, energy_fraction * total)
        cut = min(cut, n - 1)
        widths.append(2.0 * abs(freqs[order[cut]]))
    return SpectrumResult(
        freqs=freqs,
        magnitude=np.stack(mags),
        energy_bandwidth_99=np.asarray(widths),
    )


def discretization_sweep(
    params: NetworkParams,
    system: SpinSystem,
    objective: ObjectiveSpec,
    segment_counts=DEFAULT_SEGMENT_COUNTS,
) -> SweepResult:
    """Fidelity of the sampled pulse as a function of segment count."""

    def point(n: int) -> float:
        table = sample_pulse(params, n)
        return evaluate_fidelity(system, table, objective)

    fids = _map_points(point, list(segment_counts))
    return SweepResult(
        axis_name="n_segments",
        axis_values=list(segment_counts),
        fidelity=fids,
        metadata={"objective": objective.kind},
    )


def basis_trajectory(
    params,
    system: SpinSystem,
    rho0: np.ndarray,
    basis: list[np.ndarray],
    n_samples: int = 200,
    *,
    noise: NoiseModel | None = None,
    n_fine: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Expectation <psi_b| rho(t) |psi_b> on a uniform time grid.

    Returns (times (n_samples,), values (n_samples, len(basis))), values real.
    """
    for b in basis:
        if abs(np.linalg.norm(b) - 1.0) > 1e-10:
            raise ValueError("basis vectors must be normalized")
    duration = params.time_scale if isinstance(params, NetworkParams) else params.duration
    times = np.linspace(0.0, duration, n_samples)
    if noise is not None and noise.gamma > 0:
        res = propagate_lindblad(system, params, rho0, noise, n_fine=n_fine, sample_times=times)
    else:
        res = propagate_density(system, params, rho0, n_fine=n_fine, sample_times=times)
    out = np.empty((len(res.trajectory), len(basis)))
    ts = np.empty(len(res.trajectory))
    for i, (t, rho) in enumerate(res.trajectory):
        ts[i] = t
        for j, psi in enumerate(basis):
            val = np.vdot(psi, rho @ psi)
            if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
                raise FloatingPointError("expectation value is not real")
            out[i, j] = val.real
    return ts, out


def noise_sweep(
    params_by_gamma: dict[float, NetworkParams],
    system: SpinSystem,
    objective: ObjectiveSpec,
    gammas,
    kind: str,
    *,
    n_fine: int | None = None,
    substep_tol: float = DEFAULT_SUBSTEP_TOL,
) -> SweepResult:
    """Fidelity under dissipative propagation at each gamma.

    params_by_gamma maps each requested gamma to the pulse evaluated there.
    Retrain-per-gamma mode passes a different trained network per key;
    evaluate-fixed-pulse mode maps every gamma to the same network.  The
    gamma = 0 point uses the unitary path, so it equals the noiseless run
    exactly.
    """
    gammas = list(gammas)
    for g in gammas:
        if g not in params_by_gamma:
            raise KeyError(f"no parameters supplied for gamma={g}")

    def point(g: float) -> float:
        obj = objective
        if g > 0:
            obj = dc_replace(objective, noise=noise_operators(system, kind, g))
        else:
            obj = dc_replace(objective, noise=None)
        return evaluate_fidelity(
            system, params_by_gamma[g], obj, n_fine=n_fine, substep_tol=substep_tol
        )

    fids = _map_points(point, gammas)
    return SweepResult(
        axis_name="gamma",
        axis_values=gammas,
        fidelity=fids,
        metadata={"noise_kind": kind, "objective": objective.kind},
    )


def amplitude_error_sweep(
    params,
    system: SpinSystem,
    objective: ObjectiveSpec,
    deviations,
    *,
    noise: NoiseModel | None = None,
    n_fine: int | None = None,
    substep_tol: float = DEFAULT_SUBSTEP_TOL,
) -> SweepResult:
    """Fidelity with all control amplitudes scaled by (1 + du/u)."""
    deviations = list(deviations)
    if any(abs(d) > 0.5 for d in deviations):
        raise ValueError("deviations must lie within [-0.5, +0.5]")
    if isinstance(params, NetworkParams):
        base = sample_pulse(params, n_fine or DEFAULT_N_FINE)
    else:
        base = params
    obj = dc_replace(objective, noise=noise) if noise is not None else objective

    def point(dev: float) -> float:
        table = base if dev == 0.0 else base.scaled(1.0 + dev)
        return evaluate_fidelity(system, table, obj, substep_tol=substep_tol)

    fids = _map_points(point, deviations)
    return SweepResult(
        axis_name="du_over_u",
        axis_values=deviations,
        fidelity=fids,
        metadata={
            "objective": objective.kind,
            "gamma": 0.0 if noise is None else noise.gamma,
            "noise_kind": None if noise is None else noise.kind,
        },
    )


def lls_readout_transform(rho: np.ndarray, system: SpinSystem) -> np.ndarray:
    """Model of the post-sequence readout: free evolution for 1/(4*Delta)
    followed by a collective (pi/2)_y pulse.

    Documented convenience for trajectory post-processing; no lineshape or
    acquisition simulation is attempted.
    """
    from .propagation import expm_hermitian
    from .spins import drift_hamiltonian, spin_half_operator

    offsets = [abs(o) for o in system.offsets_hz if o != 0.0]
    if not offsets:
        raise ValueError("readout delay requires a nonzero shift difference")
    delta_hz = 2.0 * max(offsets)
    delay = 1.0 / (4.0 * delta_hz)
    u_delay = expm_hermitian(drift_hamiltonian(system), delay)
    iy = spin_half_operator(system.n_spins, 0, "y") + spin_half_operator(system.n_spins, 1, "y")
    u_pulse = expm_hermitian(iy * (np.pi / 2.0), 1.0)
    u = u_pulse @ u_delay
    return u @ rho @ u.conj().T


def robust_width(sweep: SweepResult, level: float = 0.95) -> float:
    """Width of the contiguous deviation interval (around the peak) with
    fidelity >= level * peak."""
    devs = np.asarray(sweep.axis_values, dtype=float)
    fids = np.asarray(sweep.fidelity, dtype=float)
    order = np.argsort(devs)
    devs, fids = devs[order], fids[order]
    peak_idx = int(np.argmax(fids))
    thresh = level * fids[peak_idx]
    lo = peak_idx
    while lo > 0 and fids[lo - 1] >= thresh:
        lo -= 1
    hi = peak_idx
    while hi < len(fids) - 1 and fids[hi + 1] >= thresh:
        hi += 1
    return float(devs[hi] - devs[lo])
