"""Time evolution under piecewise-constant Hamiltonians.

The primary propagator multiplies exact segment exponentials (eigendecomposition
of each 4x4 Hermitian segment Hamiltonian).  Dissipative evolution integrates
the vectorized master equation with fixed-step RK4 inside each segment.  An
adaptive Dormand-Prince integrator treating the network as a continuous-time
Hamiltonian serves as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .network import NetworkParams, PulseTable, forward_batch, sample_pulse
from .spins import NoiseModel, SpinSystem, control_operator_stack, drift_hamiltonian

DEFAULT_N_FINE = 4096  # 2**12
# Per-RK4-substep cap on (gamma*||H0|| + ||H||)*h; 0.005 keeps the gamma=0
# dissipative path within 1e-8 of the exact unitary propagation.
DEFAULT_SUBSTEP_TOL = 0.005


@dataclass
class EvolutionResult:
    final: np.ndarray
    trajectory: list[tuple[float, np.ndarray]] | None
    method: str
    n_steps: int


def _hermitian_check(h: np.ndarray, tol: float = 1e-10):
    if np.linalg.norm(h - h.conj().T) > tol * max(1.0, np.linalg.norm(h)):
        raise ValueError("matrix is not Hermitian")


def expm_hermitian(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for Hermitian h via eigendecomposition."""
    _hermitian_check(h)
    if dt < 0:
        raise ValueError("dt must be >= 0")
    evals, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * evals * dt)
    return (vecs * phases) @ vecs.conj().T


def _as_pulse(system: SpinSystem, pulse, n_fine: int | None) -> PulseTable:
    if isinstance(pulse, PulseTable):
        table = pulse
    elif isinstance(pulse, NetworkParams):
        table = sample_pulse(pulse, n_fine or DEFAULT_N_FINE)
    else:
        raise TypeError(f"cannot interpret {type(pulse).__name__} as a pulse")
    if table.n_channels != system.n_channels:
        raise ValueError(
            f"pulse has {table.n_channels} channels, system has {system.n_channels}"
        )
    return table


def segment_hamiltonians(system: SpinSystem, table: PulseTable) -> np.ndarray:
    """Batched H_s = H0 + sum_c u_cx X_c + u_cy Y_c, shape (N, dim, dim)."""
    h0 = drift_hamiltonian(system)
    ops = control_operator_stack(system)
    amps = table.flat_amplitudes()
    return h0[None, :, :] + np.einsum("nc,cij->nij", amps, ops)


def segment_unitaries(h_batch: np.ndarray, dt: float):
    """Eigendecompose each segment Hamiltonian and form exp(-i H dt).

    Returns (evals (N,d), vecs (N,d,d), unitaries (N,d,d)).
    """
    evals, vecs = np.linalg.eigh(h_batch)
    phases = np.exp(-1j * evals * dt)
    units = np.einsum("nik,nk,njk->nij", vecs, phases, vecs.conj())
    return evals, vecs, units


def prefix_products(units: np.ndarray) -> np.ndarray:
    """P[s] = U_s ... U_1 for s = 1..N, with P[0] = identity; shape (N+1, d, d)."""
    n, d, _ = units.shape
    out = np.empty((n + 1, d, d), dtype=complex)
    out[0] = np.eye(d)
    acc = np.eye(d, dtype=complex)
    for s in range(n):
        acc = units[s] @ acc
        out[s + 1] = acc
    return out


def suffix_products(units: np.ndarray) -> np.ndarray:
    """S[s] = U_N ... U_{s+2} U_{s+1} for s = 0..N, with S[N] = identity."""
    n, d, _ = units.shape
    out = np.empty((n + 1, d, d), dtype=complex)
    out[n] = np.eye(d)
    acc = np.eye(d, dtype=complex)
    for s in range(n - 1, -1, -1):
        acc = acc @ units[s]
        out[s] = acc
    return out


def _snapshot_indices(sample_times, duration: float, n: int) -> dict[int, float]:
    idx = {}
    if sample_times is not None:
        for t in sample_times:
            s = int(round(np.clip(t, 0.0, duration) / duration * n))
            idx.setdefault(s, t)
    return idx


def propagate_unitary(
    system: SpinSystem, pulse, *, n_fine: int | None = None, sample_times=None
) -> EvolutionResult:
    """U(T) as the ordered product of segment exponentials over the pulse."""
    table = _as_pulse(system, pulse, n_fine)
    h_batch = segment_hamiltonians(system, table)
    _, _, units = segment_unitaries(h_batch, table.dt)
    n, d = table.n_segments, system.dimension
    snap = _snapshot_indices(sample_times, table.duration, n)
    traj = [] if sample_times is not None else None
    acc = np.eye(d, dtype=complex)
    if 0 in snap:
        traj.append((snap[0], acc.copy()))
    for s in range(n):
        acc = units[s] @ acc
        if s + 1 in snap:
            traj.append((snap[s + 1], acc.copy()))
    return EvolutionResult(final=acc, trajectory=traj, method="pwc_expm", n_steps=n)


def propagate_density(
    system: SpinSystem, pulse, rho0: np.ndarray, *, n_fine: int | None = None, sample_times=None
) -> EvolutionResult:
    """rho(T) = U rho0 U^dagger on the same piecewise-constant grid."""
    _hermitian_check(rho0)
    res = propagate_unitary(system, pulse, n_fine=n_fine, sample_times=sample_times)
    final = res.final @ rho0 @ res.final.conj().T
    traj = None
    if res.trajectory is not None:
        traj = [(t, u @ rho0 @ u.conj().T) for t, u in res.trajectory]
    return EvolutionResult(final=final, trajectory=traj, method="pwc_expm", n_steps=res.n_steps)


def liouvillian(h: np.ndarray, noise: NoiseModel | None = None) -> np.ndarray:
    """Vectorized generator: d vec(rho)/dt = L vec(rho) (row-major vec)."""
    d = h.shape[0]
    eye = np.eye(d)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    if noise is not None and noise.gamma > 0:
        rate = noise.rate
        for v in noise.collapse_ops:
            vdv = v.conj().T @ v
            lv += rate * (
                np.kron(v, v.conj())
                - 0.5 * (np.kron(vdv, eye) + np.kron(eye, vdv.T))
            )
    return lv


def rk4_step_matrix(lv: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for the linear system y' = L y.

    With a constant generator the RK4 update collapses to the 4th-order
    Taylor polynomial of exp(h L).
    """
    d = lv.shape[0]
    hl = h * lv
    hl2 = hl @ hl
    return np.eye(d) + hl + hl2 / 2.0 + (hl2 @ hl) / 6.0 + (hl2 @ hl2) / 24.0


def lindblad_substeps(
    system: SpinSystem, table: PulseTable, noise: NoiseModel, tol: float, amp_bound: float | None = None
) -> int:
    """Power-of-two substep count per segment so (rate + ||H||)*h <= tol.

    When amp_bound is given the bound uses it instead of the realized
    amplitudes, making the count independent of the pulse values.
    """
    ops = control_operator_stack(system)
    op_norms = np.array([np.max(np.abs(np.linalg.eigvalsh(o))) for o in ops])
    h0_norm = float(np.max(np.abs(np.linalg.eigvalsh(drift_hamiltonian(system)))))
    if amp_bound is not None:
        ctrl = amp_bound * float(op_norms.sum())
    else:
        ctrl = float(np.max(np.abs(table.flat_amplitudes()) @ op_norms))
    rate_total = noise.rate + h0_norm + ctrl
    needed = rate_total * table.dt / tol
    m = 1
    while m < needed:
        m *= 2
        if m > 2**20:
            raise RuntimeError("Lindblad step-size underflow: pathological parameters")
    return m


def segment_lindblad_maps(
    system: SpinSystem,
    table: PulseTable,
    noise: NoiseModel,
    substeps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment RK4 substep matrices R and segment maps M = R^substeps.

    Returns (R, M), each of shape (N, d^2, d^2).
    """
    h_batch = segment_hamiltonians(system, table)
    d = system.dimension
    eye = np.eye(d)
    lv = -1j * (
        np.einsum("nij,kl->nikjl", h_batch, eye).reshape(-1, d * d, d * d)
        - np.einsum("ij,nkl->nikjl", eye, h_batch.transpose(0, 2, 1)).reshape(-1, d * d, d * d)
    )
    if noise.gamma > 0:
        lv = lv + liouvillian(np.zeros((d, d)), noise)[None, :, :]
    h_sub = table.dt / substeps
    hl = h_sub * lv
    hl2 = np.matmul(hl, hl)
    r = np.eye(d * d)[None, :, :] + hl + hl2 / 2.0 + np.matmul(hl2, hl) / 6.0 + np.matmul(hl2, hl2) / 24.0
    m = r
    k = substeps
    while k > 1:
        m = np.matmul(m, m)
        k //= 2
    return r, m


def propagate_lindblad(
    system: SpinSystem,
    pulse,
    rho0: np.ndarray,
    noise: NoiseModel,
    *,
    n_fine: int | None = None,
    sample_times=None,
    substep_tol: float = DEFAULT_SUBSTEP_TOL,
) -> EvolutionResult:
    """Integrate the master equation with collapse rate gamma*||H0||."""
    _hermitian_check(rho0)
    table = _as_pulse(system, pulse, n_fine)
    m_sub = lindblad_substeps(system, table, noise, substep_tol)
    _, maps = segment_lindblad_maps(system, table, noise, m_sub)
    d = system.dimension
    n = table.n_segments
    snap = _snapshot_indices(sample_times, table.duration, n)
    traj = [] if sample_times is not None else None
    vec = rho0.reshape(-1).astype(complex)
    if 0 in snap:
        traj.append((snap[0], vec.reshape(d, d).copy()))
    for s in range(n):
        vec = maps[s] @ vec
        if s + 1 in snap:
            traj.append((snap[s + 1], vec.reshape(d, d).copy()))
    return EvolutionResult(
        final=vec.reshape(d, d), trajectory=traj, method="pwc_expm", n_steps=n * m_sub
    )


def propagate_oracle(
    system: SpinSystem,
    pulse,
    initial: np.ndarray | None = None,
    mode: str = "unitary",
    *,
    noise: NoiseModel | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> EvolutionResult:
    """Adaptive embedded 4(5) Dormand-Prince integration as a cross-check.

    A NetworkParams pulse is evaluated continuously in time (no grid); a
    PulseTable is treated as the piecewise-constant function it is.
    """
    if mode not in ("unitary", "density", "lindblad"):
        raise ValueError(f"unknown mode {mode!r}")
    h0 = drift_hamiltonian(system)
    ops = control_operator_stack(system)
    d = system.dimension

    if isinstance(pulse, NetworkParams):
        duration = pulse.time_scale

        def amps_at(t: float) -> np.ndarray:
            return forward_batch(pulse, np.array([min(max(t, 0.0), duration)]))[0]

    else:
        table = _as_pulse(system, pulse, None)
        duration = table.duration
        flat = table.flat_amplitudes()

        def amps_at(t: float) -> np.ndarray:
            s = min(int(t / table.dt), table.n_segments - 1)
            return flat[s]

    def hamiltonian(t: float) -> np.ndarray:
        return h0 + np.einsum("c,cij->ij", amps_at(t), ops)

    if mode == "unitary":
        y0 = np.eye(d, dtype=complex).reshape(-1)

        def rhs(t, y):
            return (-1j * hamiltonian(t) @ y.reshape(d, d)).reshape(-1)

    elif mode == "density":
        _hermitian_check(initial)
        y0 = initial.reshape(-1).astype(complex)

        def rhs(t, y):
            rho = y.reshape(d, d)
            return (-1j * (hamiltonian(t) @ rho - rho @ hamiltonian(t))).reshape(-1)

    else:
        if noise is None:
            raise ValueError("lindblad mode requires a noise model")
        _hermitian_check(initial)
        y0 = initial.reshape(-1).astype(complex)
        l_noise = liouvillian(np.zeros((d, d)), noise)

        def rhs(t, y):
            rho = y.reshape(d, d)
            comm = -1j * (hamiltonian(t) @ rho - rho @ hamiltonian(t))
            return comm.reshape(-1) + l_noise @ y

    sol = solve_ivp(rhs, (0.0, duration), y0, method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"adaptive integration failed: {sol.message}")
    return EvolutionResult(
        final=sol.y[:, -1].reshape(d, d),
        trajectory=None,
        method="rk_adaptive",
        n_steps=sol.t.size - 1,
    )
