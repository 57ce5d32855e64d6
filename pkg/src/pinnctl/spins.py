"""Spin-1/2 operators, drift/control Hamiltonians, and noise models.

All Hamiltonians are in angular frequency (rad/s); configuration values are
in Hz and the 2*pi conversion happens here, once, during drift construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAX_SPINS = 4

_PAULI_HALF = {
    "x": np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex),
    "y": np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex),
    "z": np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex),
}


@dataclass(frozen=True)
class SpinSystem:
    """A small register of spin-1/2 nuclei with grouped x/y controls.

    channels: groups of spin indices sharing one (x, y) amplitude pair.
    couplings: (i, j, J_hz) scalar couplings entering the drift as
        2*pi*J * Iiz*Ijz.
    offsets_hz: signed per-spin offset, entering as 2*pi*offset * Ikz.
    """

    n_spins: int
    channels: tuple[tuple[int, ...], ...]
    couplings: tuple[tuple[int, int, float], ...] = ()
    offsets_hz: tuple[float, ...] = ()

    def __post_init__(self):
        if not 1 <= self.n_spins <= MAX_SPINS:
            raise ValueError(f"n_spins must be in [1, {MAX_SPINS}], got {self.n_spins}")
        seen: set[int] = set()
        for group in self.channels:
            for s in group:
                if not 0 <= s < self.n_spins:
                    raise ValueError(f"channel spin index {s} out of range")
                if s in seen:
                    raise ValueError(f"spin {s} appears in more than one channel group")
                seen.add(s)
        for i, j, _ in self.couplings:
            if i == j:
                raise ValueError("coupling requires distinct spins")
            if not (0 <= i < self.n_spins and 0 <= j < self.n_spins):
                raise ValueError("coupling spin index out of range")
        if self.offsets_hz and len(self.offsets_hz) != self.n_spins:
            raise ValueError("offsets_hz length must equal n_spins")

    @property
    def dimension(self) -> int:
        return 2**self.n_spins

    @property
    def n_channels(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class NoiseModel:
    """Uniform-coefficient collapse model with strength gamma * drift_norm."""

    gamma: float
    kind: str  # "local" | "global"
    collapse_ops: tuple[np.ndarray, ...]
    drift_norm: float  # rad/s, spectral norm of the drift Hamiltonian

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.kind not in ("local", "global"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.gamma > 0 and not self.drift_norm > 0:
            raise ValueError("drift_norm must be positive when gamma > 0")

    @property
    def rate(self) -> float:
        """Collapse-term coefficient gamma * ||H0|| in rad/s."""
        return self.gamma * self.drift_norm


def spin_half_operator(n_spins: int, target: int, axis: str) -> np.ndarray:
    """Embed a single-spin I_x/y/z (eigenvalues +-1/2) into an n-spin register."""
    if not 1 <= n_spins <= MAX_SPINS:
        raise ValueError(f"n_spins must be in [1, {MAX_SPINS}], got {n_spins}")
    if not 0 <= target < n_spins:
        raise ValueError(f"target {target} out of range for {n_spins} spins")
    if axis not in _PAULI_HALF:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    op = np.array([[1.0]], dtype=complex)
    for k in range(n_spins):
        factor = _PAULI_HALF[axis] if k == target else np.eye(2, dtype=complex)
        op = np.kron(op, factor)
    return op


def drift_hamiltonian(system: SpinSystem) -> np.ndarray:
    """Internal Hamiltonian in rad/s: couplings 2*pi*J IizIjz plus offsets 2*pi*d Ikz."""
    dim = system.dimension
    h0 = np.zeros((dim, dim), dtype=complex)
    for i, j, j_hz in system.couplings:
        iz = spin_half_operator(system.n_spins, i, "z")
        jz = spin_half_operator(system.n_spins, j, "z")
        h0 += 2.0 * np.pi * j_hz * (iz @ jz)
    for k, off_hz in enumerate(system.offsets_hz):
        if off_hz != 0.0:
            h0 += 2.0 * np.pi * off_hz * spin_half_operator(system.n_spins, k, "z")
    return h0


def control_operators(system: SpinSystem) -> list[tuple[np.ndarray, np.ndarray]]:
    """One Hermitian (X_k, Y_k) pair per channel group; grouped spins are summed."""
    pairs = []
    for group in system.channels:
        x = sum(spin_half_operator(system.n_spins, s, "x") for s in group)
        y = sum(spin_half_operator(system.n_spins, s, "y") for s in group)
        pairs.append((x, y))
    return pairs


def control_operator_stack(system: SpinSystem) -> np.ndarray:
    """Control operators stacked as (2M, dim, dim) in (x1, y1, x2, y2, ...) order."""
    ops = []
    for x, y in control_operators(system):
        ops.append(x)
        ops.append(y)
    return np.stack(ops)


def drift_norm(system: SpinSystem) -> float:
    """Spectral norm (largest |eigenvalue|) of the drift Hamiltonian, rad/s."""
    evals = np.linalg.eigvalsh(drift_hamiltonian(system))
    return float(np.max(np.abs(evals)))


def noise_operators(system: SpinSystem, kind: str, gamma: float) -> NoiseModel:
    """Collapse-operator set for a two-spin register.

    local: I1x, I1y, I2x, I2y.  global: I1x+I2x, I1y+I2y.
    """
    if system.n_spins != 2:
        raise ValueError("noise operator sets are defined for 2-spin systems only")
    sx = [spin_half_operator(2, k, "x") for k in range(2)]
    sy = [spin_half_operator(2, k, "y") for k in range(2)]
    if kind == "local":
        ops = (sx[0], sy[0], sx[1], sy[1])
    elif kind == "global":
        ops = (sx[0] + sx[1], sy[0] + sy[1])
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return NoiseModel(gamma=gamma, kind=kind, collapse_ops=ops, drift_norm=drift_norm(system))


# Built-in presets.
# defm: heteronuclear pair, J = 48.2 Hz, independent controls per spin.
# tcp:  homonuclear pair, J = 8.75 Hz, shift difference 127.5 Hz expressed as
#       per-spin offsets -Delta/2, +Delta/2, one collective control channel.
TCP_DELTA_HZ = 127.5

PRESETS: dict[str, SpinSystem] = {
    "defm": SpinSystem(
        n_spins=2,
        channels=((0,), (1,)),
        couplings=((0, 1, 48.2),),
        offsets_hz=(0.0, 0.0),
    ),
    "tcp": SpinSystem(
        n_spins=2,
        channels=((0, 1),),
        couplings=((0, 1, 8.75),),
        offsets_hz=(-TCP_DELTA_HZ / 2.0, +TCP_DELTA_HZ / 2.0),
    ),
}


def system_from_dict(cfg: dict) -> SpinSystem:
    """Build a SpinSystem from the JSON configuration schema.

    {"spins": n, "channels": [[0],[1]],
     "couplings": [{"i":0,"j":1,"J_hz":48.2}], "offsets_hz": [0,0]}
    """
    try:
        n = int(cfg["spins"])
        channels = tuple(tuple(int(s) for s in g) for g in cfg["channels"])
        couplings = tuple(
            (int(c["i"]), int(c["j"]), float(c["J_hz"])) for c in cfg.get("couplings", [])
        )
        offsets = tuple(float(o) for o in cfg.get("offsets_hz", [0.0] * n))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"invalid system configuration: {exc}") from exc
    return SpinSystem(n_spins=n, channels=channels, couplings=couplings, offsets_hz=offsets)


def load_system(spec) -> SpinSystem:
    """Resolve a preset name, config dict, or JSON file path to a SpinSystem."""
    if isinstance(spec, SpinSystem):
        return spec
    if isinstance(spec, dict):
        return system_from_dict(spec)
    if isinstance(spec, str):
        if spec in PRESETS:
            return PRESETS[spec]
        with open(spec) as fh:
            return system_from_dict(json.load(fh))
    raise TypeError(f"cannot interpret {spec!r} as a spin system")
