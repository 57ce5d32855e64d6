"""Feed-forward ansatz mapping time to control amplitudes.

The network takes the normalized time t/T as its single input, applies tanh
in every hidden layer, and emits amp_scale * tanh(.) at the output so every
amplitude stays inside [-amp_scale, +amp_scale].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class NetworkParams:
    """Weights and biases of the ansatz; the entire encoded pulse."""

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # weights[l] has shape (n_l, n_{l+1})
    biases: tuple[np.ndarray, ...]  # biases[l] has shape (n_{l+1},)
    amp_scale: float  # rad/s
    time_scale: float  # seconds (= total pulse duration T)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if sizes[0] != 1:
            raise ValueError("first layer must have a single (time) input")
        if sizes[-1] % 2 != 0:
            raise ValueError("last layer must be even (x/y pair per channel)")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("weight/bias count inconsistent with layer sizes")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l], sizes[l + 1]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l} shape mismatch: {w.shape}, {b.shape}")
        if not self.amp_scale > 0:
            raise ValueError("amp_scale must be positive")
        if not self.time_scale > 0:
            raise ValueError("time_scale must be positive")

    @property
    def n_channels(self) -> int:
        return self.layer_sizes[-1] // 2

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class PulseTable:
    """A concrete sampling of a control profile: n_segments x channels x (x, y)."""

    duration: float
    samples: np.ndarray  # (n_segments, channels, 2), rad/s
    sampling_rule: str = "midpoint"

    def __post_init__(self):
        if self.samples.ndim != 3 or self.samples.shape[2] != 2:
            raise ValueError("samples must have shape (n_segments, channels, 2)")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.sampling_rule not in ("midpoint", "left_edge"):
            raise ValueError(f"unknown sampling rule {self.sampling_rule!r}")

    @property
    def n_segments(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def dt(self) -> float:
        return self.duration / self.n_segments

    def flat_amplitudes(self) -> np.ndarray:
        """Samples reshaped to (n_segments, 2*channels) in (x1, y1, x2, y2) order."""
        return self.samples.reshape(self.n_segments, -1)

    def scaled(self, factor: float) -> "PulseTable":
        return PulseTable(self.duration, self.samples * factor, self.sampling_rule)


def init_params(
    layer_sizes,
    amp_scale: float,
    time_scale: float,
    seed: int,
    metadata: dict | None = None,
    input_gain: float = 1.0,
) -> NetworkParams:
    """Deterministic init: weights ~ N(0, 1/fan_in) per layer, biases zero.

    input_gain > 1 scales the first-layer weights and spreads the first-layer
    biases uniformly over +-input_gain/2, distributing the tanh feature kinks
    across the time window so the network can express sub-window structure
    from the start (drawn from a separate stream so the base draw is
    unchanged).
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if input_gain <= 0:
        raise ValueError("input_gain must be positive")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    if input_gain != 1.0:
        gain_rng = np.random.default_rng(seed + 999)
        weights[0] = weights[0] * input_gain
        biases[0] = gain_rng.uniform(-input_gain, input_gain, size=sizes[1]) * 0.5
    meta = dict(metadata or {})
    meta.setdefault("seed", seed)
    if input_gain != 1.0:
        meta.setdefault("input_gain", float(input_gain))
    return NetworkParams(
        layer_sizes=sizes,
        weights=tuple(weights),
        biases=tuple(biases),
        amp_scale=float(amp_scale),
        time_scale=float(time_scale),
        metadata=meta,
    )


def _check_times(params: NetworkParams, t: np.ndarray):
    if np.any(t < -1e-12) or np.any(t > params.time_scale * (1 + 1e-12)):
        raise ValueError("time outside the control window [0, T]")


def forward_batch(params: NetworkParams, t: np.ndarray) -> np.ndarray:
    """Evaluate the control amplitudes at times t (shape (N,)) -> (N, 2M) rad/s."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _check_times(params, t)
    a = (t / params.time_scale)[:, None]
    n_layers = len(params.weights)
    for l in range(n_layers - 1):
        a = np.tanh(a @ params.weights[l] + params.biases[l])
    z = a @ params.weights[-1] + params.biases[-1]
    return params.amp_scale * np.tanh(z)


def forward(params: NetworkParams, t: float) -> np.ndarray:
    """Amplitude vector (2M,) at a single time, rad/s."""
    return forward_batch(params, np.array([t]))[0]


def forward_with_tape(params: NetworkParams, t) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass that also records per-layer activations for backprop.

    The tape holds the input column and every post-activation layer output
    (tanh outputs for hidden layers, scaled tanh for the output layer), which
    is sufficient for an exact reverse pass since d tanh = 1 - tanh^2.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _check_times(params, t)
    a = (t / params.time_scale)[:, None]
    tape = [a]
    n_layers = len(params.weights)
    for l in range(n_layers - 1):
        a = np.tanh(a @ params.weights[l] + params.biases[l])
        tape.append(a)
    out_act = np.tanh(a @ params.weights[-1] + params.biases[-1])
    tape.append(out_act)
    return params.amp_scale * out_act, tape


def backprop_pulse(
    params: NetworkParams, t, upstream: np.ndarray, tape: list[np.ndarray] | None = None
) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
    """Exact gradient of sum_n upstream[n] . u(t_n) w.r.t. every weight and bias.

    upstream has shape (N, 2M) matching the times t; returns (grad_w, grad_b)
    with the same shapes as params.weights / params.biases.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != (t.size, params.layer_sizes[-1]):
        raise ValueError(
            f"upstream shape {upstream.shape} does not match "
            f"({t.size}, {params.layer_sizes[-1]})"
        )
    if tape is None:
        _, tape = forward_with_tape(params, t)
    n_layers = len(params.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    # output layer: u = amp_scale * tanh(z); tape[-1] is tanh(z)
    delta = upstream * params.amp_scale * (1.0 - tape[-1] ** 2)
    for l in range(n_layers - 1, -1, -1):
        a_prev = tape[l]
        grad_w[l] = a_prev.T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l].T) * (1.0 - a_prev**2)
    return tuple(grad_w), tuple(grad_b)


def segment_times(duration: float, n_segments: int, rule: str = "midpoint") -> np.ndarray:
    dt = duration / n_segments
    if rule == "midpoint":
        return (np.arange(n_segments) + 0.5) * dt
    if rule == "left_edge":
        return np.arange(n_segments) * dt
    raise ValueError(f"unknown sampling rule {rule!r}")


def sample_pulse(params: NetworkParams, n_segments: int, rule: str = "midpoint") -> PulseTable:
    """Discretize the network onto n_segments piecewise-constant segments."""
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    t = segment_times(params.time_scale, n_segments, rule)
    u = forward_batch(params, t)
    samples = u.reshape(n_segments, params.n_channels, 2)
    return PulseTable(duration=params.time_scale, samples=samples, sampling_rule=rule)


def params_to_dict(params: NetworkParams) -> dict:
    return {
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.flatten().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "amp_scale": params.amp_scale,
        "time_scale": params.time_scale,
        "metadata": params.metadata,
    }


def params_from_dict(doc: dict) -> NetworkParams:
    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        weights = tuple(
            np.asarray(doc["weights"][l], dtype=float).reshape(sizes[l], sizes[l + 1])
            for l in range(len(sizes) - 1)
        )
        biases = tuple(np.asarray(b, dtype=float) for b in doc["biases"])
        return NetworkParams(
            layer_sizes=sizes,
            weights=weights,
            biases=biases,
            amp_scale=float(doc["amp_scale"]),
            time_scale=float(doc["time_scale"]),
            metadata=dict(doc.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ValueError(f"malformed parameter document: {exc}") from exc


def save_params(params: NetworkParams, path) -> None:
    """Write parameters as JSON; floats use shortest round-trip decimals."""
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh)


def load_params(path, expected_channels: int | None = None) -> NetworkParams:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"cannot parse parameter file {path}: {exc}") from exc
    params = params_from_dict(doc)
    if expected_channels is not None and params.n_channels != expected_channels:
        raise ValueError(
            f"network output width {params.layer_sizes[-1]} does not match "
            f"2 x {expected_channels} system channels"
        )
    return params


def flatten_grads(grad_w, grad_b) -> np.ndarray:
    return np.concatenate([g.ravel() for g in grad_w] + [g.ravel() for g in grad_b])


def apply_update(params: NetworkParams, delta_w, delta_b) -> NetworkParams:
    """Return a copy with weights+delta_w, biases+delta_b."""
    return replace(
        params,
        weights=tuple(w + dw for w, dw in zip(params.weights, delta_w)),
        biases=tuple(b + db for b, db in zip(params.biases, delta_b)),
    )
