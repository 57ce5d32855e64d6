"""Training loop: Adam ascent on fidelity with threshold stopping and checkpoints."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .network import (
    NetworkParams,
    PulseTable,
    apply_update,
    backprop_pulse,
    forward_batch,
    init_params,
    params_from_dict,
    params_to_dict,
    segment_times,
)
from .objectives import ObjectiveSpec, loss_and_gradient
from .propagation import DEFAULT_N_FINE, DEFAULT_SUBSTEP_TOL
from .spins import SpinSystem

DIVERGENCE_WINDOW = 100


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    f_threshold: float = 0.99
    max_iters: int = 20000
    seed: int = 0
    n_fine: int = DEFAULT_N_FINE
    log_every: int = 1
    substep_tol: float = DEFAULT_SUBSTEP_TOL
    lr_decay: str = "constant"  # "constant" | "cosine"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.f_threshold <= 1:
            raise ValueError("f_threshold must be in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.lr_decay not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_decay {self.lr_decay!r}")

    def lr_at(self, k: int) -> float:
        """Learning rate for the k-th update of a run (k = 0 for the first).

        Cosine decay anneals from learning_rate to 0 over max_iters; constant
        keeps the late-stage steps large, which can destabilize near-converged
        runs.
        """
        if self.lr_decay == "cosine":
            frac = min(max(k, 0) / max(1, self.max_iters), 1.0)
            return self.learning_rate * 0.5 * (1.0 + float(np.cos(np.pi * frac)))
        return self.learning_rate


class AdamState:
    """First/second moment accumulators over a list of arrays."""

    def __init__(self, shapes_like: list[np.ndarray]):
        self.step = 0
        self.m = [np.zeros_like(a, dtype=float) for a in shapes_like]
        self.v = [np.zeros_like(a, dtype=float) for a in shapes_like]

    def update(self, grads: list[np.ndarray], lr: float, b1: float, b2: float, eps: float):
        """Return the parameter increments for one descent step on `grads`."""
        self.step += 1
        t = self.step
        out = []
        for i, g in enumerate(grads):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**t)
            v_hat = self.v[i] / (1 - b2**t)
            out.append(-lr * m_hat / (np.sqrt(v_hat) + eps))
        return out

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "m": [a.flatten().tolist() for a in self.m],
            "v": [a.flatten().tolist() for a in self.v],
        }

    @classmethod
    def from_dict(cls, doc: dict, shapes_like: list[np.ndarray]) -> "AdamState":
        state = cls(shapes_like)
        state.step = int(doc["step"])
        state.m = [
            np.asarray(flat, dtype=float).reshape(ref.shape)
            for flat, ref in zip(doc["m"], shapes_like)
        ]
        state.v = [
            np.asarray(flat, dtype=float).reshape(ref.shape)
            for flat, ref in zip(doc["v"], shapes_like)
        ]
        return state


@dataclass
class RunRecord:
    """Optimization trajectory plus everything needed to resume it."""

    iterations: list[tuple[int, float, float]]  # (iter, fidelity, grad 2-norm)
    final_params: NetworkParams
    converged: bool
    config: OptimizerConfig
    adam_state: dict | None = None
    wall_time_s: float = 0.0
    context: dict = field(default_factory=dict)

    @property
    def final_fidelity(self) -> float:
        return self.iterations[-1][1]

    @property
    def n_iters(self) -> int:
        return self.iterations[-1][0]


def _grad_norm(grad_w, grad_b) -> float:
    total = sum(float(np.sum(g * g)) for g in grad_w) + sum(
        float(np.sum(g * g)) for g in grad_b
    )
    return float(np.sqrt(total))


def train(
    params0: NetworkParams,
    system: SpinSystem,
    objective: ObjectiveSpec,
    config: OptimizerConfig,
    *,
    adam_state: AdamState | None = None,
    start_iter: int = 0,
) -> RunRecord:
    """Ascend fidelity with Adam until f_threshold or max_iters."""
    t0 = time.monotonic()
    params = params0
    arrays = list(params.weights) + list(params.biases)
    state = adam_state if adam_state is not None else AdamState(arrays)
    nw = len(params.weights)

    rows: list[tuple[int, float, float]] = []
    fid, (gw, gb) = loss_and_gradient(
        params, system, objective, config.n_fine, substep_tol=config.substep_tol
    )
    initial_fid = fid
    rows.append((start_iter, fid, _grad_norm(gw, gb)))
    below_count = 0
    converged = fid >= config.f_threshold
    it = start_iter
    while not converged and it < start_iter + config.max_iters:
        it += 1
        grads = [-g for g in gw] + [-g for g in gb]  # descend on 1 - F
        deltas = state.update(
            grads,
            config.lr_at(it - start_iter - 1),
            config.adam_beta1,
            config.adam_beta2,
            config.adam_eps,
        )
        params = apply_update(params, deltas[:nw], deltas[nw:])
        fid, (gw, gb) = loss_and_gradient(
            params, system, objective, config.n_fine, substep_tol=config.substep_tol
        )
        if not np.isfinite(fid):
            raise FloatingPointError(f"non-finite fidelity at iteration {it}")
        if it % config.log_every == 0 or fid >= config.f_threshold:
            rows.append((it, fid, _grad_norm(gw, gb)))
        if fid < initial_fid - 0.5:
            below_count += 1
            if below_count >= DIVERGENCE_WINDOW:
                raise DivergenceError(
                    f"fidelity stuck below initial-0.5 for {DIVERGENCE_WINDOW} iterations "
                    f"(iteration {it}, fidelity {fid:.6f})"
                )
        else:
            below_count = 0
        converged = fid >= config.f_threshold
    if rows[-1][0] != it:
        rows.append((it, fid, _grad_norm(gw, gb)))
    return RunRecord(
        iterations=rows,
        final_params=params,
        converged=converged,
        config=config,
        adam_state=state.to_dict(),
        wall_time_s=time.monotonic() - t0,
    )


def resume(
    record: RunRecord,
    system: SpinSystem,
    objective: ObjectiveSpec,
    extra_iters: int,
) -> RunRecord:
    """Continue a run as if it had never stopped (same Adam moments and step count)."""
    if record.adam_state is None:
        raise ValueError("record is missing the Adam moment state; cannot resume")
    if extra_iters == 0 or record.converged:
        return record
    params = record.final_params
    arrays = list(params.weights) + list(params.biases)
    state = AdamState.from_dict(record.adam_state, arrays)
    cfg = replace(record.config, max_iters=extra_iters)
    cont = train(
        params, system, objective, cfg, adam_state=state, start_iter=record.n_iters
    )
    merged = record.iterations + [r for r in cont.iterations if r[0] > record.n_iters]
    return RunRecord(
        iterations=merged,
        final_params=cont.final_params,
        converged=cont.converged,
        config=record.config,
        adam_state=cont.adam_state,
        wall_time_s=record.wall_time_s + cont.wall_time_s,
        context=record.context,
    )


def fit_network_to_table(
    params0: NetworkParams,
    table: PulseTable,
    *,
    n_samples: int = 256,
    learning_rate: float = 1e-2,
    n_iters: int = 12000,
) -> NetworkParams:
    """Least-squares fit of the network to a piecewise-constant pulse.

    Minimizes the mean squared amplitude error against the table held as a
    staircase, sampled on a dense midpoint grid.  This is a supervised warm
    start: the physics never enters, so it is cheap, and the fitted network
    starts inside the basin of the table's transfer route.
    """
    if abs(params0.time_scale - table.duration) > 1e-12 * table.duration:
        raise ValueError("network time_scale and table duration differ")
    if params0.n_channels != table.n_channels:
        raise ValueError("network and table channel counts differ")
    t = segment_times(table.duration, n_samples)
    seg = np.minimum(
        (t / table.duration * table.n_segments).astype(int), table.n_segments - 1
    )
    target = table.flat_amplitudes()[seg]
    if np.any(np.abs(target) >= params0.amp_scale):
        raise ValueError("table amplitudes exceed the network amp_scale bound")
    params = params0
    nw = len(params.weights)
    state = AdamState(list(params.weights) + list(params.biases))
    for _ in range(n_iters):
        err = forward_batch(params, t) - target
        gw, gb = backprop_pulse(params, t, (2.0 / err.size) * err)
        deltas = state.update(
            list(gw) + list(gb), learning_rate, 0.9, 0.999, 1e-8
        )
        params = apply_update(params, deltas[:nw], deltas[nw:])
    return params


def multi_start(
    system: SpinSystem,
    objective: ObjectiveSpec,
    layer_sizes,
    amp_scale: float,
    time_scale: float,
    config: OptimizerConfig,
    n_starts: int = 1,
    *,
    early_stop: bool = False,
    input_gain: float = 1.0,
) -> RunRecord:
    """Train from seeds seed..seed+n-1; best final fidelity wins, ties by lower seed.

    With early_stop the remaining starts are skipped once one run reaches the
    fidelity threshold.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    best: RunRecord | None = None
    for k in range(n_starts):
        seed = config.seed + k
        params0 = init_params(layer_sizes, amp_scale, time_scale, seed, input_gain=input_gain)
        record = train(params0, system, objective, replace(config, seed=seed))
        record.context["seed"] = seed
        if best is None or record.final_fidelity > best.final_fidelity:
            best = record
        if early_stop and record.converged:
            break
    return best


def run_record_to_dict(record: RunRecord) -> dict:
    return {
        "iterations": [[int(i), f, g] for i, f, g in record.iterations],
        "final_params": params_to_dict(record.final_params),
        "converged": record.converged,
        "config": asdict(record.config),
        "adam_state": record.adam_state,
        "context": record.context,
        "metadata": {"wall_time_s": record.wall_time_s},
    }


def run_record_from_dict(doc: dict) -> RunRecord:
    return RunRecord(
        iterations=[(int(i), float(f), float(g)) for i, f, g in doc["iterations"]],
        final_params=params_from_dict(doc["final_params"]),
        converged=bool(doc["converged"]),
        config=OptimizerConfig(**doc["config"]),
        adam_state=doc.get("adam_state"),
        wall_time_s=float(doc.get("metadata", {}).get("wall_time_s", 0.0)),
        context=dict(doc.get("context", {})),
    )


def save_run_record(record: RunRecord, path) -> None:
    with open(path, "w") as fh:
        json.dump(run_record_to_dict(record), fh)


def load_run_record(path) -> RunRecord:
    with open(path) as fh:
        return run_record_from_dict(json.load(fh))
