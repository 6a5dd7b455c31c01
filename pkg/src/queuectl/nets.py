"""Minimal feed-forward network engine with exact manual gradients.

Networks are two tanh hidden layers with a linear output head; the policy
adds a softmax on top. Everything is plain numpy and the backward passes
are hand-derived: the log-likelihood gradient of the softmax head for the
policy, the plain chain rule for the scalar critic. Forward passes never
mutate state.

Weighted batch variants (:func:`logprob_grad_sum`, :func:`value_grad_sum`)
compute linear combinations of per-sample gradients in a single matrix
backward pass; they are exactly equal to the corresponding sums of
single-sample gradients and exist only for speed.

Checkpoint byte layout (see :func:`save_checkpoint`): an ASCII header of
``key=value`` lines terminated by one empty line, followed by
``param_count`` little-endian float64 values, laid out layer by layer as
row-major weights then biases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "mlp-checkpoint-v1"


class Direction(Enum):
    ASCENT = 1
    DESCENT = -1


class TrainingDiverged(RuntimeError):
    """Raised when a parameter update would produce non-finite values."""


@dataclass
class MlpParams:
    """Parameter container; ``weights[l]`` has shape (dims[l+1], dims[l])."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class GradBuffer:
    """Gradient arrays congruent in shape with an owning :class:`MlpParams`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_mlp(layer_dims: tuple[int, ...], rng: np.random.Generator) -> MlpParams:
    """Uniform init in +-1/sqrt(fan_in) for each layer's weights and biases."""
    if len(layer_dims) < 2:
        raise ValueError("need at least an input and an output layer")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(tuple(layer_dims), weights, biases)


def _forward_cached(params: MlpParams, obs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Linear output plus the per-layer activations needed for backprop."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (params.layer_dims[0],):
        raise ValueError(
            f"observation shape {obs.shape} does not match input dim {params.layer_dims[0]}"
        )
    acts = [obs]
    a = obs
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(w @ a + b)
        acts.append(a)
    out = params.weights[-1] @ a + params.biases[-1]
    return out, acts


def _backward(params: MlpParams, acts: list[np.ndarray], delta_out: np.ndarray) -> GradBuffer:
    """Backpropagate an output-layer delta through the cached activations."""
    n = len(params.weights)
    grad_w: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    delta = delta_out
    for l in range(n - 1, -1, -1):
        grad_w[l] = np.outer(delta, acts[l])
        grad_b[l] = delta.copy()
        if l > 0:
            delta = (params.weights[l].T @ delta) * (1.0 - acts[l] ** 2)
    return GradBuffer(grad_w, grad_b)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def policy_forward(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    """Action distribution: softmax over the linear outputs."""
    logits, _ = _forward_cached(params, obs)
    return _softmax(logits)


def value_forward(params: MlpParams, obs: np.ndarray) -> float:
    """Scalar state value from the linear output node."""
    out, _ = _forward_cached(params, obs)
    if out.shape != (1,):
        raise ValueError("value network must have a single output node")
    return float(out[0])


def logprob_grad(params: MlpParams, obs: np.ndarray, action: int) -> GradBuffer:
    """Exact gradient of log pi(action | obs) with respect to every parameter."""
    logits, acts = _forward_cached(params, obs)
    probs = _softmax(logits)
    if not 0 <= action < probs.shape[0]:
        raise ValueError(f"action {action} out of range [0, {probs.shape[0]})")
    delta = -probs
    delta[action] += 1.0
    return _backward(params, acts, delta)


def value_grad(params: MlpParams, obs: np.ndarray) -> GradBuffer:
    """Exact gradient of the scalar value output."""
    _, acts = _forward_cached(params, obs)
    return _backward(params, acts, np.ones(1))


# ---------------------------------------------------------------------------
# Batched helpers (exact, for speed)


def _forward_batch(params: MlpParams, obs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != params.layer_dims[0]:
        raise ValueError(
            f"batch shape {obs.shape} does not match input dim {params.layer_dims[0]}"
        )
    acts = [obs]
    a = obs
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(a @ w.T + b)
        acts.append(a)
    out = a @ params.weights[-1].T + params.biases[-1]
    return out, acts


def _backward_batch(params: MlpParams, acts: list[np.ndarray], delta_out: np.ndarray) -> GradBuffer:
    n = len(params.weights)
    grad_w: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    delta = delta_out
    for l in range(n - 1, -1, -1):
        grad_w[l] = delta.T @ acts[l]
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l]) * (1.0 - acts[l] ** 2)
    return GradBuffer(grad_w, grad_b)


def policy_forward_batch(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    """Row-wise action distributions for a (n, input_dim) batch."""
    logits, _ = _forward_batch(params, obs)
    return _softmax(logits)


def value_forward_batch(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    out, _ = _forward_batch(params, obs)
    return out[:, 0]


def logprob_grad_sum(
    params: MlpParams,
    obs: np.ndarray,
    actions: np.ndarray,
    coeffs: np.ndarray,
    entropy_coef: float = 0.0,
) -> GradBuffer:
    """sum_k coeffs[k] * grad log pi(actions[k] | obs[k]) in one backward pass.

    With ``entropy_coef`` nonzero, adds ``entropy_coef * sum_k grad H(pi(.|obs[k]))``.
    """
    logits, acts = _forward_batch(params, obs)
    probs = _softmax(logits)
    n = obs.shape[0]
    delta = -probs * coeffs[:, None]
    delta[np.arange(n), actions] += coeffs
    if entropy_coef != 0.0:
        logp = np.log(probs)
        entropy = -(probs * logp).sum(axis=1, keepdims=True)
        delta += entropy_coef * (-probs * (logp + entropy))
    return _backward_batch(params, acts, delta)


def value_grad_sum(params: MlpParams, obs: np.ndarray, coeffs: np.ndarray) -> GradBuffer:
    """sum_k coeffs[k] * grad V(obs[k]) in one backward pass."""
    _, acts = _forward_batch(params, obs)
    return _backward_batch(params, acts, coeffs[:, None].astype(float))


# ---------------------------------------------------------------------------
# Updates


def grad_norm(grad: GradBuffer) -> float:
    total = 0.0
    for arr in (*grad.weights, *grad.biases):
        flat = arr.ravel()
        total += float(np.dot(flat, flat))
    return math.sqrt(total)


def scale_grad(grad: GradBuffer, factor: float) -> GradBuffer:
    return GradBuffer(
        [w * factor for w in grad.weights],
        [b * factor for b in grad.biases],
    )


def clip_grad_norm(grad: GradBuffer, max_norm: float | None) -> GradBuffer:
    """Rescale so the global L2 norm is at most ``max_norm`` (None disables)."""
    if max_norm is None:
        return grad
    norm = grad_norm(grad)
    if norm <= max_norm or norm == 0.0:
        return grad
    return scale_grad(grad, max_norm / norm)


def sgd_apply(
    params: MlpParams,
    grad: GradBuffer,
    step: float,
    direction: Direction = Direction.ASCENT,
) -> MlpParams:
    """One plain SGD step: params +- step * grad.

    Raises :class:`TrainingDiverged` before committing anything if the
    update would introduce non-finite values.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    s = step * direction.value
    new_w = [w + s * g for w, g in zip(params.weights, grad.weights)]
    new_b = [b + s * g for b, g in zip(params.biases, grad.biases)]
    for arr in (*new_w, *new_b):
        if not np.isfinite(arr).all():
            raise TrainingDiverged("parameter update produced non-finite values")
    return MlpParams(params.layer_dims, new_w, new_b)


# ---------------------------------------------------------------------------
# Checkpoints


def flatten_params(params: MlpParams) -> np.ndarray:
    """Layer-by-layer flattening: row-major weights, then biases."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def unflatten_params(layer_dims: tuple[int, ...], flat: np.ndarray) -> MlpParams:
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(flat[pos : pos + fan_out * fan_in].reshape(fan_out, fan_in).copy())
        pos += fan_out * fan_in
        biases.append(flat[pos : pos + fan_out].copy())
        pos += fan_out
    if pos != flat.size:
        raise ValueError(f"parameter count {flat.size} does not match dims {layer_dims}")
    return MlpParams(tuple(layer_dims), weights, biases)


def save_checkpoint(
    path: str | Path,
    params: MlpParams,
    representation: str,
    seed: int,
    obs_scale: float,
    kind: str = "policy",
) -> None:
    """Write a language-neutral checkpoint.

    Header: ASCII ``key=value`` lines (format, kind, layer_dims,
    representation, seed, obs_scale, param_count) terminated by one empty
    line. Body: param_count little-endian float64 values in
    :func:`flatten_params` order.
    """
    flat = flatten_params(params).astype("<f8")
    header = {
        "format": CHECKPOINT_FORMAT,
        "kind": kind,
        "layer_dims": ",".join(str(d) for d in params.layer_dims),
        "representation": representation,
        "seed": str(seed),
        "obs_scale": repr(float(obs_scale)),
        "param_count": str(flat.size),
    }
    with open(path, "wb") as f:
        for key, value in header.items():
            f.write(f"{key}={value}\n".encode("ascii"))
        f.write(b"\n")
        f.write(flat.tobytes())


def load_checkpoint(path: str | Path) -> tuple[MlpParams, dict[str, str]]:
    """Reload a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "rb") as f:
        header: dict[str, str] = {}
        while True:
            line = f.readline()
            if not line:
                raise ValueError("truncated checkpoint: missing header terminator")
            line = line.rstrip(b"\n")
            if line == b"":
                break
            key, _, value = line.decode("ascii").partition("=")
            header[key] = value
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format: {header.get('format')!r}")
        count = int(header["param_count"])
        flat = np.frombuffer(f.read(count * 8), dtype="<f8")
        if flat.size != count:
            raise ValueError("truncated checkpoint body")
    layer_dims = tuple(int(d) for d in header["layer_dims"].split(","))
    return unflatten_params(layer_dims, flat.astype(float)), header
