"""Hybrid quantum-classical classifier and its training loop.

A 3-qubit circuit (RY angle embedding plus four rotation/CZ-ring layers)
produces ``z = (<Z0>, <Z1>, <Z2>)``; a linear head and softmax turn ``z`` into
class probabilities. Quantum gradients come from the parameter-shift rule,
evaluated through the same mitigation wrapper as the forward pass.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .batch import Executor
from .circuit import ParamRef, QuantumCircuit, build_moments, concatenate, cz, rot, ry
from .mitigation import MitigationPlan
from .noise import NoiseModel

N_QUBITS = 3
N_LAYERS = 4
N_CLASSES = 3
FEATURE_SLOTS = tuple(f"x{i}" for i in range(N_QUBITS))
WEIGHT_SLOTS = tuple(f"w{l}_{q}_{k}" for l in range(N_LAYERS) for q in range(N_QUBITS) for k in range(3))
N_WEIGHTS = len(WEIGHT_SLOTS)
SHIFT = np.pi / 2
LOSS_FLOOR = 1e-12


@lru_cache(maxsize=None)
def model_template(n_qubits: int = N_QUBITS, n_layers: int = N_LAYERS) -> QuantumCircuit:
    """Unbound model circuit; feature and weight angles are parameter slots.

    Groups: the embedding, then one group per variational layer.
    """
    pieces = [build_moments([ry(q, ParamRef(f"x{q}")) for q in range(n_qubits)], n_qubits)]
    for l in range(n_layers):
        gates = [rot(q, *(ParamRef(f"w{l}_{q}_{k}") for k in range(3))) for q in range(n_qubits)]
        gates += [cz(q, (q + 1) % n_qubits) for q in range(n_qubits)]
        pieces.append(build_moments(gates, n_qubits))
    return concatenate(pieces, as_groups=True)


def model_bindings(features, weights) -> dict[str, np.ndarray]:
    """Per-row slot arrays for ``features`` ``(R, 3)`` and ``weights`` ``(R, 36)`` or ``(36,)``."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != N_QUBITS:
        raise ValueError(f"expected {N_QUBITS} features per sample, got {features.shape[1]}")
    rows = features.shape[0]
    weights = np.asarray(weights, dtype=float).reshape(-1, N_WEIGHTS)
    weights = np.broadcast_to(weights, (rows, N_WEIGHTS))
    out = {s: features[:, i] for i, s in enumerate(FEATURE_SLOTS)}
    out.update({s: weights[:, i] for i, s in enumerate(WEIGHT_SLOTS)})
    return out


def build_model_circuit(features, weights) -> QuantumCircuit:
    """Model circuit with all angles bound to concrete values."""
    features = np.asarray(features, dtype=float).reshape(-1)
    if features.shape != (N_QUBITS,):
        raise ValueError(f"expected {N_QUBITS} features, got {features.shape[0]}")
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape != (N_WEIGHTS,):
        raise ValueError(f"expected {N_WEIGHTS} quantum weights, got {weights.shape[0]}")
    values = dict(zip(FEATURE_SLOTS, features))
    values.update(zip(WEIGHT_SLOTS, weights))
    return model_template().bind(values)


# --------------------------------------------------------------------------- parameters


@dataclass
class ModelParams:
    quantum_weights: np.ndarray  # (layers, qubits, 3)
    head_weights: np.ndarray  # (classes, qubits)
    head_bias: np.ndarray
    compress: np.ndarray | None = None  # optional (3, 4) input pre-layer
    seed: int | None = None

    def __post_init__(self):
        self.quantum_weights = np.asarray(self.quantum_weights, dtype=float).reshape(N_LAYERS, N_QUBITS, 3)
        self.head_weights = np.asarray(self.head_weights, dtype=float).reshape(N_CLASSES, N_QUBITS)
        self.head_bias = np.asarray(self.head_bias, dtype=float).reshape(N_CLASSES)
        if self.compress is not None:
            self.compress = np.asarray(self.compress, dtype=float).reshape(N_QUBITS, -1)
        if not np.all(np.isfinite(self.flat())):
            raise ValueError("model parameters must be finite")

    @property
    def n_quantum(self) -> int:
        return self.quantum_weights.size

    def flat(self) -> np.ndarray:
        parts = [self.quantum_weights.ravel(), self.head_weights.ravel(), self.head_bias]
        if self.compress is not None:
            parts.append(self.compress.ravel())
        return np.concatenate(parts)

    def with_flat(self, vec: np.ndarray) -> ModelParams:
        vec = np.asarray(vec, dtype=float)
        q, h = N_WEIGHTS, N_CLASSES * N_QUBITS
        compress = None
        if self.compress is not None:
            compress = vec[q + h + N_CLASSES :].reshape(self.compress.shape)
        return ModelParams(vec[:q], vec[q : q + h], vec[q + h : q + h + N_CLASSES], compress, self.seed)

    def to_dict(self) -> dict:
        out = {
            "quantum_weights": self.quantum_weights.tolist(),
            "head_weights": self.head_weights.tolist(),
            "head_bias": self.head_bias.tolist(),
            "seed": self.seed,
        }
        if self.compress is not None:
            out["compress"] = self.compress.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> ModelParams:
        return cls(d["quantum_weights"], d["head_weights"], d["head_bias"], d.get("compress"), d.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ModelParams:
        return cls.from_dict(json.loads(text))


def init_params(seed: int | np.random.Generator, compress: bool = False, n_inputs: int = 4) -> ModelParams:
    """Quantum angles uniform on [0, 2pi), head weights uniform on [-0.5, 0.5], zero bias."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    qw = rng.uniform(0.0, 2 * np.pi, size=(N_LAYERS, N_QUBITS, 3))
    hw = rng.uniform(-0.5, 0.5, size=(N_CLASSES, N_QUBITS))
    pre = np.eye(N_QUBITS, n_inputs) if compress else None
    return ModelParams(qw, hw, np.zeros(N_CLASSES), pre, None if isinstance(seed, np.random.Generator) else int(seed))


# --------------------------------------------------------------------------- quantum evaluation


@dataclass
class Evaluator:
    """Executor plus mitigation plan; the "executor-with-mitigation" the model calls.

    ``rng`` feeds PEC sampling. ``rows`` counts logical circuit evaluations,
    i.e. what an unmitigated run would have executed.
    """

    executor: Executor
    plan: MitigationPlan = field(default_factory=MitigationPlan)
    rng: np.random.Generator | None = None
    mitigate_gradients: bool = True
    rows: int = 0
    flags: Counter = field(default_factory=Counter)

    @property
    def eval_count(self) -> int:
        return self.executor.eval_count

    def expectations(self, features, weights, mitigate: bool = True) -> np.ndarray:
        bindings = model_bindings(features, weights)
        n_rows = len(bindings[FEATURE_SLOTS[0]])
        self.rows += n_rows
        plan = self.plan if mitigate else MitigationPlan()
        res = plan.expectation(model_template(), self.executor, bindings, self.rng)
        self.flags.update(res.flags)
        return res.values


def _shift_rows(features: np.ndarray, weights: np.ndarray, wrt_features: bool):
    b = features.shape[0]
    eye_w = np.eye(N_WEIGHTS) * SHIFT
    w_rows = [np.broadcast_to(weights, (b, N_WEIGHTS))]
    f_rows = [features]
    for sign in (1, -1):
        w_rows.append(np.broadcast_to(weights + sign * eye_w, (b, N_WEIGHTS, N_WEIGHTS)).reshape(-1, N_WEIGHTS))
        f_rows.append(np.repeat(features, N_WEIGHTS, axis=0))
    if wrt_features:
        eye_x = np.eye(N_QUBITS) * SHIFT
        for sign in (1, -1):
            f_rows.append((features[:, None, :] + sign * eye_x).reshape(-1, N_QUBITS))
            w_rows.append(np.broadcast_to(weights, (b * N_QUBITS, N_WEIGHTS)))
    return np.concatenate(f_rows), np.concatenate(w_rows)


def forward_and_jacobian(features, weights, evaluator: Evaluator, wrt_features: bool = False):
    """Expectations and parameter-shift derivatives for a batch of samples.

    Returns:
        ``(z, jw, jx)`` with shapes ``(B, 3)``, ``(B, 3, 36)`` and ``(B, 3, 3)``
        (``jx`` is None unless ``wrt_features``).
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    weights = np.asarray(weights, dtype=float).reshape(N_WEIGHTS)
    b = features.shape[0]
    f_rows, w_rows = _shift_rows(features, weights, wrt_features)
    if evaluator.mitigate_gradients:
        vals = evaluator.expectations(f_rows, w_rows)
        z = vals[:b]
        shifted = vals[b:]
    else:
        z = evaluator.expectations(f_rows[:b], w_rows[:b])
        shifted = evaluator.expectations(f_rows[b:], w_rows[b:], mitigate=False)
    nw = b * N_WEIGHTS
    plus = shifted[:nw].reshape(b, N_WEIGHTS, -1)
    minus = shifted[nw : 2 * nw].reshape(b, N_WEIGHTS, -1)
    jw = 0.5 * (plus - minus).transpose(0, 2, 1)
    jx = None
    if wrt_features:
        nx = b * N_QUBITS
        xp = shifted[2 * nw : 2 * nw + nx].reshape(b, N_QUBITS, -1)
        xm = shifted[2 * nw + nx :].reshape(b, N_QUBITS, -1)
        jx = 0.5 * (xp - xm).transpose(0, 2, 1)
    return z, jw, jx


def parameter_shift(circuit: QuantumCircuit, values: dict[str, float], slots, executor: Executor,
                    plan: MitigationPlan | None = None) -> np.ndarray:
    """``d<Z_o>/d slot`` for any circuit whose slots feed Pauli rotations; ``(n_obs, len(slots))``."""
    slots = list(slots)
    base = {k: np.full(2 * len(slots), float(v)) for k, v in values.items()}
    for i, s in enumerate(slots):
        base[s][2 * i] += SHIFT
        base[s][2 * i + 1] -= SHIFT
    plan = plan or MitigationPlan()
    vals = plan.expectation(circuit, executor, base).values
    return 0.5 * (vals[0::2] - vals[1::2]).T


def quantum_jacobian(features, params: ModelParams, evaluator: Evaluator) -> np.ndarray:
    """``d<Z_o>/d theta_k`` by the parameter-shift rule; ``(3, 36)`` per sample."""
    features = np.asarray(features, dtype=float)
    _, jw, _ = forward_and_jacobian(features, params.quantum_weights, evaluator)
    return jw[0] if features.ndim == 1 else jw


# --------------------------------------------------------------------------- head and loss


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def head(z: np.ndarray, params: ModelParams) -> np.ndarray:
    return softmax(z @ params.head_weights.T + params.head_bias)


def reduce_features(features: np.ndarray, params: ModelParams) -> np.ndarray:
    """Apply the trainable 4->3 pre-layer when present."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if params.compress is None:
        return features
    return features @ params.compress.T


def forward(features, params: ModelParams, evaluator: Evaluator) -> np.ndarray:
    """Class probabilities; ``(3,)`` for one sample or ``(B, 3)`` for a batch."""
    single = np.asarray(features).ndim == 1
    x = reduce_features(features, params)
    probs = head(evaluator.expectations(x, params.quantum_weights), params)
    return probs[0] if single else probs


def loss_ce(probs: np.ndarray, label) -> np.ndarray | float:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim == 1:
        return float(-np.log(max(probs[int(label)], LOSS_FLOOR)))
    picked = probs[np.arange(len(probs)), np.asarray(label, dtype=int)]
    return -np.log(np.maximum(picked, LOSS_FLOOR))


def batch_gradient(features, labels, params: ModelParams, evaluator: Evaluator, use_bias: bool = True):
    """Mean loss gradient over a batch.

    Returns:
        ``(grad, probs)`` where ``grad`` is a :class:`ModelParams` holding
        derivatives and ``probs`` the batch's predicted probabilities.
    """
    raw = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    x = reduce_features(raw, params)
    compress = params.compress is not None
    z, jw, jx = forward_and_jacobian(x, params.quantum_weights, evaluator, wrt_features=compress)
    probs = head(z, params)
    d_logits = probs - np.eye(N_CLASSES)[labels]
    b = len(labels)
    g_hw = d_logits.T @ z / b
    g_hb = d_logits.mean(axis=0) if use_bias else np.zeros(N_CLASSES)
    d_z = d_logits @ params.head_weights
    g_qw = np.einsum("bo,bok->k", d_z, jw) / b
    g_pre = None
    if compress:
        d_x = np.einsum("bo,boi->bi", d_z, jx)
        g_pre = d_x.T @ raw / b
    grad = ModelParams(g_qw, g_hw, g_hb, g_pre, params.seed)
    return grad, probs


def backward(features, label, params: ModelParams, evaluator: Evaluator, use_bias: bool = True) -> ModelParams:
    """Gradient of the cross-entropy loss for one sample."""
    grad, _ = batch_gradient(np.atleast_2d(features), [label], params, evaluator, use_bias)
    return grad


# --------------------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> AdamState:
        return cls(np.zeros(size), np.zeros(size))


def adam_step(params: ModelParams, grad: ModelParams, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    g = grad.flat()
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * g
    v = beta2 * state.v + (1 - beta2) * g**2
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new = params.flat() - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params.with_flat(new), AdamState(m, v, t)


def lr_schedule(epoch: int, lr0: float = 0.3, period: int = 5) -> float:
    """Step decay: halve every ``period`` epochs (0-indexed)."""
    return lr0 * 0.5 ** (epoch // period)


# --------------------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    lr0: float = 0.3
    lr_halving_period: int = 5
    batch_size: int = 5
    repetitions: int = 3
    seed: int = 0
    shots: int | None = None
    mitigation: MitigationPlan = field(default_factory=MitigationPlan)
    noise: NoiseModel = field(default_factory=NoiseModel.noiseless)
    mitigate_gradients: bool = True
    use_bias: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive or None")


@dataclass
class Metrics:
    epoch: int
    train_accuracy: float
    val_accuracy: float
    train_loss: float
    val_loss: float
    wall_time_s: float


@dataclass
class TrainResult:
    metrics: list[Metrics]
    params: ModelParams
    eval_count: int
    baseline_eval_count: int
    flags: dict[str, int]
    wall_time_s: float

    @property
    def overhead(self) -> float:
        return self.eval_count / self.baseline_eval_count if self.baseline_eval_count else float("nan")


def _evaluate(x, y, params, evaluator):
    probs = forward(x, params, evaluator)
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    loss = float(np.mean(loss_ce(probs, y)))
    return acc, loss


def make_evaluator(config: TrainConfig, seed: int) -> tuple[Evaluator, np.random.Generator, np.random.Generator]:
    """Evaluator plus the init and shuffle generators, all derived from ``seed``."""
    init_ss, shuffle_ss, shot_ss, mit_ss = np.random.SeedSequence(seed).spawn(4)
    executor = Executor(config.noise, config.shots, np.random.default_rng(shot_ss))
    evaluator = Evaluator(executor, config.mitigation, np.random.default_rng(mit_ss), config.mitigate_gradients)
    return evaluator, np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss)


def train(split, config: TrainConfig, seed: int | None = None, params: ModelParams | None = None,
          callback=None) -> TrainResult:
    """Mini-batch Adam training; deterministic given the seed.

    Args:
        split: object with ``train_x``, ``train_y``, ``val_x``, ``val_y``; 4
            input columns enable the trainable pre-layer.
        config: protocol settings.
        seed: overrides ``config.seed``.
        params: starting point; freshly initialized when omitted.
        callback: called with each epoch's :class:`Metrics`.
    """
    seed = config.seed if seed is None else seed
    evaluator, init_rng, shuffle_rng = make_evaluator(config, seed)
    train_x = np.asarray(split.train_x, dtype=float)
    train_y = np.asarray(split.train_y, dtype=int)
    val_x = np.asarray(split.val_x, dtype=float)
    val_y = np.asarray(split.val_y, dtype=int)
    if params is None:
        compress = train_x.shape[1] != N_QUBITS
        params = replace(init_params(init_rng, compress, train_x.shape[1]), seed=seed)
        if not config.use_bias:
            params.head_bias[:] = 0.0
    state = AdamState.zeros(params.flat().size)
    n = len(train_y)
    metrics = []
    start = time.monotonic()
    for epoch in range(config.epochs):
        t0 = time.monotonic()
        lr = lr_schedule(epoch, config.lr0, config.lr_halving_period)
        order = shuffle_rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            grad, _ = batch_gradient(train_x[idx], train_y[idx], params, evaluator, config.use_bias)
            params, state = adam_step(params, grad, state, lr)
        tr_acc, tr_loss = _evaluate(train_x, train_y, params, evaluator)
        va_acc, va_loss = _evaluate(val_x, val_y, params, evaluator)
        m = Metrics(epoch, tr_acc, va_acc, tr_loss, va_loss, time.monotonic() - t0)
        metrics.append(m)
        if callback is not None:
            callback(m)
    total = time.monotonic() - start
    return TrainResult(metrics, params, evaluator.eval_count, evaluator.rows, dict(evaluator.flags), total)


def metrics_to_dicts(metrics: list[Metrics]) -> list[dict]:
    return [asdict(m) for m in metrics]
