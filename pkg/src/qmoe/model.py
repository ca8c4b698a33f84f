"""QMoE and baseline classifiers: forward pass, loss, Adam, train / evaluate."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import circuits as C
from .errors import ConfigError, NumericError, StructuralError
from .grad import adjoint_gradient, loss_gradient, param_rules
from .kernels import get_backend
from .qsim import StateVector, expectation_z_many, run_circuit, zero_state

log = logging.getLogger(__name__)

ARCHITECTURES = ("qmoe", "baseline")
BENCHMARK_CLASS_COUNTS = (2, 4)
INIT_SCALE = math.pi / 50


@dataclass(frozen=True)
class RunConfig:
    architecture: str = "qmoe"
    op_set: C.OperatorSet = C.OperatorSet.RXRY
    n_data_qubits: int = 8
    n_experts: int = 4
    expert_depth: int = 2
    routing_depth: int = 1
    baseline_depth: int = 4
    n_classes: int = 2
    learning_rate: float = 2e-3
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0

    def __post_init__(self):
        arch = str(self.architecture).lower()
        if arch not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        object.__setattr__(self, "architecture", arch)
        object.__setattr__(self, "op_set", C.OperatorSet.parse(self.op_set))
        for name in ("n_data_qubits", "n_experts", "expert_depth", "routing_depth", "baseline_depth", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0 or self.seed < 0:
            raise ConfigError("epochs and seed must be non-negative")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 2 <= self.n_classes <= self.n_data_qubits:
            raise ConfigError(f"n_classes={self.n_classes} needs 2 <= n_classes <= n_data_qubits={self.n_data_qubits}")
        # validates the routing register fits the qubit cap
        C.RegisterLayout.for_experts(self.n_data_qubits, self.n_experts)
        if self.layout.n_routing_qubits > self.n_data_qubits:
            raise ConfigError("more routing qubits than data qubits")

    @property
    def layout(self) -> C.RegisterLayout:
        return C.RegisterLayout.for_experts(self.n_data_qubits, self.n_experts)

    @property
    def is_benchmark_setting(self) -> bool:
        return self.n_classes in BENCHMARK_CLASS_COUNTS

    @property
    def method_label(self) -> str:
        return "QMoE" if self.architecture == "qmoe" else "Baseline"


@dataclass
class ModelParams:
    theta: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.adam_m = np.asarray(self.adam_m, dtype=np.float64)
        self.adam_v = np.asarray(self.adam_v, dtype=np.float64)
        if not (self.theta.shape == self.adam_m.shape == self.adam_v.shape) or self.theta.ndim != 1:
            raise StructuralError("theta / adam_m / adam_v must be 1-d arrays of equal length")

    @classmethod
    def fresh(cls, theta) -> ModelParams:
        theta = np.asarray(theta, dtype=np.float64)
        return cls(theta.copy(), np.zeros_like(theta), np.zeros_like(theta), 0)


class Model:
    """Compiled circuits for one :class:`RunConfig`.

    The encoding has no trainable parameters, so it is run once per sample
    and the trainable part starts from the encoded state.
    """

    def __init__(self, config: RunConfig, backend: str | None = None):
        self.config = config
        self.backend = backend
        self.layout = config.layout
        self.encoding = C.encoding_template(self.layout)
        if config.architecture == "qmoe":
            self.parts = C.build_qmoe(self.layout, config.op_set, config.n_experts,
                                      config.expert_depth, config.routing_depth)
            self.circuit = self.parts.assemble()
        else:
            self.parts = None
            self.circuit = C.build_baseline(self.layout, config.op_set, config.baseline_depth)
        self.readout = tuple(range(config.n_classes))
        self.rules = param_rules(self.circuit)

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-INIT_SCALE, INIT_SCALE, self.n_params)

    def encode(self, features) -> StateVector:
        return run_circuit(self.encoding, C.encoding_angles(features, self.layout),
                           zero_state(self.layout.total), backend=self.backend)

    def _theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta.theta if isinstance(theta, ModelParams) else theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise StructuralError(f"model takes {self.n_params} params, got shape {theta.shape}")
        return theta

    def logits_from_state(self, theta, encoded: StateVector) -> np.ndarray:
        state = run_circuit(self.circuit, self._theta(theta), encoded.copy(), backend=self.backend)
        return expectation_z_many(state, self.readout, backend=self.backend)

    def logits(self, theta, features) -> np.ndarray:
        return self.logits_from_state(theta, self.encode(features))

    def loss_and_grad(self, theta, features, label: int, method: str = "adjoint",
                      executor: Executor | None = None) -> tuple[float, np.ndarray]:
        theta = self._theta(theta)
        encoded = self.encode(features)
        if method == "adjoint":
            kern = get_backend(self.backend)
            cc = self.circuit.compiled
            final = encoded.amplitudes.copy()
            angles = cc.angles(theta)
            kern.apply_gates(final, cc.kinds, cc.targets, cc.masks, angles)
            logits = kern.expval_z_many(final, np.asarray(self.readout, dtype=np.int64))
            loss, dlogits = softmax_cross_entropy(logits, label)
            grad = kern.adjoint_gradient(final, cc.kinds, cc.targets, cc.masks, angles, cc.param_idx,
                                         np.asarray(self.readout, dtype=np.int64), dlogits, self.n_params)
            return loss, grad
        if method == "shift":
            return loss_gradient(lambda p: self.logits_from_state(p, encoded),
                                 lambda z: softmax_cross_entropy(z, label), theta, self.rules, executor=executor)
        raise ConfigError(f"unknown gradient method {method!r}")

    def adjoint_logit_gradient(self, theta, features, weights) -> np.ndarray:
        """Gradient of ``sum_j weights[j] * logit_j``; thin wrapper for tests."""
        _, g = adjoint_gradient(self.circuit, self._theta(theta), self.encode(features), self.readout, weights,
                                backend=self.backend)
        return g


@lru_cache(maxsize=32)
def _cached_model(config: RunConfig, backend: str | None) -> Model:
    return Model(config, backend)


def get_model(config: RunConfig, backend: str | None = None) -> Model:
    return _cached_model(config, backend)


def forward(config: RunConfig, params, features) -> np.ndarray:
    """Logits (Pauli-Z expectations on the readout qubits) for one sample."""
    return get_model(config).logits(params, features)


def softmax_cross_entropy(logits, label: int) -> tuple[float, np.ndarray]:
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < z.shape[0]:
        raise StructuralError(f"label {label} out of range for {z.shape[0]} classes")
    shifted = z - z.max()
    exp = np.exp(shifted)
    total = exp.sum()
    p = exp / total
    loss = math.log(total) - shifted[label]
    grad = p.copy()
    grad[label] -= 1.0
    return float(loss), grad


def adam_step(params: ModelParams, grad, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> ModelParams:
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.theta.shape:
        raise StructuralError(f"gradient shape {g.shape} != parameter shape {params.theta.shape}")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NumericError(f"non-finite gradient at parameter indices {bad[:10].tolist()} (step {params.step_count})")
    t = params.step_count + 1
    m = beta1 * params.adam_m + (1 - beta1) * g
    v = beta2 * params.adam_v + (1 - beta2) * g * g
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    theta = params.theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return ModelParams(theta, m, v, t)


def predict(model: Model, theta, features: np.ndarray) -> np.ndarray:
    # np.argmax breaks ties toward the lowest index
    return np.array([int(np.argmax(model.logits(theta, x))) for x in features], dtype=np.int64)


def evaluate(config: RunConfig, params, dataset, *, backend: str | None = None) -> float:
    """Fraction of samples whose argmax logit equals the label."""
    if len(dataset) == 0:
        return 0.0
    model = get_model(config, backend)
    preds = predict(model, params, dataset.features)
    return float(np.mean(preds == dataset.labels))


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    seconds: float


@dataclass
class TrainingRecord:
    epochs: list[EpochMetrics] = field(default_factory=list)
    final_train_acc: float = 0.0
    final_test_acc: float = 0.0
    seconds: float = 0.0


def _check_dataset(ds, config: RunConfig, name: str) -> None:
    if len(ds) == 0:
        raise ConfigError(f"{name} dataset is empty")
    if ds.labels.max() >= config.n_classes or ds.labels.min() < 0:
        raise ConfigError(f"{name} labels exceed n_classes={config.n_classes}")


def train(
    config: RunConfig,
    train_set,
    test_set,
    *,
    threads: int = 1,
    grad_method: str = "adjoint",
    backend: str | None = None,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
) -> tuple[ModelParams, TrainingRecord]:
    """Mini-batch Adam on the mean softmax cross-entropy.

    Per-sample gradients may be computed on ``threads`` worker threads; the
    batch mean is always reduced in sample order, so the result is identical
    to a sequential run.
    """
    _check_dataset(train_set, config, "training")
    _check_dataset(test_set, config, "test")
    model = get_model(config, backend)
    rng = np.random.default_rng(config.seed)
    params = ModelParams.fresh(model.init_theta(rng))
    record = TrainingRecord()
    executor = ThreadPoolExecutor(threads) if threads > 1 else None
    t_start = time.perf_counter()

    def sample_grad(i):
        return model.loss_and_grad(params.theta, train_set.features[i], int(train_set.labels[i]), grad_method)

    try:
        for epoch in range(1, config.epochs + 1):
            t0 = time.perf_counter()
            order = rng.permutation(len(train_set))
            losses = []
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                batch = order[start:start + config.batch_size]
                results = list(executor.map(sample_grad, batch)) if executor else [sample_grad(i) for i in batch]
                grad = np.zeros(model.n_params)
                for loss, g in results:
                    if not math.isfinite(loss):
                        raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
                    losses.append(loss)
                    grad += g
                try:
                    params = adam_step(params, grad / len(batch), config.learning_rate)
                except NumericError as exc:
                    raise NumericError(f"epoch {epoch}, batch {b}: {exc}") from exc
            train_acc = evaluate(config, params, train_set, backend=backend)
            test_acc = evaluate(config, params, test_set, backend=backend)
            metrics = EpochMetrics(epoch, float(np.mean(losses)), train_acc, test_acc, time.perf_counter() - t0)
            record.epochs.append(metrics)
            log.info("epoch %d loss %.4f train %.4f test %.4f (%.1fs)", epoch, metrics.train_loss,
                     train_acc, test_acc, metrics.seconds)
            if on_epoch is not None:
                on_epoch(metrics)
    finally:
        if executor is not None:
            executor.shutdown()

    if record.epochs:
        record.final_train_acc = record.epochs[-1].train_acc
        record.final_test_acc = record.epochs[-1].test_acc
    else:
        record.final_train_acc = evaluate(config, params, train_set, backend=backend)
        record.final_test_acc = evaluate(config, params, test_set, backend=backend)
    record.seconds = time.perf_counter() - t_start
    return params, record
