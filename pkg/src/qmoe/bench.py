"""Throughput benchmark: numba vs numpy kernels, sequential vs threaded."""
from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .grad import expectation_gradient, shift_evaluation_count
from .kernels import available_backends
from .model import Model, RunConfig


@dataclass
class BenchRow:
    backend: str
    mode: str
    threads: int
    circuit_evals: int
    circuit_evals_per_s: float
    adjoint_grads: int
    adjoint_grads_per_s: float
    shift_grads: int
    shift_circuit_runs: int
    shift_grads_per_s: float


class _Counter:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, p):
        with self._lock:
            self.calls += 1
        return self.fn(p)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, max(time.perf_counter() - t0, 1e-9)


def run_benchmark(config: RunConfig, *, n_samples: int = 32, threads: int = 4,
                  backends: list[str] | None = None, seed: int = 0, shift_grads: int = 1) -> list[BenchRow]:
    rng = np.random.default_rng(seed)
    features = rng.uniform(0, 1, size=(n_samples, 64))
    labels = rng.integers(0, config.n_classes, size=n_samples)
    rows = []
    for backend in backends or available_backends():
        model = Model(config, backend)
        theta = rng.uniform(-np.pi, np.pi, model.n_params)
        # warm-up (jit compilation for numba)
        model.loss_and_grad(theta, features[0], int(labels[0]))
        for mode, n_threads in (("sequential", 1), ("parallel", threads)):
            pool = ThreadPoolExecutor(n_threads) if n_threads > 1 else None

            def run_map(fn, items):
                return list(pool.map(fn, items)) if pool else [fn(i) for i in items]

            _, t_fwd = _timed(lambda: run_map(lambda i: model.logits(theta, features[i]), range(n_samples)))
            _, t_adj = _timed(lambda: run_map(
                lambda i: model.loss_and_grad(theta, features[i], int(labels[i])), range(n_samples)))

            counters = []

            def shift_one(i):
                encoded = model.encode(features[i])
                counter = _Counter(lambda p: model.logits_from_state(p, encoded))
                counters.append(counter)
                return expectation_gradient(counter, theta, model.rules, executor=pool)

            _, t_shift = _timed(lambda: [shift_one(i) for i in range(shift_grads)])
            runs = counters[0].calls if counters else 0
            rows.append(BenchRow(backend, mode, n_threads, n_samples, n_samples / t_fwd,
                                 n_samples, n_samples / t_adj, shift_grads, runs, shift_grads / t_shift))
            if pool:
                pool.shutdown()
    return rows


def expected_shift_runs(config: RunConfig) -> int:
    return shift_evaluation_count(Model(config).rules)


def format_table(rows: list[BenchRow]) -> str:
    head = f"{'backend':8} {'mode':10} {'thr':>3} {'evals/s':>10} {'adj grads/s':>12} {'shift grads/s':>14} {'runs/shift grad':>16}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.backend:8} {r.mode:10} {r.threads:>3} {r.circuit_evals_per_s:>10.1f} "
                     f"{r.adjoint_grads_per_s:>12.1f} {r.shift_grads_per_s:>14.3f} {r.shift_circuit_runs:>16}")
    return "\n".join(lines)


def rows_as_dicts(rows: list[BenchRow]) -> list[dict]:
    return [asdict(r) for r in rows]
