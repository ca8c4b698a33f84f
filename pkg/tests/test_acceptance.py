"""Acceptance criteria, one test each. The terminal summary prints a PASS/FAIL line per criterion."""
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from helpers import random_circuit
from qmoe.cli import main, run_gradcheck
from qmoe.config import load_experiment
from qmoe.data import load_benchmark, parse_idx, synthetic_blobs
from qmoe.errors import ParseError
from qmoe.model import Model, RunConfig, forward, softmax_cross_entropy, train
from qmoe.qsim import StateVector, compose, run_circuit, zero_state

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
SEEDS = (0, 1, 2)

pytestmark = pytest.mark.acceptance


def test_criterion_1_gradient_oracle(record_property):
    spec = load_experiment(CONFIGS / "gradcheck_qmoe.ini")
    run = spec.run
    assert (run.n_data_qubits, run.layout.n_routing_qubits, run.n_experts, run.expert_depth) == (8, 2, 4, 1)
    assert run.op_set.label == "RX + RY"
    start = time.perf_counter()
    res = run_gradcheck(Model(run), draws=5, seed=0)
    elapsed = time.perf_counter() - start
    record_property("detail", f"max |shift - FD| {res['fd_deviation']:.2e}, {elapsed:.1f}s")
    assert res["fd_deviation"] <= 1e-5
    assert elapsed <= 60


def test_criterion_2_basis_routing(record_property):
    model = Model(RunConfig(expert_depth=1))
    layout, parts = model.config.layout, model.parts
    stage = compose(*parts.controlled)
    rng = np.random.default_rng(0)
    worst = 0.0
    for k in range(model.config.n_experts):
        theta = rng.uniform(-np.pi, np.pi, model.n_params)
        data = model.encode(rng.uniform(0, 1, 64)).amplitudes
        # data register from an encoded image, routing register in |k>
        probe = _with_routing(data, layout, k)
        got = run_circuit(stage, theta[:stage.n_params], probe.copy()).amplitudes
        want = run_circuit(parts.experts[k], theta[:parts.experts[k].n_params], probe.copy()).amplitudes
        worst = max(worst, float(np.abs(got - want).max()))
    record_property("detail", f"max abs diff {worst:.1e}")
    assert worst <= 1e-12


def _with_routing(amplitudes, layout, k):
    """Data marginal of ``amplitudes`` tensored with routing basis state |k>."""
    a = amplitudes.reshape(1 << layout.n_routing_qubits, 1 << layout.n_data_qubits)
    data = np.linalg.norm(a, axis=0)
    data = data * np.exp(1j * np.angle(a.sum(axis=0)))
    out = np.zeros_like(a)
    out[k] = data / np.linalg.norm(data)
    return StateVector(out.reshape(-1))


def test_criterion_3_normalization(record_property):
    rng = np.random.default_rng(2024)
    failures = 0
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        c = random_circuit(rng, n, int(rng.integers(1, 60)), max_controls=3)
        theta = rng.uniform(-4 * np.pi, 4 * np.pi, c.n_params)
        dev = abs(run_circuit(c, theta, zero_state(n)).norm() - 1)
        worst = max(worst, dev)
        failures += dev > 1e-10
    record_property("detail", f"{failures} failures, worst {worst:.1e}")
    assert failures == 0


def _median_test_acc(run: RunConfig, train_set, test_set) -> tuple[float, list[float]]:
    accs = [train(replace(run, seed=s), train_set, test_set)[1].final_test_acc for s in SEEDS]
    return float(np.median(accs)), accs


@pytest.mark.slow
def test_criterion_4_mnist2_trend(record_property):
    qmoe_spec = load_experiment(CONFIGS / "mnist2_qmoe.ini")
    base_spec = load_experiment(CONFIGS / "mnist2_baseline.ini")
    data = qmoe_spec.data
    if not (Path(data.data_dir) / "mnist").is_dir():
        pytest.fail(f"MNIST corpus not found under {data.data_dir}")
    assert (data.benchmark, data.limit_per_class) == ("MNIST-2", 256)
    run = qmoe_spec.run
    assert (run.op_set.label, run.n_experts, run.epochs, run.batch_size, run.learning_rate) == ("RX + RY", 4, 5, 32, 2e-3)
    train_set, test_set = load_benchmark(data.data_dir, "MNIST-2", 256)
    assert len(train_set) == len(test_set) == 512
    q_med, q = _median_test_acc(run, train_set, test_set)
    b_med, b = _median_test_acc(base_spec.run, train_set, test_set)
    record_property("detail", f"QMoE median {100 * q_med:.2f}% {np.round(q, 4).tolist()}, "
                              f"baseline median {100 * b_med:.2f}% {np.round(b, 4).tolist()}")
    assert q_med >= b_med + 0.01, "QMoE does not beat the baseline by 1pp"
    assert q_med >= 0.85, f"QMoE median accuracy {100 * q_med:.2f}% is below 85%"


@pytest.mark.slow
def test_criterion_5_expert_count(record_property):
    accs = {2: [], 4: []}
    for s in SEEDS:
        train_set, test_set = synthetic_blobs(s, 250, 4, sigma=0.15)
        assert len(train_set) == 800
        for n_experts in accs:
            cfg = RunConfig(n_experts=n_experts, n_classes=4, seed=s)
            accs[n_experts].append(train(cfg, train_set, test_set)[1].final_test_acc)
    med = {k: float(np.median(v)) for k, v in accs.items()}
    record_property("detail", f"4 experts {100 * med[4]:.2f}% vs 2 experts {100 * med[2]:.2f}%")
    assert med[4] >= med[2] - 0.005


@pytest.mark.parametrize("architecture", ["qmoe", "baseline"])
@pytest.mark.parametrize("n_classes", [2, 4])
def test_criterion_6_trivial_state(architecture, n_classes, record_property):
    run = RunConfig(architecture=architecture, n_classes=n_classes)
    model = Model(run)
    logits = forward(run, np.zeros(model.n_params), np.zeros(64))
    assert np.array_equal(logits, np.ones(n_classes))
    loss, _ = softmax_cross_entropy(logits, 0)
    assert abs(loss - math.log(n_classes)) <= 1e-12


def test_criterion_7_strict_determinism(tmp_path, capsys):
    cfg = CONFIGS / "quick_synthetic.ini"
    for name in ("a", "b"):
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / name), "--strict"]) == 0
    for f in ("metrics.jsonl", "checkpoint.txt", "summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_criterion_8_idx_fixtures(record_property):
    a = np.zeros((28, 28), dtype=np.uint8)
    a[0, 0], a[27, 27] = 255, 7
    b = (np.arange(784) % 256).astype(np.uint8).reshape(28, 28)
    images = bytes([0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28]) + a.tobytes() + b.tobytes()
    labels = bytes([0, 0, 8, 1, 0, 0, 0, 2, 3, 6])
    raw = parse_idx(images, labels)
    assert np.array_equal(raw.images, np.stack([a, b])) and raw.labels.tolist() == [3, 6]
    rejected = 0
    for which, blob0, width in (("images", images, 16), ("labels", labels, 8)):
        for pos in range(width):
            for value in range(256):
                if value == blob0[pos]:
                    continue
                blob = bytearray(blob0)
                blob[pos] = value
                args = (bytes(blob), labels) if which == "images" else (images, bytes(blob))
                with pytest.raises(ParseError):
                    parse_idx(*args)
                rejected += 1
    record_property("detail", f"{rejected} corrupted headers rejected")
