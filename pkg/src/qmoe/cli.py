"""Command-line entry point: ``qmoe train | eval | gradcheck | bench``.

Exit codes: 0 success, 1 check failure, 2 usage or config error, 3 numeric abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .config import DataSpec, load_checkpoint, load_experiment, serialize_checkpoint
from .data import BENCHMARKS, load_benchmark, synthetic_blobs
from .errors import ConfigError, DataError, NumericError, QMoEError
from .grad import FD_STEP, finite_diff_gradient, loss_gradient
from .model import Model, RunConfig, evaluate, softmax_cross_entropy, train

log = logging.getLogger("qmoe")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

GRADCHECK_TOL = 1e-5
ADJOINT_TOL = 1e-8

CSV_HEADER = ("method", "operators", "benchmark", "accuracy_pct", "seed", "epochs")


def load_data(data: DataSpec, run: RunConfig):
    if data.source == "synthetic":
        return synthetic_blobs(data.data_seed, data.n_per_class, run.n_classes, data.sigma)
    n_classes = len(BENCHMARKS[data.benchmark][1]) if data.benchmark in BENCHMARKS else None
    if n_classes is not None and n_classes != run.n_classes:
        raise ConfigError(f"{data.benchmark} has {n_classes} classes but the model has n_classes={run.n_classes}")
    return load_benchmark(data.data_dir, data.benchmark, data.limit_per_class)


def _metrics_line(m, strict: bool) -> str:
    payload = {
        "epoch": m.epoch,
        "train_loss": m.train_loss,
        "train_acc": m.train_acc,
        "test_acc": m.test_acc,
        # wall time is the only non-reproducible field
        "seconds": None if strict else round(m.seconds, 3),
    }
    return json.dumps(payload)


def cmd_train(args) -> int:
    spec = load_experiment(args.config)
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.strict:
        overrides["strict"] = True
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        spec = replace(spec, **overrides)
    out = Path(spec.out_dir or Path("runs") / Path(args.config).stem)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")

    train_set, test_set = load_data(spec.data, spec.run)
    lines = []
    metrics_path = out / "metrics.jsonl"

    def on_epoch(m):
        lines.append(_metrics_line(m, spec.strict))
        metrics_path.write_text("".join(line + "\n" for line in lines))

    metrics_path.write_text("")
    params, record = train(spec.run, train_set, test_set, threads=spec.effective_threads,
                           grad_method=spec.grad_method, backend=spec.backend, on_epoch=on_epoch)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerow((spec.run.method_label, spec.run.op_set.label, spec.data.label,
                     f"{100 * record.final_test_acc:.2f}", spec.run.seed, spec.run.epochs))
    (out / "summary.csv").write_text(buf.getvalue())
    (out / "checkpoint.txt").write_text(serialize_checkpoint(spec.run, spec.data, params))
    print(f"{spec.run.method_label} {spec.run.op_set.label} on {spec.data.label}: "
          f"test accuracy {100 * record.final_test_acc:.2f}% ({record.seconds:.1f}s) -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    run, data, params = load_checkpoint(args.checkpoint)
    if args.benchmark is not None and args.benchmark.lower() != "synthetic":
        data = DataSpec(source="benchmark", benchmark=args.benchmark,
                        data_dir=args.data_dir or data.data_dir,
                        limit_per_class=args.limit_per_class if args.limit_per_class is not None else data.limit_per_class)
    elif args.data_dir is not None and data.source == "benchmark":
        data = DataSpec(source="benchmark", benchmark=data.benchmark, data_dir=args.data_dir,
                        limit_per_class=data.limit_per_class)
    model = Model(run)
    if model.n_params != params.theta.shape[0]:
        raise ConfigError(f"checkpoint holds {params.theta.shape[0]} parameters, config needs {model.n_params}")
    train_set, test_set = load_data(data, run)
    dataset = train_set if args.split == "train" else test_set
    acc = evaluate(run, params, dataset)
    print(f"accuracy {100 * acc:.2f}%")
    print(json.dumps({"method": run.method_label, "operators": run.op_set.label, "benchmark": data.label,
                      "split": args.split, "n_samples": len(dataset), "accuracy": acc}))
    return EXIT_OK


def run_gradcheck(model: Model, *, draws: int = 2, seed: int = 0, h: float = FD_STEP) -> dict:
    """Shift-rule loss gradients against central differences (and the adjoint path)."""
    rng = np.random.default_rng(seed)
    worst = {"fd_deviation": 0.0, "adjoint_deviation": 0.0, "param": None, "draw": None}
    for d in range(draws):
        theta = rng.uniform(-np.pi, np.pi, model.n_params)
        features = rng.uniform(0, 1, 64)
        label = int(rng.integers(model.config.n_classes))
        if model.n_params == 0:
            continue
        encoded = model.encode(features)

        def logits(p):
            return model.logits_from_state(p, encoded)

        def loss(p):
            return softmax_cross_entropy(logits(p), label)[0]

        _, shift = loss_gradient(logits, lambda z: softmax_cross_entropy(z, label), theta, model.rules)
        fd = finite_diff_gradient(loss, theta, h)
        _, adj = model.loss_and_grad(theta, features, label, "adjoint")
        dev = np.abs(shift - fd)
        k = int(np.argmax(dev))
        if dev[k] >= worst["fd_deviation"]:
            worst.update(fd_deviation=float(dev[k]), param=k, draw=d)
        worst["adjoint_deviation"] = max(worst["adjoint_deviation"], float(np.abs(adj - shift).max()))
    return worst


def cmd_gradcheck(args) -> int:
    spec = load_experiment(args.config)
    model = Model(spec.run, spec.backend)
    res = run_gradcheck(model, draws=args.draws, seed=spec.run.seed)
    print(f"{spec.run.method_label} {spec.run.op_set.label}: {model.n_params} params, "
          f"max |shift - FD| = {res['fd_deviation']:.3e}, max |adjoint - shift| = {res['adjoint_deviation']:.3e}")
    if res["fd_deviation"] > GRADCHECK_TOL or res["adjoint_deviation"] > ADJOINT_TOL:
        print(f"FAIL: worst parameter index {res['param']} (draw {res['draw']})")
        return EXIT_CHECK_FAILED
    print("OK")
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = load_experiment(args.config)
    threads = args.threads or spec.threads or (os.cpu_count() or 1)
    rows = bench.run_benchmark(spec.run, n_samples=args.samples, threads=max(threads, 2),
                               backends=args.backend or None, seed=spec.run.seed)
    print(bench.format_table(rows))
    expected = bench.expected_shift_runs(spec.run)
    print(f"shift-rule circuit runs per gradient: expected {expected} (2 x two-term + 4 x four-term)")
    if args.json:
        Path(args.json).write_text(json.dumps(bench.rows_as_dicts(rows), indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmoe", description="Quantum mixture-of-experts classifier on a statevector simulator.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: [run] out or runs/<config stem>)")
    p.add_argument("--strict", action="store_true", help="single-threaded, byte-reproducible outputs")
    p.add_argument("--threads", type=int, help="worker threads (default: available parallelism)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--benchmark", help=f"one of {sorted(BENCHMARKS)} or 'synthetic' (default: as trained)")
    p.add_argument("--data-dir", help="corpus directory (default: checkpoint's, then $QMOE_DATA_DIR)")
    p.add_argument("--limit-per-class", type=int)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="parameter-shift vs finite-difference gradient check")
    p.add_argument("--config", required=True)
    p.add_argument("--draws", type=int, default=2)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="throughput of both kernel backends, sequential vs threaded")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--threads", type=int)
    p.add_argument("--backend", action="append", choices=("numba", "numpy"))
    p.add_argument("--json", help="also write rows as JSON to this path")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, QMoEError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
