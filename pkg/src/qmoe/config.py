"""Experiment config files and checkpoints.

Both use flat ``key = value`` text with ``#`` comments and ``[section]``
headers. A checkpoint is a config echo (``[model]``, ``[train]``,
``[data]``) plus a ``[state]`` section holding the parameter and Adam moment
arrays as 17-significant-digit decimals, so parse-then-serialize is
byte-exact.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import ModelParams, RunConfig

CHECKPOINT_FORMAT = "qmoe-checkpoint"
CHECKPOINT_VERSION = 1

_MODEL_KEYS = {
    "architecture": "architecture",
    "operators": "op_set",
    "n_data_qubits": "n_data_qubits",
    "n_experts": "n_experts",
    "expert_depth": "expert_depth",
    "routing_depth": "routing_depth",
    "baseline_depth": "baseline_depth",
    "n_classes": "n_classes",
}
_TRAIN_KEYS = {
    "learning_rate": "learning_rate",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "seed": "seed",
}
_SYNTHETIC_KEYS = ("n_per_class", "sigma", "data_seed")
_BENCHMARK_KEYS = ("benchmark", "data_dir", "limit_per_class")


@dataclass(frozen=True)
class DataSpec:
    source: str = "synthetic"  # "synthetic" or "benchmark"
    benchmark: str | None = None
    data_dir: str | None = None
    limit_per_class: int | None = None
    n_per_class: int = 100
    sigma: float = 0.1
    data_seed: int = 0

    def __post_init__(self):
        if self.source not in ("synthetic", "benchmark"):
            raise ConfigError(f"data source must be 'synthetic' or 'benchmark', got {self.source!r}")
        if self.source == "benchmark" and not self.benchmark:
            raise ConfigError("benchmark data source needs a 'benchmark' name")

    @property
    def label(self) -> str:
        return self.benchmark if self.source == "benchmark" else "Synthetic"


@dataclass(frozen=True)
class ExperimentSpec:
    run: RunConfig = field(default_factory=RunConfig)
    data: DataSpec = field(default_factory=DataSpec)
    out_dir: str | None = None
    strict: bool = False
    threads: int = 0  # 0: available parallelism
    grad_method: str = "adjoint"
    backend: str | None = None

    def __post_init__(self):
        if self.grad_method not in ("adjoint", "shift"):
            raise ConfigError(f"grad_method must be 'adjoint' or 'shift', got {self.grad_method!r}")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")

    @property
    def effective_threads(self) -> int:
        if self.strict:
            return 1
        return self.threads or (os.cpu_count() or 1)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    cp.optionxform = str
    return cp


def _convert(value: str, like):
    try:
        if isinstance(like, bool):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as {type(like).__name__}") from None
    return value.strip()


def _section(cp, name: str) -> dict[str, str]:
    return dict(cp[name]) if cp.has_section(name) else {}


def _unknown(section: str, got: dict, allowed) -> None:
    extra = set(got) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(extra)}")


def _run_config(cp) -> RunConfig:
    base = RunConfig()
    kwargs = {}
    for section, keys in (("model", _MODEL_KEYS), ("train", _TRAIN_KEYS)):
        raw = _section(cp, section)
        allowed = set(keys) | ({"grad_method"} if section == "train" else set())
        _unknown(section, raw, allowed)
        for key, attr in keys.items():
            if key in raw:
                like = getattr(base, attr)
                kwargs[attr] = raw[key] if attr in ("architecture", "op_set") else _convert(raw[key], like)
    return RunConfig(**kwargs)


def _data_spec(cp) -> DataSpec:
    raw = _section(cp, "data")
    _unknown("data", raw, {"source", *_SYNTHETIC_KEYS, *_BENCHMARK_KEYS})
    source = raw.get("source", "benchmark" if "benchmark" in raw else "synthetic").strip()
    other = _BENCHMARK_KEYS if source == "synthetic" else _SYNTHETIC_KEYS
    clash = sorted(k for k in other if k in raw)
    if clash:
        raise ConfigError(f"[data] source = {source} conflicts with key(s) {clash}; give exactly one data source")
    base = DataSpec()
    kwargs = {"source": source}
    for key in (*_SYNTHETIC_KEYS, "benchmark", "data_dir"):
        if key in raw:
            kwargs[key] = _convert(raw[key], getattr(base, key)) if getattr(base, key) is not None else raw[key].strip()
    if "limit_per_class" in raw:
        kwargs["limit_per_class"] = _convert(raw["limit_per_class"], 0)
    return DataSpec(**kwargs)


def parse_experiment(text: str, *, base_dir: str | os.PathLike | None = None) -> ExperimentSpec:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    allowed = {"model", "train", "data", "run"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown section(s) {sorted(extra)}")
    run_cfg = _run_config(cp)
    data = _data_spec(cp)
    if base_dir is not None and data.data_dir and not os.path.isabs(data.data_dir):
        data = replace(data, data_dir=str(Path(base_dir) / data.data_dir))
    raw = _section(cp, "run")
    _unknown("run", raw, {"out", "strict", "threads", "backend"})
    train_raw = _section(cp, "train")
    return ExperimentSpec(
        run=run_cfg,
        data=data,
        out_dir=raw.get("out"),
        strict=_convert(raw["strict"], False) if "strict" in raw else False,
        threads=_convert(raw["threads"], 0) if "threads" in raw else 0,
        grad_method=train_raw.get("grad_method", "adjoint").strip(),
        backend=raw.get("backend"),
    )


def load_experiment(path: str | os.PathLike) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_experiment(text, base_dir=path.parent)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "name"):  # OperatorSet
        return value.name
    return str(value)


def config_sections(run: RunConfig, data: DataSpec) -> list[tuple[str, list[tuple[str, str]]]]:
    model = [(key, _fmt(getattr(run, attr))) for key, attr in _MODEL_KEYS.items()]
    train = [(key, _fmt(getattr(run, attr))) for key, attr in _TRAIN_KEYS.items()]
    d = [("source", data.source)]
    keys = _SYNTHETIC_KEYS if data.source == "synthetic" else _BENCHMARK_KEYS
    d += [(k, _fmt(getattr(data, k))) for k in keys if getattr(data, k) is not None]
    return [("model", model), ("train", train), ("data", d)]


def _render(sections) -> str:
    lines = []
    for name, items in sections:
        if lines:
            lines.append("")
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in items)
    return "\n".join(lines) + "\n"


def _fmt_array(a: np.ndarray) -> str:
    return " ".join("%.17g" % x for x in a)


def serialize_checkpoint(run: RunConfig, data: DataSpec, params: ModelParams) -> str:
    sections = [("checkpoint", [("format", CHECKPOINT_FORMAT), ("version", str(CHECKPOINT_VERSION))])]
    sections += config_sections(run, data)
    sections.append(("state", [
        ("n_params", str(params.theta.shape[0])),
        ("step_count", str(params.step_count)),
        ("theta", _fmt_array(params.theta)),
        ("adam_m", _fmt_array(params.adam_m)),
        ("adam_v", _fmt_array(params.adam_v)),
    ]))
    return _render(sections)


def _parse_array(text: str, n: int, name: str) -> np.ndarray:
    try:
        values = np.array([float(tok) for tok in text.split()], dtype=np.float64)
    except ValueError:
        raise ConfigError(f"checkpoint array {name} holds a non-numeric entry") from None
    if values.shape[0] != n:
        raise ConfigError(f"checkpoint array {name} has {values.shape[0]} entries, expected {n}")
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"checkpoint array {name} holds non-finite values")
    return values


def parse_checkpoint(text: str) -> tuple[RunConfig, DataSpec, ModelParams]:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed checkpoint: {exc}") from None
    head = _section(cp, "checkpoint")
    if head.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError("not a qmoe checkpoint")
    if head.get("version") != str(CHECKPOINT_VERSION):
        raise ConfigError(f"unsupported checkpoint version {head.get('version')!r}")
    state = _section(cp, "state")
    missing = {"n_params", "step_count", "theta", "adam_m", "adam_v"} - set(state)
    if missing:
        raise ConfigError(f"checkpoint [state] lacks {sorted(missing)}")
    run = _run_config(cp)
    data = _data_spec(cp)
    n = _convert(state["n_params"], 0)
    arrays = [_parse_array(state[k], n, k) for k in ("theta", "adam_m", "adam_v")]
    params = ModelParams(*arrays, step_count=_convert(state["step_count"], 0))
    return run, data, params


def load_checkpoint(path: str | os.PathLike) -> tuple[RunConfig, DataSpec, ModelParams]:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from None
    return parse_checkpoint(text)
