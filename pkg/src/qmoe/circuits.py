"""Circuit builders for the QMoE classifier and its routing-free baseline.

Register layout (little-endian indices)::

    0 .. n_data-1                data register, readout on the first n_classes
    n_data .. n_data+n_routing-1 routing register

Every builder returns a :class:`~qmoe.qsim.Circuit` over the full register
width; a block only touches the qubits it owns. Trainable parameters are
numbered globally: ``[routing | expert 0 | ... | expert L-1]``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, StructuralError
from .qsim import Circuit, Gate, compose

N_FEATURES = 64


class OperatorSet(enum.Enum):
    RX = ("RX",)
    RY = ("RY",)
    RXRY = ("RX", "RY")
    RXRYRZ = ("RX", "RY", "RZ")

    @property
    def axes(self) -> tuple[str, ...]:
        return self.value

    @property
    def rotations_per_qubit(self) -> int:
        return len(self.value)

    @property
    def label(self) -> str:
        return " + ".join(self.value)

    @classmethod
    def parse(cls, text: str | OperatorSet) -> OperatorSet:
        if isinstance(text, cls):
            return text
        key = str(text).upper().replace("+", "").replace(" ", "").replace("U2", "RXRY").replace("U3", "RXRYRZ")
        try:
            return cls[key]
        except KeyError:
            raise ConfigError(f"unknown operator set {text!r}; expected one of {[m.name for m in cls]}") from None


def routing_width(n_experts: int) -> int:
    if n_experts < 1:
        raise ConfigError(f"need at least one expert, got {n_experts}")
    return max(1, math.ceil(math.log2(n_experts)))


@dataclass(frozen=True)
class RegisterLayout:
    n_data_qubits: int
    n_routing_qubits: int

    def __post_init__(self):
        if self.n_data_qubits < 1 or self.n_routing_qubits < 0:
            raise ConfigError(f"bad register layout {self}")

    @classmethod
    def for_experts(cls, n_data_qubits: int, n_experts: int) -> RegisterLayout:
        return cls(n_data_qubits, routing_width(n_experts))

    @property
    def total(self) -> int:
        return self.n_data_qubits + self.n_routing_qubits

    @property
    def data_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n_data_qubits))

    @property
    def routing_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n_data_qubits, self.total))


def _ring(qubits: tuple[int, ...]) -> list[Gate]:
    if len(qubits) < 2:
        return []
    n = len(qubits)
    return [Gate("CNOT", qubits[(i + 1) % n], (qubits[i],)) for i in range(n)]


def _layered_block(n_qubits: int, qubits: tuple[int, ...], op_set: OperatorSet, depth: int, param_offset: int) -> Circuit:
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    op_set = OperatorSet.parse(op_set)
    gates = []
    p = param_offset
    for _ in range(depth):
        for axis in op_set.axes:
            for q in qubits:
                gates.append(Gate(axis, q, param=p))
                p += 1
        gates.extend(_ring(qubits))
    return Circuit(n_qubits, tuple(gates), p)


def encoding_layers(layout: RegisterLayout) -> int:
    return math.ceil(N_FEATURES / layout.total)


def encoding_template(layout: RegisterLayout) -> Circuit:
    """Encoding structure with angle ``k`` read from parameter slot ``k``.

    Feed it ``pi * padded_features`` (see :func:`encoding_angles`) to get
    exactly the gates of :func:`build_encoding`.
    """
    n = layout.total
    layers = encoding_layers(layout)
    qubits = tuple(range(n))
    gates = []
    for layer in range(layers):
        for q in qubits:
            gates.append(Gate("RY", q, param=layer * n + q))
        if layer != layers - 1:
            gates.extend(_ring(qubits))
    return Circuit(n, tuple(gates), layers * n)


def check_features(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64).reshape(-1)
    if x.shape[0] != N_FEATURES:
        raise DataError(f"expected {N_FEATURES} features, got {x.shape[0]}")
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise DataError("features must lie in [0, 1]")
    return x


def encoding_angles(features, layout: RegisterLayout) -> np.ndarray:
    x = check_features(features)
    angles = np.zeros(encoding_layers(layout) * layout.total)
    angles[:N_FEATURES] = np.pi * x
    return angles


def build_encoding(features, layout: RegisterLayout) -> Circuit:
    """Phase encoding of 64 pixel intensities as RY(pi * pixel) layers with CNOT rings.

    Acts on every qubit, routing register included.
    """
    angles = encoding_angles(features, layout)
    template = encoding_template(layout)
    gates = tuple(Gate("RY", g.target, angle=float(angles[g.param])) if g.param is not None else g
                  for g in template.gates)
    return Circuit(layout.total, gates, 0)


def build_expert_block(layout: RegisterLayout, op_set: OperatorSet, depth: int, param_offset: int = 0) -> Circuit:
    return _layered_block(layout.total, layout.data_qubits, op_set, depth, param_offset)


def build_routing(layout: RegisterLayout, op_set: OperatorSet, depth: int, param_offset: int = 0) -> Circuit:
    return _layered_block(layout.total, layout.routing_qubits, op_set, depth, param_offset)


def controlled_on_basis(expert: Circuit, routing_register: tuple[int, ...], k: int) -> Circuit:
    """Condition every gate of ``expert`` on the routing register reading ``|k>``.

    Routing bits of ``k`` that are 0 are flipped before and after, so the
    all-ones control pattern selects basis state ``k``.
    """
    routing_register = tuple(routing_register)
    if not 0 <= k < 1 << len(routing_register):
        raise StructuralError(f"expert index {k} does not fit a {len(routing_register)}-qubit routing register")
    touched = {q for g in expert.gates for q in g.qubits}
    if touched & set(routing_register):
        raise StructuralError("expert circuit touches routing qubits")
    flips = [Gate("X", r) for j, r in enumerate(routing_register) if not (k >> j) & 1]
    body = [g.with_controls(routing_register) for g in expert.gates]
    return Circuit(expert.n_qubits, (*flips, *body, *flips), expert.n_params)


def build_aggregation(layout: RegisterLayout) -> Circuit:
    """CNOT fan from routing qubit j onto data qubit j."""
    if layout.n_routing_qubits > layout.n_data_qubits:
        raise StructuralError("aggregation needs at least as many data qubits as routing qubits")
    gates = tuple(Gate("CNOT", j, (r,)) for j, r in enumerate(layout.routing_qubits))
    return Circuit(layout.total, gates, 0)


def build_baseline(layout: RegisterLayout, op_set: OperatorSet, depth: int) -> Circuit:
    """Routing-free PQC over all qubits of ``layout`` (width parity with QMoE)."""
    return _layered_block(layout.total, tuple(range(layout.total)), op_set, depth, 0)


@dataclass(frozen=True)
class QMoEParts:
    routing: Circuit
    experts: tuple[Circuit, ...]
    controlled: tuple[Circuit, ...]
    aggregation: Circuit

    def assemble(self) -> Circuit:
        return compose(self.routing, *self.controlled, self.aggregation)

    def param_slices(self) -> list[slice]:
        """Contiguous parameter ranges: routing first, then each expert."""
        bounds = [0, self.routing.n_params] + [e.n_params for e in self.experts]
        return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def build_qmoe(layout: RegisterLayout, op_set: OperatorSet, n_experts: int, expert_depth: int, routing_depth: int) -> QMoEParts:
    """Trainable QMoE stages: routing, basis-controlled experts, aggregation."""
    if n_experts > 1 << layout.n_routing_qubits:
        raise ConfigError(f"{n_experts} experts need more than {layout.n_routing_qubits} routing qubits")
    routing = build_routing(layout, op_set, routing_depth, 0)
    experts = []
    offset = routing.n_params
    for _ in range(n_experts):
        e = build_expert_block(layout, op_set, expert_depth, offset)
        experts.append(e)
        offset = e.n_params
    controlled = tuple(controlled_on_basis(e, layout.routing_qubits, k) for k, e in enumerate(experts))
    return QMoEParts(routing, tuple(experts), controlled, build_aggregation(layout))
