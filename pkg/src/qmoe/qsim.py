"""Dense statevector simulation.

Layout is little-endian: qubit ``q`` is bit ``q`` of the basis index, so the
amplitude of ``|q1 q0> = |01>`` lives at index 1. Gates are applied with
strided pair updates; no full 2^n x 2^n matrix is ever built.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, StructuralError
from .kernels import KIND_CODES, get_backend

MAX_QUBITS = 24

ROTATIONS = frozenset({"RX", "RY", "RZ"})
GATE_KINDS = frozenset({"RX", "RY", "RZ", "H", "X", "CNOT"})


class StateVector:
    """Complex amplitudes of an ``n_qubits`` pure state."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: np.ndarray):
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        n = amps.shape[0].bit_length() - 1
        if amps.ndim != 1 or amps.shape[0] != 1 << n or n < 1:
            raise StructuralError(f"amplitude length {amps.shape} is not 2^n for n >= 1")
        self.amplitudes = amps

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real ** 2 + a.imag ** 2

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


@dataclass(frozen=True)
class Gate:
    """One gate. Rotations take either a fixed ``angle`` or a ``param`` index.

    ``CNOT`` is an X with exactly one control; any gate may carry extra
    controls, which restrict its action to basis states where every control
    bit is 1.
    """

    kind: str
    target: int
    controls: tuple[int, ...] = ()
    angle: float | None = None
    param: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise StructuralError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        if self.target in self.controls:
            raise StructuralError(f"{self.kind}: target {self.target} is also a control")
        if len(set(self.controls)) != len(self.controls):
            raise StructuralError(f"{self.kind}: duplicate controls {self.controls}")
        if min((self.target, *self.controls)) < 0:
            raise StructuralError(f"{self.kind}: negative qubit index")
        if self.kind in ROTATIONS:
            if (self.angle is None) == (self.param is None):
                raise StructuralError(f"{self.kind} needs exactly one of angle / param")
            if self.param is not None and self.param < 0:
                raise StructuralError(f"{self.kind}: negative parameter index {self.param}")
        elif self.angle is not None or self.param is not None:
            raise StructuralError(f"{self.kind} takes no angle")
        if self.kind == "CNOT" and len(self.controls) != 1:
            raise StructuralError("CNOT needs exactly one control")

    @property
    def is_parameterized(self) -> bool:
        return self.param is not None

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target, *self.controls)

    def with_controls(self, extra: Iterable[int]) -> Gate:
        """Same gate with ``extra`` controls appended (CNOT becomes a multi-controlled X)."""
        controls = (*self.controls, *extra)
        kind = "X" if self.kind == "CNOT" else self.kind
        return Gate(kind, self.target, controls, self.angle, self.param)


@dataclass(frozen=True)
class CompiledCircuit:
    kinds: np.ndarray
    targets: np.ndarray
    masks: np.ndarray
    param_idx: np.ndarray
    fixed_angles: np.ndarray

    def angles(self, params: np.ndarray) -> np.ndarray:
        if params.shape[0] == 0:
            return self.fixed_angles
        return np.where(self.param_idx >= 0, params[np.maximum(self.param_idx, 0)], self.fixed_angles)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_qubit_count(self.n_qubits)
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise StructuralError(f"{g} touches a qubit outside a {self.n_qubits}-qubit circuit")
            if g.param is not None and g.param >= self.n_params:
                raise StructuralError(f"{g} references parameter {g.param} >= n_params={self.n_params}")

    def __len__(self) -> int:
        return len(self.gates)

    @cached_property
    def compiled(self) -> CompiledCircuit:
        n = len(self.gates)
        kinds = np.empty(n, dtype=np.int64)
        targets = np.empty(n, dtype=np.int64)
        masks = np.zeros(n, dtype=np.int64)
        pidx = np.full(n, -1, dtype=np.int64)
        fixed = np.zeros(n, dtype=np.float64)
        for i, g in enumerate(self.gates):
            kinds[i] = KIND_CODES[g.kind]
            targets[i] = g.target
            for c in g.controls:
                masks[i] |= 1 << c
            if g.param is not None:
                pidx[i] = g.param
            elif g.angle is not None:
                fixed[i] = g.angle
        return CompiledCircuit(kinds, targets, masks, pidx, fixed)

    def param_gates(self) -> dict[int, list[Gate]]:
        out: dict[int, list[Gate]] = {}
        for g in self.gates:
            if g.param is not None:
                out.setdefault(g.param, []).append(g)
        return out

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)


def compose(*circuits: Circuit, n_qubits: int | None = None) -> Circuit:
    """Concatenate circuits that share one qubit register and parameter table."""
    if n_qubits is None:
        n_qubits = max(c.n_qubits for c in circuits)
    gates = [g for c in circuits for g in c.gates]
    n_params = max((c.n_params for c in circuits), default=0)
    return Circuit(n_qubits, tuple(gates), n_params)


def _check_qubit_count(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"qubit count {n_qubits} outside [1, {MAX_QUBITS}]")


def zero_state(n_qubits: int) -> StateVector:
    _check_qubit_count(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps)


def basis_state(n_qubits: int, index: int) -> StateVector:
    _check_qubit_count(n_qubits)
    if not 0 <= index < 1 << n_qubits:
        raise StructuralError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(amps)


def apply_gate(state: StateVector, gate: Gate, params: Sequence[float] = (), *, backend=None) -> StateVector:
    """Apply ``gate`` in place and return ``state``."""
    if max(gate.qubits) >= state.n_qubits:
        raise StructuralError(f"{gate} out of range for {state.n_qubits} qubits")
    if gate.param is not None:
        if gate.param >= len(params):
            raise StructuralError(f"parameter {gate.param} requested but only {len(params)} given")
        angle = float(params[gate.param])
    else:
        angle = 0.0 if gate.angle is None else float(gate.angle)
    mask = 0
    for c in gate.controls:
        mask |= 1 << c
    get_backend(backend).apply_gate(state.amplitudes, KIND_CODES[gate.kind], gate.target, mask, angle)
    return state


def run_circuit(circuit: Circuit, params, state: StateVector | None = None, *, backend=None) -> StateVector:
    """Apply every gate of ``circuit`` in order, in place on ``state``.

    ``state`` defaults to ``|0...0>``.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise StructuralError(f"circuit takes {circuit.n_params} params, got {params.shape[0]}")
    if state is None:
        state = zero_state(circuit.n_qubits)
    elif state.n_qubits != circuit.n_qubits:
        raise StructuralError(f"{circuit.n_qubits}-qubit circuit applied to {state.n_qubits}-qubit state")
    cc = circuit.compiled
    get_backend(backend).apply_gates(state.amplitudes, cc.kinds, cc.targets, cc.masks, cc.angles(params))
    return state


def expectation_z(state: StateVector, qubit: int, *, backend=None) -> float:
    if not 0 <= qubit < state.n_qubits:
        raise StructuralError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    return float(get_backend(backend).expval_z(state.amplitudes, qubit))


def expectation_z_many(state: StateVector, qubits: Sequence[int], *, backend=None) -> np.ndarray:
    qubits = np.asarray(qubits, dtype=np.int64)
    if qubits.size and (qubits.min() < 0 or qubits.max() >= state.n_qubits):
        raise StructuralError(f"qubits {qubits.tolist()} out of range for {state.n_qubits} qubits")
    return get_backend(backend).expval_z_many(state.amplitudes, qubits)
