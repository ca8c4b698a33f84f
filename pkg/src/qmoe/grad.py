"""Gradients of circuit expectation values.

The parameter-shift rules are the reference differentiator. An adjoint
(reverse-mode) pass over the statevector gives the same numbers at the cost
of roughly three forward runs regardless of parameter count, and is what
training uses. Central finite differences serve as the independent oracle.
"""
from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, StructuralError
from .kernels import get_backend
from .qsim import Circuit, Gate, StateVector

FD_STEP = 1e-4


@dataclass(frozen=True)
class ShiftRule:
    kind: str
    shifts: tuple[tuple[float, float], ...]

    @property
    def n_evaluations(self) -> int:
        return len(self.shifts)


TWO_TERM = ShiftRule("TwoTerm", ((math.pi / 2, 0.5), (-math.pi / 2, -0.5)))

# Controlled rotations have generator eigenvalues {0, +-1/2}, so the expectation
# carries frequencies 1/2 and 1 and two shift pairs are needed.
_D1 = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_D2 = (math.sqrt(2) - 1) / (4 * math.sqrt(2))
FOUR_TERM = ShiftRule(
    "FourTerm",
    ((math.pi / 2, _D1), (-math.pi / 2, -_D1), (3 * math.pi / 2, -_D2), (-3 * math.pi / 2, _D2)),
)


def rule_for_gate(gate: Gate) -> ShiftRule:
    return FOUR_TERM if gate.controls else TWO_TERM


def param_rules(circuit: Circuit) -> list[ShiftRule]:
    """Shift rule for every parameter of ``circuit``.

    Each parameter must feed exactly one rotation; unused parameters get the
    two-term rule (their gradient is zero either way).
    """
    rules = [TWO_TERM] * circuit.n_params
    for p, gates in circuit.param_gates().items():
        if len(gates) != 1:
            raise StructuralError(f"parameter {p} drives {len(gates)} gates; shift rules need exactly one")
        rules[p] = rule_for_gate(gates[0])
    return rules


def shift_evaluation_count(rules: Sequence[ShiftRule]) -> int:
    return sum(r.n_evaluations for r in rules)


def _map(fn, items, executor: Executor | None):
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


def expectation_gradient(
    forward: Callable[[np.ndarray], float | np.ndarray],
    params,
    rules: Sequence[ShiftRule],
    *,
    executor: Executor | None = None,
) -> np.ndarray:
    """Parameter-shift gradient of ``forward`` at ``params``.

    ``forward`` may return a scalar or an array (e.g. all logits from one
    final state); the result then has shape ``(n_params, *out_shape)``.
    Shifted evaluations may be farmed out to ``executor``; the reduction runs
    in a fixed order so the result does not depend on scheduling.
    """
    params = np.asarray(params, dtype=np.float64)
    if len(rules) != params.shape[0]:
        raise StructuralError(f"{len(rules)} shift rules for {params.shape[0]} parameters")
    jobs = []
    for k, rule in enumerate(rules):
        for offset, _ in rule.shifts:
            shifted = params.copy()
            shifted[k] += offset
            jobs.append(shifted)
    values = _map(lambda p: np.asarray(forward(p), dtype=np.float64), jobs, executor)

    out_shape = values[0].shape if values else ()
    grad = np.zeros((params.shape[0], *out_shape))
    pos = 0
    for k, rule in enumerate(rules):
        acc = np.zeros(out_shape)
        for _, coeff in rule.shifts:
            v = values[pos]
            pos += 1
            if not np.all(np.isfinite(v)):
                raise NumericError(f"non-finite forward value while shifting parameter {k}")
            acc = acc + coeff * v
        grad[k] = acc
    return grad


def finite_diff_gradient(forward: Callable[[np.ndarray], float | np.ndarray], params, h: float = FD_STEP) -> np.ndarray:
    """Central differences ``(f(p + h e_k) - f(p - h e_k)) / 2h``."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    params = np.asarray(params, dtype=np.float64)
    cols = []
    for k in range(params.shape[0]):
        up = params.copy()
        up[k] += h
        down = params.copy()
        down[k] -= h
        cols.append((np.asarray(forward(up), dtype=np.float64) - np.asarray(forward(down), dtype=np.float64)) / (2 * h))
    if not cols:
        return np.zeros(0)
    return np.stack(cols)


def loss_gradient(
    logits_fn: Callable[[np.ndarray], np.ndarray],
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    params,
    rules: Sequence[ShiftRule],
    *,
    executor: Executor | None = None,
) -> tuple[float, np.ndarray]:
    """Loss and its parameter gradient by the chain rule.

    ``loss_fn`` maps logits to ``(loss, dloss/dlogits)``. The logit Jacobian
    comes from the shift rules, where every shifted run yields all logits at
    once; one extra unshifted run supplies the loss itself.
    """
    params = np.asarray(params, dtype=np.float64)
    logits = np.asarray(logits_fn(params), dtype=np.float64)
    loss, dlogits = loss_fn(logits)
    if params.shape[0] == 0:
        return float(loss), np.zeros(0)
    jac = expectation_gradient(logits_fn, params, rules, executor=executor)
    return float(loss), jac @ np.asarray(dlogits, dtype=np.float64)


def adjoint_gradient(
    circuit: Circuit,
    params,
    initial: StateVector,
    z_qubits: Sequence[int],
    z_weights: Sequence[float],
    *,
    backend=None,
) -> tuple[StateVector, np.ndarray]:
    """Reverse-mode gradient of ``sum_j w_j <Z_{q_j}>`` after ``circuit``.

    Returns the final state (``initial`` is left untouched) and the gradient
    with respect to ``params``.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape[0] != circuit.n_params:
        raise StructuralError(f"circuit takes {circuit.n_params} params, got {params.shape[0]}")
    if initial.n_qubits != circuit.n_qubits:
        raise StructuralError(f"{circuit.n_qubits}-qubit circuit applied to {initial.n_qubits}-qubit state")
    kern = get_backend(backend)
    cc = circuit.compiled
    angles = cc.angles(params)
    final = initial.amplitudes.copy()
    kern.apply_gates(final, cc.kinds, cc.targets, cc.masks, angles)
    grad = kern.adjoint_gradient(
        final, cc.kinds, cc.targets, cc.masks, angles, cc.param_idx,
        np.asarray(z_qubits, dtype=np.int64), np.asarray(z_weights, dtype=np.float64), circuit.n_params,
    )
    return StateVector(final), grad
