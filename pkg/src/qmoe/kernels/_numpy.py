"""Pure-numpy statevector kernels (fallback when numba is disabled).

Gate updates are vectorised over cached index arrays of the amplitude pairs
each (target, control-mask) combination touches.
"""
from functools import lru_cache

import numpy as np

from . import _gatemath
from ._gatemath import X, gate_derivative, gate_matrix

NAME = "numpy"


@lru_cache(maxsize=4096)
def _pairs(dim, target, mask):
    idx = np.arange(dim, dtype=np.int64)
    tbit = 1 << target
    i0 = idx[((idx & tbit) == 0) & ((idx & mask) == mask)]
    return i0, i0 | tbit


def apply_gate(state, kind, target, mask, angle):
    i0, i1 = _pairs(state.shape[0], int(target), int(mask))
    a0 = state[i0]
    a1 = state[i1]
    if kind == X:
        state[i0] = a1
        state[i1] = a0
        return
    m00, m01, m10, m11 = gate_matrix(kind, angle)
    state[i0] = m00 * a0 + m01 * a1
    state[i1] = m10 * a0 + m11 * a1


def apply_gates(state, kinds, targets, masks, angles):
    for g in range(kinds.shape[0]):
        apply_gate(state, kinds[g], targets[g], masks[g], angles[g])


@lru_cache(maxsize=256)
def _z_signs(dim, qubit):
    idx = np.arange(dim, dtype=np.int64)
    return 1.0 - 2.0 * ((idx >> qubit) & 1)


def expval_z(state, qubit):
    probs = state.real ** 2 + state.imag ** 2
    return float(probs @ _z_signs(state.shape[0], int(qubit)))


def expval_z_many(state, qubits):
    probs = state.real ** 2 + state.imag ** 2
    return np.array([probs @ _z_signs(state.shape[0], int(q)) for q in qubits])


def _derivative_overlap(bra, ket, kind, target, mask, angle):
    i0, i1 = _pairs(ket.shape[0], int(target), int(mask))
    d00, d01, d10, d11 = gate_derivative(kind, angle)
    a0 = ket[i0]
    a1 = ket[i1]
    return np.vdot(bra[i0], d00 * a0 + d01 * a1) + np.vdot(bra[i1], d10 * a0 + d11 * a1)


def adjoint_gradient(final_state, kinds, targets, masks, angles, param_idx,
                     z_qubits, z_weights, n_params):
    psi = final_state.copy()
    diag = np.zeros(final_state.shape[0])
    for q, w in zip(z_qubits, z_weights):
        diag += w * _z_signs(final_state.shape[0], int(q))
    lam = final_state * diag
    grad = np.zeros(n_params)
    for g in range(kinds.shape[0] - 1, -1, -1):
        apply_gate(psi, kinds[g], targets[g], masks[g], -angles[g])
        p = param_idx[g]
        if p >= 0:
            ov = _derivative_overlap(lam, psi, kinds[g], targets[g], masks[g], angles[g])
            grad[p] += 2.0 * ov.real
        apply_gate(lam, kinds[g], targets[g], masks[g], -angles[g])
    return grad


__all__ = ["NAME", "apply_gate", "apply_gates", "expval_z", "expval_z_many",
           "adjoint_gradient", "_gatemath"]
