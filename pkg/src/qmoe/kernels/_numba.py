"""numba-compiled statevector kernels.

Every kernel is ``nogil`` so independent circuit evaluations scale across
threads. Signatures mirror :mod:`qmoe.kernels._numpy` exactly.
"""
import numpy as np
from numba import njit

from . import _gatemath

NAME = "numba"

RX = _gatemath.RX
X = _gatemath.X

_matrix = njit(cache=True, nogil=True)(_gatemath.gate_matrix)
_derivative = njit(cache=True, nogil=True)(_gatemath.gate_derivative)


@njit(cache=True, nogil=True)
def _apply(state, kind, target, mask, angle):
    tbit = np.int64(1) << target
    low = tbit - 1
    half = state.shape[0] >> 1
    if kind == X:
        for j in range(half):
            i0 = ((j & ~low) << 1) | (j & low)
            if (i0 & mask) == mask:
                i1 = i0 | tbit
                tmp = state[i0]
                state[i0] = state[i1]
                state[i1] = tmp
        return
    m00, m01, m10, m11 = _matrix(kind, angle)
    for j in range(half):
        i0 = ((j & ~low) << 1) | (j & low)
        if (i0 & mask) == mask:
            i1 = i0 | tbit
            a0 = state[i0]
            a1 = state[i1]
            state[i0] = m00 * a0 + m01 * a1
            state[i1] = m10 * a0 + m11 * a1


@njit(cache=True, nogil=True)
def apply_gate(state, kind, target, mask, angle):
    _apply(state, kind, target, mask, angle)


@njit(cache=True, nogil=True)
def apply_gates(state, kinds, targets, masks, angles):
    for g in range(kinds.shape[0]):
        _apply(state, kinds[g], targets[g], masks[g], angles[g])


@njit(cache=True, nogil=True)
def expval_z(state, qubit):
    bit = np.int64(1) << qubit
    total = 0.0
    for i in range(state.shape[0]):
        p = state[i].real * state[i].real + state[i].imag * state[i].imag
        if i & bit:
            total -= p
        else:
            total += p
    return total


@njit(cache=True, nogil=True)
def expval_z_many(state, qubits):
    out = np.zeros(qubits.shape[0])
    for i in range(state.shape[0]):
        p = state[i].real * state[i].real + state[i].imag * state[i].imag
        for k in range(qubits.shape[0]):
            if i & (np.int64(1) << qubits[k]):
                out[k] -= p
            else:
                out[k] += p
    return out


@njit(cache=True, nogil=True)
def _derivative_overlap(bra, ket, kind, target, mask, angle):
    # <bra| (P_controls (x) dR/dangle) |ket>
    d00, d01, d10, d11 = _derivative(kind, angle)
    tbit = np.int64(1) << target
    low = tbit - 1
    acc = 0.0 + 0.0j
    for j in range(ket.shape[0] >> 1):
        i0 = ((j & ~low) << 1) | (j & low)
        if (i0 & mask) == mask:
            i1 = i0 | tbit
            a0 = ket[i0]
            a1 = ket[i1]
            acc += bra[i0].conjugate() * (d00 * a0 + d01 * a1)
            acc += bra[i1].conjugate() * (d10 * a0 + d11 * a1)
    return acc


@njit(cache=True, nogil=True)
def adjoint_gradient(final_state, kinds, targets, masks, angles, param_idx,
                     z_qubits, z_weights, n_params):
    psi = final_state.copy()
    lam = final_state.copy()
    for i in range(lam.shape[0]):
        w = 0.0
        for k in range(z_qubits.shape[0]):
            if i & (np.int64(1) << z_qubits[k]):
                w -= z_weights[k]
            else:
                w += z_weights[k]
        lam[i] *= w
    grad = np.zeros(n_params)
    for g in range(kinds.shape[0] - 1, -1, -1):
        # rotations invert by negating the angle; H and X are involutions
        _apply(psi, kinds[g], targets[g], masks[g], -angles[g])
        p = param_idx[g]
        if p >= 0:
            ov = _derivative_overlap(lam, psi, kinds[g], targets[g], masks[g], angles[g])
            grad[p] += 2.0 * ov.real
        _apply(lam, kinds[g], targets[g], masks[g], -angles[g])
    return grad
