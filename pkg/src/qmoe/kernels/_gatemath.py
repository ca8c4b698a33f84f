"""Scalar 2x2 gate algebra shared by both kernel backends.

Written in the numba-compatible subset of Python so the numba backend can
jit the very same functions the numpy backend calls directly.
"""
import math

RX = 0
RY = 1
RZ = 2
H = 3
X = 4

_INV_SQRT2 = 0.7071067811865476


def gate_matrix(kind, angle):
    """Entries (m00, m01, m10, m11) of the single-qubit unitary."""
    if kind == RX:
        c = math.cos(0.5 * angle)
        s = math.sin(0.5 * angle)
        return complex(c, 0.0), complex(0.0, -s), complex(0.0, -s), complex(c, 0.0)
    if kind == RY:
        c = math.cos(0.5 * angle)
        s = math.sin(0.5 * angle)
        return complex(c, 0.0), complex(-s, 0.0), complex(s, 0.0), complex(c, 0.0)
    if kind == RZ:
        c = math.cos(0.5 * angle)
        s = math.sin(0.5 * angle)
        return complex(c, -s), complex(0.0, 0.0), complex(0.0, 0.0), complex(c, s)
    if kind == H:
        return (complex(_INV_SQRT2, 0.0), complex(_INV_SQRT2, 0.0),
                complex(_INV_SQRT2, 0.0), complex(-_INV_SQRT2, 0.0))
    # X
    return complex(0.0, 0.0), complex(1.0, 0.0), complex(1.0, 0.0), complex(0.0, 0.0)


def gate_derivative(kind, angle):
    """Entries of d/dangle of the rotation matrix; zero for fixed gates."""
    c = 0.5 * math.cos(0.5 * angle)
    s = 0.5 * math.sin(0.5 * angle)
    if kind == RX:
        return complex(-s, 0.0), complex(0.0, -c), complex(0.0, -c), complex(-s, 0.0)
    if kind == RY:
        return complex(-s, 0.0), complex(-c, 0.0), complex(c, 0.0), complex(-s, 0.0)
    if kind == RZ:
        # d/da exp(-+ia/2) = -+i/2 exp(-+ia/2)
        return complex(-s, -c), complex(0.0, 0.0), complex(0.0, 0.0), complex(-s, c)
    return complex(0.0, 0.0), complex(0.0, 0.0), complex(0.0, 0.0), complex(0.0, 0.0)
