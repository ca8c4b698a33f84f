import numpy as np

from qmoe.qsim import Circuit, Gate, StateVector

ROT = ("RX", "RY", "RZ")


def random_circuit(rng: np.random.Generator, n_qubits: int, n_gates: int, *, max_controls: int = 2,
                   parameterized: bool = True, controlled_rotations: bool = True) -> Circuit:
    """Random mix of rotations (fixed angle or one fresh parameter each), H, X and CNOT."""
    gates = []
    n_params = 0
    for _ in range(n_gates):
        kind = str(rng.choice(("RX", "RY", "RZ", "H", "X", "CNOT")))
        target = int(rng.integers(n_qubits))
        others = [q for q in range(n_qubits) if q != target]
        if kind == "CNOT":
            if not others:
                kind = "X"
            else:
                gates.append(Gate("CNOT", target, (int(rng.choice(others)),)))
                continue
        k = 0
        if others and (kind not in ROT or controlled_rotations):
            k = int(rng.integers(0, min(max_controls, len(others)) + 1))
        controls = tuple(int(c) for c in rng.choice(others, size=k, replace=False)) if k else ()
        if kind in ROT:
            if parameterized and rng.random() < 0.7:
                gates.append(Gate(kind, target, controls, param=n_params))
                n_params += 1
            else:
                gates.append(Gate(kind, target, controls, angle=float(rng.uniform(-np.pi, np.pi))))
        else:
            gates.append(Gate(kind, target, controls))
    return Circuit(n_qubits, tuple(gates), n_params)


def random_state(rng: np.random.Generator, n_qubits: int) -> StateVector:
    a = rng.standard_normal(1 << n_qubits) + 1j * rng.standard_normal(1 << n_qubits)
    return StateVector(a / np.linalg.norm(a))


def dense_gate(gate: Gate, n_qubits: int, angle: float = 0.0) -> np.ndarray:
    """Full 2^n matrix of a gate, built column by column from its definition (test oracle only)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    single = {
        "RX": np.array([[c, -1j * s], [-1j * s, c]]),
        "RY": np.array([[c, -s], [s, c]]),
        "RZ": np.array([[np.exp(-1j * angle / 2), 0], [0, np.exp(1j * angle / 2)]]),
        "H": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
        "X": np.array([[0, 1], [1, 0]]),
        "CNOT": np.array([[0, 1], [1, 0]]),
    }[gate.kind]
    dim = 1 << n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        if not all((col >> q) & 1 for q in gate.controls):
            out[col, col] = 1
            continue
        b = (col >> gate.target) & 1
        for new_b in (0, 1):
            row = (col & ~(1 << gate.target)) | (new_b << gate.target)
            out[row, col] += single[new_b, b]
    return out
