import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import dense_gate, random_circuit, random_state
from qmoe.errors import ConfigError, StructuralError
from qmoe.qsim import (MAX_QUBITS, Circuit, Gate, StateVector, apply_gate, basis_state, expectation_z,
                       run_circuit, zero_state)

SQRT2_INV = 1 / math.sqrt(2)


def test_zero_state():
    np.testing.assert_array_equal(zero_state(1).amplitudes, [1, 0])
    np.testing.assert_array_equal(zero_state(2).amplitudes, [1, 0, 0, 0])
    assert zero_state(10).norm() == 1.0


@pytest.mark.parametrize("n", [0, MAX_QUBITS + 1])
def test_zero_state_cap(n):
    with pytest.raises(ConfigError):
        zero_state(n)


def test_rx_pi_flips_with_phase():
    s = apply_gate(zero_state(1), Gate("RX", 0, angle=math.pi))
    np.testing.assert_allclose(s.amplitudes, [0, -1j], atol=1e-15)


def test_bell_state():
    s = zero_state(2)
    apply_gate(s, Gate("H", 0))
    apply_gate(s, Gate("CNOT", 1, (0,)))
    np.testing.assert_allclose(s.amplitudes, [SQRT2_INV, 0, 0, SQRT2_INV], atol=1e-15)
    assert expectation_z(s, 0) == pytest.approx(0, abs=1e-15)


def test_control_not_satisfied_leaves_state():
    # |01>: qubit 0 set, qubit 1 (the control) clear
    s = basis_state(2, 0b01)
    apply_gate(s, Gate("X", 0, (1,)))
    np.testing.assert_array_equal(s.amplitudes, basis_state(2, 0b01).amplitudes)


def test_run_circuit_examples():
    s = zero_state(3)
    before = s.amplitudes.copy()
    run_circuit(Circuit(3), [], s)
    np.testing.assert_array_equal(s.amplitudes, before)

    c = Circuit(1, (Gate("RY", 0, param=0),), 1)
    np.testing.assert_array_equal(run_circuit(c, [0.0]).amplitudes, [1, 0])
    np.testing.assert_allclose(run_circuit(c, [math.pi / 2]).amplitudes,
                               [math.cos(math.pi / 4), math.sin(math.pi / 4)], atol=1e-15)


def test_expectation_examples():
    assert expectation_z(zero_state(1), 0) == 1.0
    s = apply_gate(zero_state(1), Gate("RX", 0, angle=math.pi))
    assert expectation_z(s, 0) == pytest.approx(-1, abs=1e-15)


def test_errors():
    with pytest.raises(StructuralError):
        apply_gate(zero_state(2), Gate("X", 2))
    with pytest.raises(StructuralError):
        expectation_z(zero_state(2), 2)
    c = Circuit(2, (Gate("RY", 0, param=0),), 1)
    with pytest.raises(StructuralError):
        run_circuit(c, [0.1, 0.2])
    with pytest.raises(StructuralError):
        run_circuit(c, [0.1], zero_state(3))
    with pytest.raises(StructuralError):
        apply_gate(zero_state(2), Gate("RY", 0, param=3), [0.0])


@pytest.mark.parametrize("kwargs", [
    dict(kind="RX", target=0),  # no angle source
    dict(kind="RX", target=0, angle=1.0, param=0),
    dict(kind="H", target=0, angle=1.0),
    dict(kind="CNOT", target=0),
    dict(kind="CNOT", target=0, controls=(1, 2)),
    dict(kind="X", target=1, controls=(1,)),
    dict(kind="SWAP", target=0),
])
def test_gate_invariants(kwargs):
    with pytest.raises(StructuralError):
        Gate(**kwargs)


def test_circuit_invariants():
    with pytest.raises(StructuralError):
        Circuit(2, (Gate("RY", 0, param=1),), 1)
    with pytest.raises(StructuralError):
        Circuit(2, (Gate("X", 2),))


def test_state_length_must_be_power_of_two():
    with pytest.raises(StructuralError):
        StateVector(np.ones(3))


def test_gates_match_dense_matrices():
    rng = np.random.default_rng(7)
    n = 4
    for _ in range(200):
        c = random_circuit(rng, n, 1, max_controls=3, parameterized=False)
        g = c.gates[0]
        psi = random_state(rng, n)
        expected = dense_gate(g, n, g.angle or 0.0) @ psi.amplitudes
        np.testing.assert_allclose(apply_gate(psi, g).amplitudes, expected, atol=1e-14)


def test_norm_preserved_random_circuits():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        c = random_circuit(rng, n, int(rng.integers(1, 40)))
        s = run_circuit(c, rng.uniform(-np.pi, np.pi, c.n_params), random_state(rng, n))
        worst = max(worst, abs(s.norm() - 1))
    assert worst <= 1e-10


def test_control_correctness_exact():
    rng = np.random.default_rng(5)
    n = 5
    for _ in range(200):
        c = random_circuit(rng, n, 1, max_controls=3, parameterized=False)
        g = c.gates[0]
        if not g.controls:
            continue
        blocked = [i for i in range(1 << n) if not all((i >> q) & 1 for q in g.controls)]
        i = int(rng.choice(blocked))
        s = apply_gate(basis_state(n, i), g)
        np.testing.assert_array_equal(s.amplitudes, basis_state(n, i).amplitudes)


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_rotation_composition(a, b):
    rng = np.random.default_rng(0)
    psi = random_state(rng, 3)
    two = apply_gate(apply_gate(psi.copy(), Gate("RX", 1, angle=a)), Gate("RX", 1, angle=b))
    one = apply_gate(psi.copy(), Gate("RX", 1, angle=a + b))
    np.testing.assert_allclose(two.amplitudes, one.amplitudes, rtol=0, atol=1e-12)


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1), st.integers(0, (1 << n) - 1))))
def test_little_endian_x(args):
    n, q, i = args
    s = apply_gate(basis_state(n, i), Gate("X", q))
    assert np.flatnonzero(s.amplitudes).tolist() == [i ^ (1 << q)]


def test_expectation_is_mass_difference():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        s = random_state(rng, n)
        q = int(rng.integers(n))
        p1 = s.probabilities()[[(i >> q) & 1 == 1 for i in range(1 << n)]].sum()
        e = expectation_z(s, q)
        assert -1 <= e <= 1
        assert e == pytest.approx(1 - 2 * p1, abs=1e-12)


def test_expectation_is_read_only():
    rng = np.random.default_rng(4)
    s = random_state(rng, 4)
    before = s.amplitudes.copy()
    expectation_z(s, 2)
    np.testing.assert_array_equal(s.amplitudes, before)
