"""Quantum mixture-of-experts classifier on a from-scratch statevector simulator."""
from .circuits import OperatorSet, RegisterLayout
from .errors import ConfigError, DataError, NumericError, ParseError, QMoEError, StructuralError
from .model import ModelParams, RunConfig, evaluate, forward, train
from .qsim import Circuit, Gate, StateVector, apply_gate, expectation_z, run_circuit, zero_state

__version__ = "0.1.0"
