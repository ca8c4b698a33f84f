"""Both kernel backends must agree; the numpy path is the env-flag fallback."""
import os
import subprocess
import sys

import numpy as np
import pytest

from helpers import random_circuit, random_state
from qmoe import kernels
from qmoe.grad import adjoint_gradient
from qmoe.qsim import expectation_z_many, run_circuit

needs_numba = pytest.mark.skipif("numba" not in kernels.available_backends(), reason="numba unavailable")


@needs_numba
def test_backends_agree_on_random_circuits():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        c = random_circuit(rng, n, 30, max_controls=3)
        p = rng.uniform(-np.pi, np.pi, c.n_params)
        psi = random_state(rng, n)
        a = run_circuit(c, p, psi.copy(), backend="numba")
        b = run_circuit(c, p, psi.copy(), backend="numpy")
        np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-13)
        qs = list(range(n))
        np.testing.assert_allclose(expectation_z_many(a, qs, backend="numba"),
                                   expectation_z_many(b, qs, backend="numpy"), atol=1e-13)


@needs_numba
def test_backends_agree_on_adjoint():
    rng = np.random.default_rng(12)
    for _ in range(30):
        n = int(rng.integers(2, 8))
        c = random_circuit(rng, n, 25)
        p = rng.uniform(-np.pi, np.pi, c.n_params)
        psi = random_state(rng, n)
        w = rng.standard_normal(2)
        qs = [0, n - 1]
        _, ga = adjoint_gradient(c, p, psi, qs, w, backend="numba")
        _, gb = adjoint_gradient(c, p, psi, qs, w, backend="numpy")
        np.testing.assert_allclose(ga, gb, atol=1e-12)


def test_unknown_backend():
    from qmoe.errors import ConfigError
    with pytest.raises(ConfigError):
        kernels.get_backend("cuda")


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_default(flag, expected):
    if expected == "numba" and "numba" not in kernels.available_backends():
        pytest.skip("numba unavailable")
    env = {**os.environ, "QMOE_DISABLE_NUMBA": flag}
    out = subprocess.run([sys.executable, "-c", "from qmoe import kernels; print(kernels.DEFAULT_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
