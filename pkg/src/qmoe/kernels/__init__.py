"""Statevector kernel backends.

Two interchangeable implementations expose the same functions:

* ``numba`` -- jit-compiled loops over amplitude pairs (default)
* ``numpy`` -- vectorised fancy indexing, no compilation step

Set ``QMOE_DISABLE_NUMBA=1`` to make the numpy path the default, e.g. for
debugging or on platforms without numba. :func:`get_backend` returns either
explicitly, which is how the benchmark compares them in one process.
"""
import os
from types import ModuleType

from ..errors import ConfigError
from . import _numpy
from ._gatemath import RX, RY, RZ, H, X

KIND_CODES = {"RX": RX, "RY": RY, "RZ": RZ, "H": H, "X": X, "CNOT": X}

_DISABLE_NUMBA = os.environ.get("QMOE_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

_BACKENDS = {"numpy": _numpy}
if _numba is not None:
    _BACKENDS["numba"] = _numba

DEFAULT_BACKEND = "numpy" if (_DISABLE_NUMBA or _numba is None) else "numba"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        name = DEFAULT_BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ConfigError(f"unknown kernel backend {name!r}; have {available_backends()}") from None
