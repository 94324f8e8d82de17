"""Backend selection for the batched solver.

The compiled extension (harmflow._core, Cython over LAPACK zgesv) is
preferred; the numpy implementation in _core_py is the fallback when the
extension is missing or HARMFLOW_PURE_PYTHON is set. Both expose the same
solve_shunted_batch contract and are cross-checked in the test suite.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

from . import _core_py

try:
    from . import _core
except ImportError:
    _core = None

_BACKENDS = {"python": _core_py}
if _core is not None:
    _BACKENDS["compiled"] = _core

if os.environ.get("HARMFLOW_PURE_PYTHON"):
    _active = "python"
else:
    _active = "compiled" if _core is not None else "python"


def backend_name() -> str:
    """Which implementation solve_shunted_batch currently dispatches to."""
    return _active


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily force a backend (benchmarks and parity tests)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend '{name}', have {available_backends()}")
    previous = _active
    _active = name
    try:
        yield
    finally:
        _active = previous


def solve_shunted_batch(base, shunts, rhs):
    """Solve (base[k] + diag(shunts[k])) x[k] = rhs[k] for every k.

    base: (K, N, N); shunts, rhs: (K, N); complex128 (coerced). Returns
    (x, residual, info): residual[k] is the max-abs residual of system k
    and info[k] != 0 marks a singular factorization (x[k] zeroed).
    """
    base = np.ascontiguousarray(base, dtype=np.complex128)
    shunts = np.ascontiguousarray(shunts, dtype=np.complex128)
    rhs = np.ascontiguousarray(rhs, dtype=np.complex128)
    if base.ndim != 3 or base.shape[1] != base.shape[2]:
        raise ValueError(f"base must be (K, N, N), got {base.shape}")
    if shunts.shape != base.shape[:2] or rhs.shape != base.shape[:2]:
        raise ValueError(
            f"shunts/rhs must be {base.shape[:2]}, got {shunts.shape}/{rhs.shape}"
        )
    return _BACKENDS[_active].solve_shunted_batch(base, shunts, rhs)
