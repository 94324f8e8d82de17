"""Pure-python batched linear solver, the fallback for the compiled core.

Same contract as harmflow._core: factor nothing ahead of time, solve each
right-hand side against its own matrix, and report per-system residuals so
callers can enforce their tolerance. Singular systems are isolated (one
bad matrix must not poison the batch).
"""

from __future__ import annotations

import numpy as np


def solve_shunted_batch(base, shunts, rhs):
    """Solve (base[k] + diag(shunts[k])) x[k] = rhs[k] for every k.

    base: (K, N, N) complex128; shunts, rhs: (K, N) complex128.
    Returns (x (K, N), residual (K,) max-abs, info (K,) int32) where
    info[k] != 0 marks a singular system (x[k] zeroed, residual[k] inf).
    """
    a = np.array(base, dtype=np.complex128, copy=True)
    shunts = np.asarray(shunts, dtype=np.complex128)
    b = np.asarray(rhs, dtype=np.complex128)
    k, n = b.shape
    idx = np.arange(n)
    a[:, idx, idx] += shunts

    x = np.zeros_like(b)
    residual = np.full(k, np.inf)
    info = np.zeros(k, dtype=np.int32)
    try:
        x = np.linalg.solve(a, b[..., None])[..., 0]
        ok = np.ones(k, dtype=bool)
    except np.linalg.LinAlgError:
        ok = np.zeros(k, dtype=bool)
        for i in range(k):
            try:
                x[i] = np.linalg.solve(a[i], b[i])
                ok[i] = True
            except np.linalg.LinAlgError:
                info[i] = 1
    if ok.any():
        r = np.einsum("kij,kj->ki", a[ok], x[ok]) - b[ok]
        residual[ok] = np.abs(r).max(axis=1) if n else 0.0
    x[~ok] = 0
    return x, residual, info
