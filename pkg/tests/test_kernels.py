"""Compiled vs pure-python solver backends: parity, isolation, selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from harmflow import kernels


def _random_batch(rng, k=6, n=5):
    base = rng.normal(size=(k, n, n)) + 1j * rng.normal(size=(k, n, n))
    # diagonal dominance keeps every system comfortably nonsingular
    idx = np.arange(n)
    base[:, idx, idx] += 10.0
    shunts = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    rhs = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    return base, shunts, rhs


def test_python_backend_matches_numpy_solve():
    rng = np.random.default_rng(3)
    base, shunts, rhs = _random_batch(rng)
    with kernels.use_backend("python"):
        x, residual, info = kernels.solve_shunted_batch(base, shunts, rhs)
    assert not info.any()
    a = base.copy()
    idx = np.arange(base.shape[1])
    a[:, idx, idx] += shunts
    expect = np.linalg.solve(a, rhs[..., None])[..., 0]
    assert np.abs(x - expect).max() < 1e-10
    assert residual.max() < 1e-10


@pytest.mark.skipif("compiled" not in kernels.available_backends(),
                    reason="compiled extension not built")
def test_backends_agree():
    rng = np.random.default_rng(7)
    for _ in range(20):
        base, shunts, rhs = _random_batch(rng, k=4, n=6)
        with kernels.use_backend("python"):
            xp, rp, ip = kernels.solve_shunted_batch(base, shunts, rhs)
        with kernels.use_backend("compiled"):
            xc, rc, ic = kernels.solve_shunted_batch(base, shunts, rhs)
        assert np.array_equal(ip, ic)
        assert np.abs(xp - xc).max() < 1e-10
        assert np.abs(rp - rc).max() < 1e-10


def test_singular_system_isolated():
    rng = np.random.default_rng(11)
    base, shunts, rhs = _random_batch(rng, k=3, n=4)
    base[1] = 0.0
    shunts[1] = 0.0
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            x, residual, info = kernels.solve_shunted_batch(base, shunts, rhs)
        assert info[1] != 0 and info[0] == 0 and info[2] == 0
        assert np.all(x[1] == 0)
        assert residual[1] == np.inf
        # healthy systems in the same batch still solve
        assert residual[0] < 1e-10 and residual[2] < 1e-10


def test_shape_validation():
    good = np.eye(3, dtype=np.complex128)[None]
    vec = np.ones((1, 3), dtype=np.complex128)
    with pytest.raises(ValueError):
        kernels.solve_shunted_batch(np.ones((2, 3)), vec, vec)
    with pytest.raises(ValueError):
        kernels.solve_shunted_batch(good, np.ones((1, 4)), vec)
    with pytest.raises(ValueError):
        kernels.solve_shunted_batch(good, vec, np.ones((2, 3)))


def test_use_backend_restores_on_error():
    before = kernels.backend_name()
    with pytest.raises(RuntimeError):
        with kernels.use_backend("python"):
            raise RuntimeError("boom")
    assert kernels.backend_name() == before
    with pytest.raises(ValueError):
        with kernels.use_backend("fortran"):
            pass


def test_pure_python_env_override():
    env = dict(os.environ, HARMFLOW_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "from harmflow import kernels; print(kernels.backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_int_input_coerced():
    base = np.eye(2, dtype=int)[None] * 2
    shunts = np.zeros((1, 2), dtype=int)
    rhs = np.array([[4, 6]])
    x, residual, info = kernels.solve_shunted_batch(base, shunts, rhs)
    assert np.allclose(x, [[2.0, 3.0]])
    assert info[0] == 0
