from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from borderlab import _kernels


def _backend_in_subprocess(flag: str) -> str:
    env = dict(os.environ, BORDERLAB_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from borderlab import _kernels; print(_kernels.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_backend():
    assert _backend_in_subprocess("0") == "numpy"
    assert _backend_in_subprocess("1") == "numba"


def _random_problem(seed, r=4, dims=(3, 4, 5), n_eq=40):
    rng = np.random.default_rng(seed)
    A, B, C = (rng.standard_normal((r, d)) + 1j * rng.standard_normal((r, d)) for d in dims)
    eqs = np.stack([rng.integers(0, d, n_eq) for d in dims], axis=1)
    target = rng.standard_normal(n_eq) + 0j
    return A, B, C, eqs, target


@pytest.mark.parametrize("seed", range(3))
def test_residual_matches_einsum(seed):
    A, B, C, eqs, target = _random_problem(seed)
    full = np.einsum("si,sj,sk->ijk", A, B, C)
    expect = full[eqs[:, 0], eqs[:, 1], eqs[:, 2]] - target
    for backend in ("numpy", "numba"):
        got = _kernels.trilinear_residual(A, B, C, eqs, target, backend=backend)
        assert np.allclose(got, expect, atol=1e-12)


@pytest.mark.parametrize("symmetric", [False, True])
def test_jacobian_backends_agree(symmetric):
    A, B, C, eqs, target = _random_problem(7, dims=(4, 4, 4))
    if symmetric:
        B = C = A
    ref = _kernels.trilinear_jacobian(A, B, C, eqs, symmetric, backend="numpy")
    got = _kernels.trilinear_jacobian(A, B, C, eqs, symmetric, backend="numba")
    assert ref.shape == got.shape
    assert np.allclose(ref, got, rtol=0, atol=1e-13)


def test_set_threads_is_safe():
    _kernels.set_threads(1)
    _kernels.set_threads(None)
