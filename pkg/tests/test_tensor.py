from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from sympy.combinatorics import Permutation
from hypothesis import given, settings
from hypothesis import strategies as st

from borderlab.tensor import (
    CATALOG_NAMES,
    Tensor3,
    catalog,
    from_spec,
    is_1generic,
    is_concise,
    kron_power,
    kronecker,
    slice_space,
    torus_lattice,
)


def dense(T: Tensor3) -> np.ndarray:
    return T.to_dense(dtype=np.int64)


small_arrays = st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)).flatmap(
    lambda d: st.lists(st.integers(-2, 2), min_size=d[0] * d[1] * d[2], max_size=d[0] * d[1] * d[2]).map(
        lambda xs: np.array(xs, dtype=np.int64).reshape(d)))


def test_cw_matches_definition():
    for q in (1, 2, 5):
        X = np.zeros((q + 1,) * 3, dtype=np.int64)
        for j in range(1, q + 1):
            X[0, j, j] = X[j, 0, j] = X[j, j, 0] = 1
        assert np.array_equal(dense(catalog("cw", q)), X)


@pytest.mark.parametrize("q", [2, 4, 6])
def test_skewcw_is_alternating(q):
    T = catalog("skewcw", q)
    X = dense(T)
    assert np.array_equal(np.transpose(X, (1, 0, 2)), -X)
    assert np.array_equal(np.transpose(X, (0, 2, 1)), -X)
    assert np.array_equal(np.transpose(X, (1, 2, 0)), X)
    assert T.nnz == 3 * q


def test_skewcw2_is_levi_civita():
    assert catalog("skewcw", 2) == catalog("eps3")
    X = dense(catalog("eps3"))
    for p in itertools.permutations(range(3)):
        assert X[p] == Permutation(list(p)).signature()
    with pytest.raises(ValueError):
        catalog("skewcw", 3)


def _eval_cubic(T: Tensor3, x):
    return sum(v * x[i] * x[j] * x[k] for (i, j, k), v in T.items())


@pytest.mark.parametrize("seed", range(3))
def test_polynomial_tensors_evaluate_to_det_and_perm(seed):
    rng = np.random.default_rng(seed)
    X = sympy.Matrix(3, 3, [int(v) for v in rng.integers(-4, 5, 9)])
    x = [X[i, j] for i in range(3) for j in range(3)]
    assert _eval_cubic(catalog("det_poly", 3), x) == X.det()
    assert _eval_cubic(catalog("perm_poly", 3), x) == X.per()
    # the Kronecker-square forms are 6x the polynomial tensors
    assert catalog("det", 3) == catalog("det_poly", 3).scale(6)
    assert catalog("perm", 3) == catalog("perm_poly", 3).scale(6)


def test_matmul_contracts_to_trace():
    rng = np.random.default_rng(1)
    l, m, n = 2, 3, 2
    X, Y, Z = rng.integers(-3, 4, (l, m)), rng.integers(-3, 4, (m, n)), rng.integers(-3, 4, (n, l))
    T = dense(catalog("matmul", l, m, n))
    val = np.einsum("abc,a,b,c->", T, X.reshape(-1), Y.reshape(-1), Z.reshape(-1))
    assert val == np.trace(X @ Y @ Z)


@settings(max_examples=40, deadline=None)
@given(small_arrays, small_arrays)
def test_kronecker_matches_numpy(X, Y):
    T = kronecker(Tensor3.from_dense(X), Tensor3.from_dense(Y))
    expect = np.einsum("ijk,abc->iajbkc", X, Y).reshape(
        X.shape[0] * Y.shape[0], X.shape[1] * Y.shape[1], X.shape[2] * Y.shape[2])
    assert T.dims == expect.shape
    assert np.array_equal(dense(T), expect)


def test_kron_power_and_spec():
    T = catalog("cw", 2)
    assert kron_power(T, 2) == kronecker(T, T)
    assert from_spec("cw:2", 3) == kronecker(kronecker(T, T), T)
    assert from_spec("matmul:2") == catalog("matmul", 2, 2, 2)
    assert from_spec("unit:4").nnz == 4
    with pytest.raises(ValueError):
        from_spec("nosuch:1")
    with pytest.raises(ValueError):
        kron_power(T, 0)
    assert "cw" in CATALOG_NAMES


@settings(max_examples=30, deadline=None)
@given(small_arrays)
def test_json_roundtrip(X):
    T = Tensor3.from_dense(X)
    assert Tensor3.from_json(T.to_json()) == T


@given(small_arrays)
def test_permute_factors(X):
    T = Tensor3.from_dense(X)
    assert np.array_equal(dense(T.permute_factors((2, 0, 1))), np.transpose(X, (2, 0, 1)))


def test_slice_space_and_conciseness():
    S = slice_space(catalog("cw", 2), "C")
    assert S.dim == 3 and S.dims == (3, 3)
    assert is_concise(catalog("cw", 2)) == (True, True, True)
    # a0 b0 c0 + a1 b0 c1: b1 never occurs
    degenerate = Tensor3((2, 2, 2), {(0, 0, 0): 1, (1, 0, 1): 1})
    assert is_concise(degenerate) == (True, False, True)
    assert slice_space(degenerate, "B").dim == 1
    assert is_1generic(catalog("unit", 3), "A")
    assert is_1generic(catalog("matmul", 2), "A")
    assert not is_1generic(degenerate, "A")


@pytest.mark.parametrize("T,rank", [(catalog("unit", 3), 6), (catalog("cw2mono"), 4), (catalog("cw", 2), 3)])
def test_torus_lattice(T, rank):
    W = torus_lattice(T)
    dA, dB, _ = T.dims
    assert len(W) == sum(T.dims)
    for (i, j, k) in T.support:
        for c in range(len(W[0])):
            assert W[i][c] + W[dA + j][c] + W[dA + dB + k][c] == 0
    M = sympy.Matrix([[Fraction(x) for x in row] for row in W])
    assert M.rank() == rank
