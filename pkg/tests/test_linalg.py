from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from borderlab import _kernels
from borderlab.linalg import (
    X,
    BudgetExceeded,
    TooManyParameters,
    certified_rank_modp,
    intersect,
    kernel_basis,
    min_rank_certificate,
    projective_point,
    projective_point_count,
    rank_bareiss,
    rank_exact,
    rank_modp,
    rank_parametric,
    rref,
    sparse_intersect,
    sparse_kernel_dim,
    sparse_rank,
    specialize,
)

int_matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: st.lists(st.lists(st.integers(-4, 4), min_size=s[1], max_size=s[1]), min_size=s[0], max_size=s[0]))


def low_rank(rng, m, n, r, lo=-3, hi=3):
    return rng.integers(lo, hi + 1, (m, r)) @ rng.integers(lo, hi + 1, (r, n))


# -- exact ---------------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(int_matrices)
def test_exact_ranks_match_sympy(M):
    r = sympy.Matrix(M).rank()
    assert rank_exact(M) == r
    assert rank_bareiss(M)[0] == r
    R, piv = rref(M)
    assert len(piv) == r
    assert sympy.Matrix(R) == sympy.Matrix(M).rref()[0]


@settings(max_examples=60, deadline=None)
@given(int_matrices)
def test_kernel_basis(M):
    K = kernel_basis(M)
    n = len(M[0])
    assert len(K) == n - sympy.Matrix(M).rank()
    for v in K:
        assert all(sum(Fraction(a) * b for a, b in zip(row, v)) == 0 for row in M)
    if K:
        assert sympy.Matrix(K).rank() == len(K)


def _to_sparse(rows):
    return [{i: Fraction(x) for i, x in enumerate(r) if x} for r in rows]


@settings(max_examples=60, deadline=None)
@given(int_matrices)
def test_sparse_rank_and_kernel(M):
    r = sympy.Matrix(M).rank()
    assert sparse_rank(_to_sparse(M)) == r
    # columns of M as sparse vectors: kernel of the column map has dim ncols - rank
    cols = _to_sparse(np.array(M).T.tolist())
    assert sparse_kernel_dim(cols) == len(cols) - r
    assert sparse_rank(_to_sparse(M), modulus=1000003) <= r


def test_intersections_match_sympy():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = 7
        U = rng.integers(-2, 3, (4, n)).tolist()
        V = rng.integers(-2, 3, (5, n)).tolist()
        # dim(U cap V) = dim U + dim V - dim(U + V)
        du, dv = sympy.Matrix(U).rank(), sympy.Matrix(V).rank()
        expect = du + dv - sympy.Matrix(U + V).rank()
        assert len(intersect([U, V], n)) == expect
        assert len(sparse_intersect([_to_sparse(U), _to_sparse(V)], n)) == expect
        for w in sparse_intersect([_to_sparse(U), _to_sparse(V)], n):
            vec = [w.get(i, 0) for i in range(n)]
            assert sympy.Matrix(U + [vec]).rank() == du
            assert sympy.Matrix(V + [vec]).rank() == dv


# -- modular -------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_modular_rank_agrees_with_exact(seed):
    rng = np.random.default_rng(seed)
    M = low_rank(rng, 30, 25, 11, -50, 50)
    cert = certified_rank_modp(M, seed=seed)
    assert cert.rank == rank_bareiss(M.tolist())[0] == 11
    assert cert.method == "mod-p"
    # rank mod p never exceeds the rational rank
    assert rank_modp(M, 3) <= 11


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_kernel_backends_rank(backend):
    if backend == "numba" and not _kernels.USE_NUMBA:
        pytest.skip("numba disabled")
    rng = np.random.default_rng(0)
    p = 2147483647
    for r in (0, 1, 7, 20):
        M = low_rank(rng, 20, 24, r) if r else np.zeros((20, 24), dtype=np.int64)
        assert _kernels.rank_mod_p(M, p, backend=backend) == sympy.Matrix(M).rank()
    with pytest.raises(ValueError):
        _kernels.rank_mod_p(M, 2**61 - 1)


def test_backends_agree_on_min_rank():
    basis = np.array([np.eye(3, dtype=np.int64), np.diag([1, 2, 0]), np.ones((3, 3), dtype=np.int64)])
    npts = projective_point_count(5, 3)
    ref = _kernels.min_rank_projective(basis, 5, 0, npts, backend="numpy")
    got = _kernels.min_rank_projective(basis, 5, 0, npts, backend="numba")
    assert ref == got


def test_projective_points_enumerate_each_line_once():
    p, d = 3, 3
    n = projective_point_count(p, d)
    assert n == (p**d - 1) // (p - 1)
    pts = [tuple(projective_point(i, d, p)) for i in range(n)]
    assert len(set(pts)) == n
    for v in pts:
        first = next(x for x in v if x)
        assert first == 1


def test_min_rank_certificate_oracle():
    # brute force over F_p^d minus 0
    rng = np.random.default_rng(4)
    p = 3
    basis = [low_rank(rng, 4, 4, 3) for _ in range(3)]
    brute = min(
        rank_modp(sum(c * B for c, B in zip(coeffs, basis)), p)
        for coeffs in itertools.product(range(p), repeat=3) if any(coeffs))
    cert = min_rank_certificate(basis, p)
    assert cert.rho == brute
    assert cert.complete and cert.points == projective_point_count(p, 3)
    w = sum(c * B for c, B in zip(cert.witness, basis))
    assert rank_modp(w, p) == cert.rho
    with pytest.raises(BudgetExceeded):
        min_rank_certificate(basis, p, budget=5)


# -- parametric ----------------------------------------------------------------


def test_parametric_rank_finds_exceptional_values():
    # [[x, 1], [1, x]] has rank 2 except at x = +-1
    M = [[X, 1], [1, X]]
    pr = rank_parametric(M)
    assert pr.generic_rank == 2 and pr.min_rank == 1
    for x0 in (1, -1):
        assert rank_exact(specialize(M, x0)) == 1
    assert rank_exact(specialize(M, 2)) == 2


def test_parametric_rank_irrational_roots():
    # rank drops at the roots of x^2 - 2, which are not rational
    M = [[X, 2, 0], [1, X, 0], [0, 0, X**2 - 2]]
    pr = rank_parametric(M)
    assert pr.generic_rank == 3 and pr.min_rank == 1
    assert any(r == 1 for _, r in pr.exceptional)


def test_parametric_rank_matches_sampling():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = low_rank(rng, 4, 5, 2)
        B = rng.integers(-2, 3, (4, 5))
        M = [[int(A[i, j]) * X + int(B[i, j]) for j in range(5)] for i in range(4)]
        pr = rank_parametric(M)
        samples = [rank_exact(specialize(M, x0)) for x0 in range(-6, 7)]
        assert pr.generic_rank == max(samples)
        assert pr.min_rank <= min(samples)


def test_parametric_rejects_two_parameters():
    from sympy import QQ
    from sympy.polys.rings import ring

    _, x, y = ring("x,y", QQ)
    with pytest.raises(TooManyParameters):
        rank_parametric([[x, y]])
