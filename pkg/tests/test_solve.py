from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

from borderlab.decomp import verify_numeric
from borderlab.solve import (
    LMConfig,
    SolveResult,
    TightProblem,
    TightWeights,
    assemble_decomposition,
    equation_count,
    equations,
    is_standard_tight,
    isolation,
    jacobian_check,
    lm_solve,
    multistart,
    params_from_decomposition,
    residual_vs_expansion,
    search_min_equations,
    sparsify,
    weights_from_decomposition,
    weights_from_lp,
)
from borderlab.tensor import Tensor3, catalog

UNIT2_W = TightWeights.make((0, 1), (0, 1), (0, -2))


def brute_min_equations(T: Tensor3, box: int = 3) -> int:
    """Smallest equation count over injective integer weights in a box (c fixed by a + b)."""
    a_dim, b_dim, c_dim = T.dims
    best = None
    for wa in itertools.product(range(-box, box + 1), repeat=a_dim):
        for wb in itertools.product(range(-box, box + 1), repeat=b_dim):
            wc = [None] * c_dim
            ok = True
            for (i, j, k) in T.support:
                v = -(wa[i] + wb[j])
                if wc[k] is not None and wc[k] != v:
                    ok = False
                    break
                wc[k] = v
            if not ok or None in wc:
                continue
            w = TightWeights.make(wa, wb, wc)
            if w.is_injective():
                n = equation_count(w)
                best = n if best is None else min(best, n)
    return best


# -- weights -------------------------------------------------------------------


def test_equation_count_matches_enumeration():
    w = TightWeights.make((0, 2, -1), (1, -3), (0, 1, 2, -2))
    expect = sum(1 for i in range(3) for j in range(2) for k in range(4)
                 if w.omega_A[i] + w.omega_B[j] + w.omega_C[k] <= 0)
    assert equation_count(w) == expect
    s = TightWeights.symmetric_weights((0, 1, -2))
    expect_sym = sum(1 for t in itertools.combinations_with_replacement(range(3), 3) if s.total(*t) <= 0)
    assert equation_count(s) == expect_sym


def test_standard_tightness_and_shift():
    T = catalog("unit", 2)
    assert is_standard_tight(T, UNIT2_W)
    assert is_standard_tight(T, UNIT2_W.shifted(1, 2, -3))
    assert not is_standard_tight(T, UNIT2_W.shifted(1, 0, 0))
    assert not is_standard_tight(T, TightWeights.make((0, 0), (0, 1), (0, -2)))
    with pytest.raises(ValueError):
        is_standard_tight(catalog("unit", 3), UNIT2_W)
    assert TightWeights.from_json(json.loads(json.dumps(UNIT2_W.to_json()))) == UNIT2_W


def test_weights_from_lp_honours_constraints():
    T = catalog("det", 3)
    w = weights_from_lp(T.support, [], [], T.dims)
    assert w is not None and is_standard_tight(T, w)
    # sign constraints read off w itself are feasible, and must be honoured
    off = [t for t in itertools.product(range(9), repeat=3) if t not in set(T.support)]
    le = [t for t in off if w.total(*t) <= 0][:6]
    gt = [t for t in off if w.total(*t) > 0][:6]
    w2 = weights_from_lp(T.support, le, gt, T.dims)
    assert w2 is not None and is_standard_tight(T, w2)
    assert all(w2.total(*t) <= 0 for t in le) and all(w2.total(*t) >= 1 for t in gt)
    # contradictory constraints are infeasible
    assert weights_from_lp(T.support, le[:1], le[:1], T.dims) is None
    # a support triple can never be strictly positive
    assert weights_from_lp(T.support, [], [T.support[0]], T.dims) is None


def test_cw_has_no_tight_weights():
    assert search_min_equations(catalog("cw", 2)) == (None, 0, True)


def test_search_is_optimal_on_small_tensor():
    T = catalog("unit", 2)
    w, n, complete = search_min_equations(T, symmetric=False)
    assert complete and is_standard_tight(T, w) and equation_count(w) == n
    assert n <= brute_min_equations(T)
    # never beats the obvious lower bound: every support triple is an equation
    assert n >= len(T.support)


def test_search_time_limit_reports_incomplete():
    T = catalog("det", 3)
    w, n, complete = search_min_equations(T, time_limit=0.0)
    assert not complete
    assert w is None or is_standard_tight(T, w)


# -- equations -----------------------------------------------------------------


def test_equations_select_nonpositive_triples():
    T = catalog("unit", 2)
    P = equations(T, UNIT2_W, 2)
    assert P.n_equations == equation_count(UNIT2_W)
    for (i, j, k), v in zip(P.eqs, P.target):
        assert UNIT2_W.total(i, j, k) <= 0
        assert v == T[(int(i), int(j), int(k))]
    with pytest.raises(ValueError):
        equations(T, UNIT2_W.shifted(1, 0, 0), 2)
    with pytest.raises(ValueError):
        equations(catalog("matmul", 2), None, 7, symmetric=True)


def test_problem_json_roundtrip():
    P = equations(catalog("unit", 2), UNIT2_W, 2)
    Q = TightProblem.from_json(json.loads(json.dumps(P.to_json())))
    assert Q.dims == P.dims and Q.r == P.r and Q.weights == P.weights
    assert np.array_equal(Q.eqs, P.eqs) and np.array_equal(Q.target, P.target)


@pytest.mark.parametrize("symmetric", [False, True])
def test_analytic_jacobian(symmetric):
    T = catalog("unit", 3) if not symmetric else catalog("det", 3)
    P = equations(T, None, 3, symmetric=symmetric)
    assert jacobian_check(P, points=10) < 1e-6


def test_residual_is_the_trilinear_form():
    P = equations(catalog("unit", 2), None, 2, symmetric=False)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(P.n_params) + 1j * rng.standard_normal(P.n_params)
    A, B, C = P.split(x)
    full = np.einsum("si,sj,sk->ijk", A, B, C)
    expect = np.array([full[tuple(t)] for t in P.eqs]) - P.target
    assert np.allclose(P.residual(x), expect)


# -- solving -------------------------------------------------------------------


def _planted(seed, r=3, dims=(3, 3, 3)):
    rng = np.random.default_rng(seed)
    A, B, C = (rng.standard_normal((r, d)) + 1j * rng.standard_normal((r, d)) for d in dims)
    full = np.einsum("si,sj,sk->ijk", A, B, C)
    eqs = np.array(list(itertools.product(*map(range, dims))), dtype=np.int64)
    P = TightProblem(dims, r, False, eqs, full[eqs[:, 0], eqs[:, 1], eqs[:, 2]])
    return P, np.concatenate([A.ravel(), B.ravel(), C.ravel()])


@pytest.mark.parametrize("seed", range(3))
def test_lm_recovers_planted_solution(seed):
    P, x_true = _planted(seed)
    assert np.linalg.norm(P.residual(x_true)) < 1e-12
    rng = np.random.default_rng(seed + 50)
    x0 = x_true + 1e-2 * (rng.standard_normal(x_true.size) + 1j * rng.standard_normal(x_true.size))
    res = lm_solve(P, x0=x0)
    assert res.converged and res.residual_norm < 1e-12
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_multistart_and_isolation_on_unit_tensor():
    P = equations(catalog("unit", 2), None, 2, symmetric=False)
    best, runs = multistart(P, starts=8, seed=0)
    assert best.converged and best.residual_norm < 1e-10
    assert best is min(runs, key=lambda r: r.residual_norm)
    res = isolation(P, best)
    # two points in C^2 (x) C^2 (x) C^2: only the per-term rescalings move the solution
    assert res.n_free == 12 and res.jacobian_rank == 12 - P.gauge_dim
    assert res.isolated
    back = SolveResult.from_json(json.loads(json.dumps(res.to_json())))
    assert np.allclose(back.params, res.params) and back.isolated == res.isolated


def test_lm_never_raises_on_unsolvable_problem():
    # unit:3 has rank 3, so two terms cannot reach it
    P = equations(catalog("unit", 3), None, 2, symmetric=False)
    res = lm_solve(P, LMConfig(max_iter=50), seed=1)
    assert not res.converged and res.residual_norm > 1e-3
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_fixed_parameters_stay_put():
    P, x_true = _planted(4)
    res = lm_solve(P, x0=x_true, fixed={0: x_true[0], 5: x_true[5]})
    assert res.params[0] == x_true[0] and res.params[5] == x_true[5]


def test_sparsify_removes_the_gauge():
    P = equations(catalog("unit", 2), None, 2, symmetric=False)
    best, _ = multistart(P, starts=8, seed=0)
    sp = sparsify(P, best)
    assert sp.residual_norm < 1e-8
    assert sp.jacobian_rank == sp.n_free and sp.message == "isolated"
    assert len(sp.fixed) >= P.gauge_dim
    assert all(v in (0, 1, -1, 1j, -1j) for v in sp.fixed.values())


# -- back to decompositions ----------------------------------------------------


def test_assembled_decomposition_verifies():
    T = catalog("unit", 2)
    P = equations(T, None, 2, symmetric=False)
    best, _ = multistart(P, starts=8, seed=0)
    D = assemble_decomposition(None, best, P)
    rep = verify_numeric(D, T, digits=30, tol=1e-8)
    assert rep.passed


def test_tight_form_roundtrip_through_laurent_expansion():
    T = catalog("unit", 2)
    P = equations(T, UNIT2_W, 2)
    # the plain rank decomposition solves the reduced system exactly
    x = np.zeros(P.n_params, dtype=np.complex128)
    A, B, C = P.split(x)
    for s in range(2):
        x[s * 2 + s] = x[4 + s * 2 + s] = x[8 + s * 2 + s] = 1
    assert np.linalg.norm(P.residual(x)) == 0
    # a random perturbation keeps the two expansion pipelines in agreement
    rng = np.random.default_rng(2)
    y = x + 0.3 * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    D = assemble_decomposition(UNIT2_W, y, P)
    assert weights_from_decomposition(D) == UNIT2_W
    assert np.allclose(params_from_decomposition(D, P), y)
    assert residual_vs_expansion(D, P, T) < 1e-12
    with pytest.raises(ValueError):
        params_from_decomposition(D, equations(T, None, 3, symmetric=False))
