"""Acceptance suite: one test (or a small group) per criterion.

Every criterion prints one ``[PASS]``/``[FAIL]`` line with the observed
value and the tolerance it was held to; the lines are repeated in the
pytest terminal summary.  Expected values are pinned here, independently
of the shipped reproduction manifest.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from borderlab import apolarity as ap
from borderlab.decomp import BUILTIN_NAMES, builtin, expand, omega_bound, verify_exact, verify_numeric
from borderlab.koszul import lower_bound
from borderlab.scalar import to_complex
from borderlab.solve import (
    equations,
    is_standard_tight,
    jacobian_check,
    laurent_residuals,
    lm_solve,
    multistart,
    params_from_decomposition,
    residual_vs_expansion,
    sparsify,
    weights_from_decomposition,
)
from borderlab.tensor import Tensor3, catalog, from_spec, kron_power

# ---------------------------------------------------------------------------
# 1. Koszul-flattening bounds (exact integers, wall-clock limits)

KOSZUL_ROWS = [
    ("skewcw:4", 2, 2, 39, 60),
    ("skewcw:4", 2, 3, 39, 300),
    ("skewcw:6", 2, 2, 70, 300),
    ("skewcw:2", 3, 4, 49, 1800),
]


@pytest.mark.parametrize("spec,power,p,expected,limit", KOSZUL_ROWS)
def test_ac1_koszul_bounds(record, spec, power, p, expected, limit):
    t0 = time.perf_counter()
    kb = lower_bound(from_spec(spec, power), "A", p, seeds=[0, 1, 2])
    dt = time.perf_counter() - t0
    ok = kb.bound == expected and dt < limit
    record(f"AC1 koszul {spec}^{power} p={p}", ok,
           f"bound {kb.bound} (expected {expected}, exact), {dt:.2f}s (limit {limit}s)")
    assert kb.bound == expected
    assert dt < limit


# ---------------------------------------------------------------------------
# 2. Exact verification of the cw and skewcw families


def test_ac2_exact_families(record):
    t0 = time.perf_counter()
    bad = []
    for q in range(2, 11):
        r = verify_exact(builtin(f"cw:{q}"), catalog("cw", q))
        if not (r.passed and r.terms == q + 2):
            bad.append(f"cw:{q}")
    for q in (2, 4, 6, 8, 10):
        r = verify_exact(builtin(f"skewcw:{q}"), catalog("skewcw", q))
        if not (r.passed and r.terms == 3 * q // 2 + 2):
            bad.append(f"skewcw:{q}")
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    record("AC2 exact cw q=2..10, skewcw q=2..10 even", ok,
           f"failures {bad or 'none'} (exact zero residual), {dt:.2f}s (limit 60s)")
    assert not bad
    assert dt < 60


# ---------------------------------------------------------------------------
# 3. det3 Waring border decomposition, 60 digits


def test_ac3_det3(record):
    t0 = time.perf_counter()
    D = builtin("det3-17", 60)
    rep = verify_numeric(D, catalog("det", 3), digits=60, tol=1e-40)
    dt = time.perf_counter() - t0
    ok = rep.passed and rep.terms == 17 and rep.max_error <= 1e-40 and dt < 60
    negs = ", ".join(f"t^{e}: {v:.1e}" for e, v in sorted(rep.negative_residuals.items()))
    record("AC3 det3 17 terms @60 digits", ok,
           f"max error {rep.max_error:.2e} <= 1e-40; scale {rep.scale}, permutation {rep.permutation}; "
           f"t^0 {rep.t0_max:.1e}; {negs}; {dt:.2f}s")
    assert rep.terms == 17
    assert rep.negative_residuals, "negative-exponent residuals must be reported"
    assert rep.max_error <= 1e-40
    assert rep.passed
    assert dt < 60


# ---------------------------------------------------------------------------
# 4. 42-term decomposition of skewcw(4)^2


def test_ac4_skewcw4sq_42(record):
    t0 = time.perf_counter()
    D = builtin("skewcw4sq-42", 60)
    rep = verify_numeric(D, from_spec("skewcw:4", 2), digits=60, tol=1e-14)
    dt = time.perf_counter() - t0
    ok = rep.passed and rep.terms == 42 and rep.max_error <= 1e-14 and dt < 60
    record("AC4 skewcw4^2 42 terms", ok, f"max entrywise error {rep.max_error:.2e} <= 1e-14, {dt:.2f}s")
    assert rep.terms == 42
    assert rep.max_error <= 1e-14
    assert dt < 60


# ---------------------------------------------------------------------------
# 5. Apolarity fixtures


def test_ac5a_cw2_r4(record):
    # cw(2) in the monomial basis x^2, xy, y^2 (a torus-diagonal basis)
    T = catalog("cw2mono")
    cands = ap.torus_candidates(T, 4)
    passing = [E for E in cands if ap.test_210(T, E).passed and ap.test_120(T, E).passed]
    ok = len(passing) == 3
    record("AC5a cw2 r=4 torus-fixed (210)&(120)", ok, f"{len(passing)} of {len(cands)} pass (expected 3)")
    assert len(passing) == 3


def _perm3_candidate():
    P = catalog("perm", 3)
    d = 9

    def ix(i, ip):
        return 3 * (i - 1) + (ip - 1)

    def e(*pairs):
        v = {}
        for (a, b), (c, dd) in pairs:
            k = ix(a, b) * d + ix(c, dd)
            v[k] = v.get(k, 0) + 1
        return v

    extra = [
        e(((1, 1), (1, 1))),
        e(((1, 2), (1, 1)), ((1, 1), (1, 2))),
        e(((1, 3), (1, 1)), ((1, 1), (1, 3))),
        e(((2, 1), (1, 1)), ((1, 1), (2, 1))),
        e(((3, 1), (1, 1)), ((1, 1), (3, 1))),
        e(((1, 2), (1, 2))),
        e(((1, 3), (1, 2)), ((1, 2), (1, 3))),
    ]
    return P, ap.extend(P, extra)


def test_ac5b_perm3_dim7(record):
    P, E = _perm3_candidate()
    t210, t120 = ap.test_210(P, E, 16), ap.test_120(P, E, 16)
    ks = ap.kappa_split(P, E.complement)
    ok = t210.passed and t120.passed and ks.kappa_p == 8 and ks.kappa_p_prime == 8
    record("AC5b perm3 dim-7 candidate", ok,
           f"(210) kernel {t210.kernel_dim}, (120) kernel {t120.kernel_dim} (need >= 16); "
           f"kappa_p={ks.kappa_p}, kappa_p'={ks.kappa_p_prime} (expected 8, 8); "
           f"kappa_f={ks.kappa_f}, kappa_m={ks.kappa_m}")
    assert t210.passed and t120.passed
    assert (ks.kappa_p, ks.kappa_p_prime) == (8, 8)


def test_ac5c_staircase(record):
    st = ap.CandidateSpace((1, 1, 0), (27, 27),
                           [ap.unit(i, j, 27) for i in range(6) for j in range(6) if i + j <= 5])
    prof, bound = ap.cartan_bound(st, "B")
    pure = ap.pure_kernel(st, 0)
    ok = bound == 56 and pure == 56
    record("AC5c staircase cartan/pure bound", ok, f"cartan bound {bound}, pure kernel {pure} (expected 56)")
    assert bound == 56
    assert pure == 56


def test_ac5d_weak_m9(record):
    E = ap.weak_candidate(9, 18)
    two = [t(None, x) for x in E for t in (ap.test_210, ap.test_120)]
    t111 = ap.test_111(*E)
    ok = all(t.passed for t in two) and t111.passed and t111.kernel_dim >= 28
    record("AC5d weak candidate m=9 r=18", ok,
           f"(210)/(120) kernels {[t.kernel_dim for t in two]} (need >= 18); "
           f"(111) dimension {t111.kernel_dim} (need >= 28)")
    assert all(t.passed for t in two)
    assert t111.passed and t111.kernel_dim >= 28


# ---------------------------------------------------------------------------
# 6. skewcw(4) at r = 7: no triple passes


def test_ac6_skewcw4_r7_search(record):
    t0 = time.perf_counter()
    rep = ap.search_lower_bound(catalog("skewcw", 4), 7, classes={0: "L"})
    dt = time.perf_counter() - t0
    ok = not rep.triples_passing and not rep.undecided and dt < 1800
    record("AC6 skewcw4 r=7 search", ok,
           f"{rep.triples_tested} triples tested, {len(rep.triples_passing)} pass, {len(rep.undecided)} undecided; "
           f"candidates {rep.counts}; coverage {rep.coverage}; {dt:.2f}s (limit 1800s)")
    assert rep.triples_tested > 0
    assert not rep.triples_passing
    assert not rep.undecided
    assert dt < 1800


# ---------------------------------------------------------------------------
# 7. Minimum-rank certificates


def test_ac7_minrank(record):
    eb = ap.emptycor_bound(catalog("cw", 2), "C", 5)
    t0 = time.perf_counter()
    eb2 = ap.emptycor_bound(from_spec("cw:2", 2), "C", 3)
    dt = time.perf_counter() - t0
    ok = (eb.rho, eb.bound) == (2, 4) and eb2.certificate.complete and eb2.certificate.points == 9841 and dt < 60
    record("AC7 min-rank certificates", ok,
           f"cw2/F5: rho {eb.rho}, bound {eb.bound} (expected 2, 4); "
           f"cw2^2/F3: {eb2.certificate.points} points in {dt:.2f}s (limit 60s), rho {eb2.rho}, "
           f"bound m+rho-1 = {eb2.bound}; note: 3^k+2^k = 13 is not certified here "
           f"(needs rho >= 5), and at k=1 it reads 5 > 4 = border rank of cw2")
    assert (eb.rho, eb.bound) == (2, 4)
    assert eb2.certificate.complete and eb2.certificate.points == 9841
    assert eb2.bound == eb2.m + eb2.rho - 1
    assert dt < 60


# ---------------------------------------------------------------------------
# 8. Tight weights and the reduced equation system


def test_ac8_tight_weights(record):
    D = builtin("det3-17", 30)
    w = weights_from_decomposition(D)
    Tdet = catalog("det", 3)
    det_ok = is_standard_tight(Tdet, w) and list(w.omega_A) == [-5, -4, -3, -1, 0, 1, 3, 4, 5]

    D42 = builtin("skewcw4sq-42", 30)
    T42 = kron_power(catalog("skewcw", 4), 2)
    w42 = weights_from_decomposition(D42)
    P = equations(T42, w42, 42, symmetric=True)
    res = float(np.linalg.norm(P.residual(params_from_decomposition(D42, P))))
    ok = det_ok and is_standard_tight(T42, w42) and P.n_equations == 692 and res <= 1e-13
    record("AC8 tight weights / 692 equations", ok,
           f"det3 weights tight: {det_ok}; skewcw4^2 r=42 symmetric: {P.n_equations} equations "
           f"(expected 692, multiset convention), {P.n_params} parameters; "
           f"residual at the shipped parameters {res:.2e} <= 1e-13")
    assert det_ok
    assert P.n_equations == 692
    assert res <= 1e-13


# ---------------------------------------------------------------------------
# 9. Solver properties


def _planted(rng, zero_frac=0.0, r=3, n=3, real=False):
    F = []
    for _ in range(3):
        M = rng.standard_normal((r, n)) if real else rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n))
        F.append(M)
    masks = [rng.random((r, n)) < zero_frac for _ in range(3)]
    for M, m in zip(F, masks):
        M[m] = 0
    X = np.einsum("si,sj,sk->ijk", *F)
    T = Tensor3((n, n, n), {idx: complex(X[idx]) for idx in itertools.product(range(n), repeat=3)})
    return T, F, masks


def _rank_one(F, s):
    return np.einsum("i,j,k->ijk", F[0][s], F[1][s], F[2][s])


def test_ac9_planted_recovery(record):
    hits = []
    for seed in range(20):
        T, _, _ = _planted(np.random.default_rng(seed))
        P = equations(T, None, 3, symmetric=False)
        res = lm_solve(P, seed=seed)
        hits.append(res.residual_norm < 1e-10)
    ok = sum(hits) >= 1
    record("AC9a planted rank-3 recovery (3,3,3)", ok, f"{sum(hits)}/20 seeds reach residual < 1e-10 (need >= 1)")
    assert ok


def test_ac9_jacobian(record):
    T, _, _ = _planted(np.random.default_rng(0))
    P = equations(T, None, 3, symmetric=False)
    err = jacobian_check(P, points=100, seed=0)
    ok = err <= 1e-6
    record("AC9b Jacobian vs central differences", ok, f"max relative deviation {err:.2e} <= 1e-6 on 100 points")
    assert ok


def test_ac9_sparsify(record):
    planted = recovered = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        T, F, masks = _planted(rng, zero_frac=0.2, real=True)
        P = equations(T, None, 3, symmetric=False)
        best, _ = multistart(P, 20, seed * 100)
        out = sparsify(P, best)
        A, B, C = P.split(out.params)
        G = [A, B, C]
        # match planted to recovered terms by their (gauge-invariant) rank-one tensors
        perm = min(itertools.permutations(range(3)),
                   key=lambda pi: sum(np.linalg.norm(_rank_one(F, s) - _rank_one(G, pi[s])) for s in range(3)))
        r, m = 3, 3
        for f in range(3):
            for s, i in zip(*np.nonzero(masks[f])):
                planted += 1
                idx = f * r * m + perm[s] * m + i
                if idx in out.fixed and out.fixed[idx] == 0:
                    recovered += 1
    frac = recovered / planted
    ok = frac >= 0.8
    record("AC9c sparsify planted zeros", ok, f"{recovered}/{planted} = {frac:.1%} recovered over 20 seeds (need >= 80%)")
    assert ok


# ---------------------------------------------------------------------------
# 10. exponent calculator


def test_ac10_omega(record):
    w = omega_bound(8, 1, 10)
    worst = max(abs(omega_bound(q, 3, 27 * q ** 3 / 4) - 3) for q in range(2, 11))
    ok = 2.40 <= w <= 2.41 and worst <= 1e-9
    record("AC10 omega calculator", ok, f"omega_bound(8,1,10) = {w:.6f} in [2.40, 2.41]; identity error {worst:.1e} <= 1e-9")
    assert 2.40 <= w <= 2.41
    assert worst <= 1e-9


# ---------------------------------------------------------------------------
# 11. two independent expansion paths agree on every built-in decomposition


def _builtin_cases():
    for q in range(2, 11):
        yield f"cw:{q}", catalog("cw", q)
    for q in (2, 4, 6, 8, 10):
        yield f"skewcw:{q}", catalog("skewcw", q)
    yield "skewcw2-rank5", catalog("skewcw", 2)
    yield "det3-17", catalog("det", 3)
    yield "skewcw4sq-42", kron_power(catalog("skewcw", 4), 2)


def _expand_gap(D, T):
    """Largest entrywise gap between the dense einsum residuals and the sparse Laurent expansion."""
    L = laurent_residuals(D, T)
    E = expand(D, max_exp=0)
    worst = 0.0
    for e in set(L) | set(E):
        dense = L.get(e, np.zeros(T.dims, dtype=np.complex128)).copy()
        for idx, c in E.get(e, {}).items():
            dense[idx] -= complex(to_complex(c))
        if e == 0:
            for idx, v in T.items():
                dense[idx] += complex(v)
        worst = max(worst, float(np.max(np.abs(dense))))
    return worst


def test_ac11_cross_module_oracle(record):
    assert {"cw:q", "skewcw:q", "det3-17", "skewcw4sq-42", "skewcw2-rank5"} == set(BUILTIN_NAMES)
    gaps = {}
    for name, T in _builtin_cases():
        D = builtin(name, 30)
        gap = _expand_gap(D, T)
        try:
            w = weights_from_decomposition(D)
        except ValueError:
            w = None  # not in tight form: only the expansion comparison applies
        if w is not None:
            # all-zero weights: a constant (ordinary rank) decomposition, every triple is an equation
            constant = not any(w.omega_A + w.omega_B + w.omega_C)
            P = equations(T, None if constant else w, D.rank, symmetric=D.symmetric)
            gap = max(gap, residual_vs_expansion(D, P, T))
        gaps[name] = gap
    worst = max(gaps.values())
    ok = worst <= 1e-12
    record("AC11 cross-module oracle", ok,
           f"{len(gaps)} built-ins, max entrywise gap {worst:.1e} <= 1e-12")
    assert ok, gaps
