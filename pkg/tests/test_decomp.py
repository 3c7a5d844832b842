from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from borderlab.decomp import (
    BorderDecomposition,
    Term,
    builtin,
    expand,
    omega_bound,
    scale_match,
    verify_exact,
    verify_numeric,
)
from borderlab.scalar import Cyclotomic12, LaurentPoly, to_complex
from borderlab.tensor import Tensor3, catalog, from_spec


def evaluate_at(D: BorderDecomposition, t: Fraction) -> np.ndarray:
    """Sum of the terms at a rational t, straight from the definition."""
    out = np.zeros(D.dims, dtype=object)
    out[...] = Fraction(0)
    for term in D.terms:
        c = term.coeff.evaluate(t)
        a = [x.evaluate(t) for x in term.vecA]
        b = [x.evaluate(t) for x in term.vecB]
        cc = [x.evaluate(t) for x in term.vecC]
        out += c * np.einsum("i,j,k->ijk", np.array(a, dtype=object), np.array(b, dtype=object),
                             np.array(cc, dtype=object))
    return out


@pytest.mark.parametrize("name", ["cw:2", "cw:5", "skewcw:4", "skewcw2-rank5"])
@pytest.mark.parametrize("t", [Fraction(1, 3), Fraction(-2, 7)])
def test_expand_matches_evaluation(name, t):
    D = builtin(name)
    full = expand(D, max_exp=50)
    acc = np.zeros(D.dims, dtype=object)
    acc[...] = Fraction(0)
    for e, d in full.items():
        for key, v in d.items():
            acc[key] += v * t**e
    assert (acc == evaluate_at(D, t)).all()


def test_exact_families_and_failure_modes():
    for q in (2, 3, 7):
        assert verify_exact(builtin(f"cw:{q}"), catalog("cw", q)).passed
    r = verify_exact(builtin("skewcw2-rank5"), catalog("skewcw", 2))
    assert r.passed and r.terms == 5
    # dropping any term must break the decomposition
    D = builtin("cw:2")
    for s in range(D.rank):
        assert not verify_exact(D.drop_term(s), catalog("cw", 2)).passed
    # a wrong target is caught with a witness entry
    T = catalog("cw", 2) + Tensor3((3, 3, 3), {(1, 2, 0): 1})
    bad = verify_exact(D, T)
    assert not bad.passed and bad.witness["index"] == [1, 2, 0]
    with pytest.raises(ValueError):
        verify_exact(D, catalog("cw", 3))


def test_skewcw_decomposition_uses_cyclotomic_or_rational_field():
    D = builtin("skewcw:6")
    assert D.field in ("rational", "cyclotomic12")
    assert D.rank == 3 * 6 // 2 + 2


def test_numeric_matches_exact_for_exact_data():
    D = builtin("cw:4")
    r = verify_numeric(D, catalog("cw", 4), digits=40)
    assert r.passed and r.max_error < 1e-35


def test_scale_match_recovers_scale_and_identification():
    D = builtin("cw:3")
    lam, name, res = scale_match(D, catalog("cw", 3).scale(Fraction(1, 2)))
    assert abs(lam - 2) < 1e-25 and name == "id" and res < 1e-25
    # permuting the target's factors is undone by the identification search
    T = from_spec("random:3,3,3")
    Tsym = T + T.permute_factors((1, 0, 2))
    lam, name, res = scale_match(
        BorderDecomposition((3, 3, 3), [Term(LaurentPoly({0: Fraction(1)}),
                                             [LaurentPoly({0: Fraction(int(i == 0))}) for i in range(3)],
                                             [LaurentPoly({0: Fraction(int(i == 1))}) for i in range(3)],
                                             [LaurentPoly({0: Fraction(int(i == 2))}) for i in range(3)])]),
        Tensor3((3, 3, 3), {(1, 0, 2): 3}))
    with mpmath.workdps(30):
        assert res < 1e-20 and abs(lam - mpmath.mpf(1) / 3) < 1e-20


def test_det3_numeric_and_scale():
    D = builtin("det3-17", 60)
    lam, name, res = scale_match(D, catalog("det", 3), digits=60)
    assert res < 1e-40
    assert abs(lam - 1) < 1e-40


def test_json_roundtrip():
    for name in ("cw:3", "skewcw:4", "skewcw2-rank5"):
        D = builtin(name)
        D2 = BorderDecomposition.from_json(D.to_json())
        assert expand(D2, 0) == expand(D, 0)
    D = builtin("det3-17", 40)
    D2 = BorderDecomposition.from_json(D.to_json())
    assert verify_numeric(D2, catalog("det", 3), digits=40, tol=1e-30).passed


def test_cyclotomic_scalars_flow_through_expand():
    z = Cyclotomic12(0, 1)
    one = LaurentPoly({0: Cyclotomic12(1)})
    vec = [LaurentPoly({0: z}), LaurentPoly({0: Cyclotomic12(0)})]
    D = BorderDecomposition((2, 2, 2), [Term(one, vec, vec, vec)], field="cyclotomic12")
    e0 = expand(D, 0)[0]
    assert e0[(0, 0, 0)] == z**3
    assert abs(to_complex(e0[(0, 0, 0)]) - 1j) < 1e-40  # z^3 = i


@given(st.integers(2, 30), st.integers(1, 4), st.floats(1.0, 1e6))
def test_omega_formula(q, k, R):
    expect = math.log(4 / 27 * R ** (3 / k), q)
    assert abs(omega_bound(q, k, R) - expect) < 1e-8 * max(1, abs(expect))


def test_omega_values_and_validation():
    assert 2.40 <= omega_bound(8, 1, 10) <= 2.41
    for q in range(2, 11):
        assert abs(omega_bound(q, 3, 27 * q**3 / 4) - 3) < 1e-9
    with pytest.raises(ValueError):
        omega_bound(1, 1, 3)
    with pytest.raises(ValueError):
        omega_bound(3, 1, 3, skew=True)
    with mpmath.workdps(15):
        assert omega_bound(4, 2, 20, skew=True) == omega_bound(4, 2, 20)
