"""Ranks of matrices depending polynomially on one parameter ``x``.

Entries live in ``QX = Q[x]`` (sympy's sparse polynomial ring over QQ).
:func:`rank_parametric` returns the generic rank (over the function field
Q(x)) and the minimum rank over every complex specialization.  The minimum
is certified by dynamic evaluation: elimination over ``Q[x]/(f)`` for a
squarefree ``f``, splitting ``f`` by gcd whenever a pivot is a zero divisor.
Each branch ``f_i`` then has a single rank shared by all its complex roots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, List, Sequence, Tuple

from sympy import QQ
from sympy.polys.rings import PolyElement, ring

from .exact import rank_exact

__all__ = [
    "DimensionBudget",
    "ParametricRank",
    "QX",
    "TooManyParameters",
    "X",
    "as_qx",
    "rank_parametric",
    "specialize",
]

QX, X = ring("x", QQ)


class TooManyParameters(ValueError):
    """The matrix depends on more than one indeterminate."""


class DimensionBudget(ValueError):
    """The (reduced) parametric matrix is larger than allowed."""


def as_qx(v: Any) -> PolyElement:
    """Coerce ints, Fractions, coefficient lists and ring elements into ``QX``."""
    if isinstance(v, PolyElement):
        if v.ring == QX:
            return v
        if len(v.ring.gens) > 1:
            raise TooManyParameters(f"entry {v} lives in a ring with {len(v.ring.gens)} generators")
        return QX(v.as_expr()) if v.ring.symbols != QX.symbols else QX.from_dict(dict(v))
    if isinstance(v, (int, Fraction)):
        return QX(QQ(Fraction(v).numerator, Fraction(v).denominator))
    if isinstance(v, (list, tuple)):
        # coefficient list, constant term first
        acc = QX.zero
        for k, c in enumerate(v):
            c = Fraction(c)
            acc += QQ(c.numerator, c.denominator) * X**k
        return acc
    raise TypeError(f"cannot interpret {v!r} as a polynomial in x")


def specialize(M: Sequence[Sequence[Any]], x0: Any) -> List[List[Fraction]]:
    """Evaluate a parametric matrix at a rational point."""
    x0 = Fraction(x0)
    q = QQ(x0.numerator, x0.denominator)
    return [[_to_fraction(as_qx(e)(q)) for e in row] for row in M]


@dataclass
class ParametricRank:
    generic_rank: int
    min_rank: int
    #: list of (squarefree polynomial as string, rank at its roots)
    exceptional: List[Tuple[str, int]] = field(default_factory=list)
    constant_rank: int = 0

    def to_json(self) -> dict:
        return {"generic_rank": self.generic_rank, "min_rank": self.min_rank,
                "exceptional": [[f, r] for f, r in self.exceptional],
                "constant_rank": self.constant_rank}


def _to_fraction(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


def _split_constant_columns(M: List[List[PolyElement]]):
    """Eliminate the constant columns exactly.

    Returns ``(rank_of_constant_part, reduced_parametric_block)`` with
    ``rank M(x) = rank_const + rank reduced(x)`` for every ``x``.
    """
    n = len(M)
    m = len(M[0]) if n else 0
    const_cols = [j for j in range(m) if all(M[i][j].is_ground for i in range(n))]
    par_cols = [j for j in range(m) if j not in set(const_cols)]
    C = [[_to_fraction(M[i][j].LC) if M[i][j] else Fraction(0) for j in const_cols] for i in range(n)]
    P = [[M[i][j] for j in par_cols] for i in range(n)]
    r = 0
    for c in range(len(const_cols)):
        piv = next((i for i in range(r, n) if C[i][c] != 0), None)
        if piv is None:
            continue
        C[r], C[piv] = C[piv], C[r]
        P[r], P[piv] = P[piv], P[r]
        inv = 1 / C[r][c]
        for i in range(r + 1, n):
            if C[i][c] != 0:
                f = C[i][c] * inv
                C[i] = [a - f * b for a, b in zip(C[i], C[r])]
                fq = QQ(f.numerator, f.denominator)
                P[i] = [a - fq * b for a, b in zip(P[i], P[r])]
        r += 1
    reduced = P[r:]
    # drop identically zero rows of the parametric block
    reduced = [row for row in reduced if any(row)]
    return r, reduced


def _bareiss_qx(M: List[List[PolyElement]]) -> Tuple[int, PolyElement]:
    """Generic rank over Q(x) and the last pivot (a nonzero maximal minor)."""
    A = [row[:] for row in M]
    n = len(A)
    m = len(A[0]) if n else 0
    prev = QX.one
    r = 0
    last = QX.one
    for c in range(m):
        if r == n:
            break
        cands = [i for i in range(r, n) if A[i][c]]
        if not cands:
            continue
        piv = min(cands, key=lambda i: (A[i][c].degree(), len(A[i][c].terms())))
        A[r], A[piv] = A[piv], A[r]
        p = A[r][c]
        for i in range(r + 1, n):
            for j in range(c + 1, m):
                A[i][j] = (A[i][j] * p - A[i][c] * A[r][j]).exquo(prev)
            A[i][c] = QX.zero
        prev = p
        last = p
        r += 1
    return r, last


def _monic(f: PolyElement) -> PolyElement:
    return f.monic() if f else f


def _rank_mod(M: List[List[PolyElement]], f: PolyElement) -> List[Tuple[PolyElement, int]]:
    """Ranks of ``M`` at the roots of squarefree ``f`` (dynamic evaluation).

    Returns a list of ``(f_i, rank_i)`` with ``prod f_i = f``.
    """
    out: List[Tuple[PolyElement, int]] = []
    stack = [(f, [[e.rem(f) for e in row] for row in M], 0, 0)]
    while stack:
        f, A, r, c0 = stack.pop()
        n = len(A)
        m = len(A[0]) if n else 0
        c = c0
        while c < m and r < n:
            piv = None
            for i in range(r, n):
                a = A[i][c]
                if not a:
                    continue
                g = _monic(a.gcd(f))
                if g.degree() == 0:
                    piv = i
                    break
                if g.degree() == f.degree():
                    A[i][c] = QX.zero
                    continue
                # zero divisor: a vanishes on the roots of g only
                f1, f2 = g, f.exquo(g)
                stack.append((f1, [[e.rem(f1) for e in row] for row in A], r, c))
                f, A = f2, [[e.rem(f2) for e in row] for row in A]
                piv = i
                break
            if piv is None:
                c += 1
                continue
            A[r], A[piv] = A[piv], A[r]
            s, _t, h = A[r][c].gcdex(f)
            inv = (s * QX(QQ(1) / h.LC)).rem(f)
            A[r] = [(e * inv).rem(f) for e in A[r]]
            for i in range(r + 1, n):
                if A[i][c]:
                    fac = A[i][c]
                    A[i] = [(a - fac * b).rem(f) for a, b in zip(A[i], A[r])]
            r += 1
            c += 1
        out.append((f, r))
    return out


def rank_parametric(M: Sequence[Sequence[Any]], max_dim: int = 64) -> ParametricRank:
    """Generic rank and minimum rank over all complex ``x`` of ``M(x)``.

    Constant columns are eliminated exactly first (rank splits additively),
    so only the parametric remainder must respect ``max_dim`` (the smaller
    of its two dimensions).

    Raises:
        TooManyParameters: an entry involves more than one indeterminate.
        DimensionBudget: the reduced parametric block exceeds ``max_dim``.
    """
    rows = [[as_qx(e) for e in row] for row in M]
    if not rows or not rows[0]:
        return ParametricRank(0, 0)
    r_const, P = _split_constant_columns(rows)
    if not P or not P[0]:
        return ParametricRank(r_const, r_const, constant_rank=r_const)
    if min(len(P), len(P[0])) > max_dim:
        raise DimensionBudget(f"parametric block {len(P)}x{len(P[0])} exceeds {max_dim}")
    if all(e.is_ground for row in P for e in row):
        rc = rank_exact([[_to_fraction(e.LC) if e else Fraction(0) for e in row] for row in P])
        return ParametricRank(r_const + rc, r_const + rc, constant_rank=r_const)
    g, last = _bareiss_qx(P)
    if g == 0:
        return ParametricRank(r_const, r_const, constant_rank=r_const)
    f = _monic(last.sqf_part()) if last.degree() > 0 else QX.one
    exceptional: List[Tuple[str, int]] = []
    min_r = g
    if f.degree() > 0:
        for fi, ri in _rank_mod(P, f):
            if fi.degree() > 0 and ri < g:
                exceptional.append((str(fi.as_expr()), r_const + ri))
                min_r = min(min_r, ri)
    return ParametricRank(r_const + g, r_const + min_r, exceptional=exceptional, constant_rank=r_const)
