"""Degree-three border apolarity tests and candidate generation.

Candidate spaces ``E_110 in A (x) B`` (and their mirrors in ``A (x) C``,
``B (x) C``) are handled in the dual formulation:

* the (210)-test asks that ``E_110 (x) A -> Lambda^2 A (x) B`` has kernel
  ``(E_110 (x) A) cap (S^2 A (x) B)`` of dimension at least ``r``;
* the (120)-test is the same with the roles of ``A`` and ``B`` exchanged;
* the (111)-test asks that ``(E_110 (x) C) cap (E_101 (x) B) cap (E_011 (x) A)``
  has dimension at least ``r``.

Vectors are sparse dicts over a flattened ambient space: ``i * d2 + j`` for
a two-factor space, ``(i * dB + j) * dC + k`` for ``A (x) B (x) C``.

A candidate may contain one-parameter families ``x * u + v`` (``x`` ranges
over C; the point at infinity, ``u`` alone, is a separate candidate).  With
a single parameter the tests are decided for every complex ``x`` through
:func:`~borderlab.linalg.rank_parametric`.  With several parameters every
family but one is replaced by its hull ``<u, v>``; kernels and
intersections only grow, so the result is a certified upper bound and is
reported as such.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .linalg import (
    QX,
    X,
    BudgetExceeded,
    MinRankCertificate,
    SparseEchelon,
    min_rank_certificate,
    rank_exact,
    rank_parametric,
    sparse_intersect,
)
from .tensor import Tensor3, is_concise, slice_space, torus_lattice

__all__ = [
    "CandidateSpace",
    "EmptycorBound",
    "FlagReport",
    "KappaSplit",
    "SearchReport",
    "TestResult",
    "cartan_bound",
    "emptycor_bound",
    "flag_filtration_check",
    "kappa_split",
    "pure_kernel",
    "search_lower_bound",
    "slice_candidate",
    "test_111",
    "test_120",
    "test_210",
    "torus_candidates",
    "weak_candidate",
]

Vector = Dict[int, Any]

# factor pairs carried by each degree-two grade
_GRADE_FACTORS = {(1, 1, 0): (0, 1), (1, 0, 1): (0, 2), (0, 1, 1): (1, 2)}
# tensor reordering that turns the grade into the leading (1,1,0) grade
_GRADE_PERM = {(1, 1, 0): (0, 1, 2), (1, 0, 1): (0, 2, 1), (0, 1, 1): (1, 2, 0)}


def _frac(x: Any) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _clean(v: Vector) -> Vector:
    return {k: _frac(x) for k, x in v.items() if x}


def _add(u: Vector, v: Vector, a: Any = 1, b: Any = 1) -> Vector:
    out = {k: a * x for k, x in u.items()}
    for k, x in v.items():
        y = out.get(k, 0) + b * x
        if y:
            out[k] = y
        else:
            out.pop(k, None)
    return out


# ---------------------------------------------------------------------------
# candidate spaces


@dataclass
class CandidateSpace:
    """A candidate ``E_stu`` of degree two (grades (1,1,0), (1,0,1), (0,1,1)).

    Attributes:
        grade: the multidegree.
        dims: dimensions of the two factors carrying the grade, in order.
        basis: constant basis vectors (sparse, index ``i * dims[1] + j``).
        families: one-parameter vectors ``x_k * u + v`` as ``(u, v)`` pairs,
            each with its own parameter.
        marked: the first ``marked`` basis vectors span the slice space.
        labels: module label of each non-marked basis vector, then of
            each family.
        r: the border rank the candidate is built for (its dimension).
        meta: free-form provenance (chosen weights, options, coverage).
    """

    grade: Tuple[int, int, int]
    dims: Tuple[int, int]
    basis: List[Vector]
    families: List[Tuple[Vector, Vector]] = field(default_factory=list)
    marked: int = 0
    labels: List[str] = field(default_factory=list)
    r: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.grade = tuple(self.grade)
        self.dims = (int(self.dims[0]), int(self.dims[1]))
        self.basis = [_clean(v) for v in self.basis]
        self.families = [(_clean(u), _clean(v)) for u, v in self.families]

    @property
    def dim(self) -> int:
        return len(self.basis) + len(self.families)

    @property
    def nparams(self) -> int:
        return len(self.families)

    @property
    def is_parametric(self) -> bool:
        return bool(self.families)

    @property
    def ambient_dim(self) -> int:
        return self.dims[0] * self.dims[1]

    @property
    def complement(self) -> "CandidateSpace":
        """The part ``E'`` outside the marked slice space."""
        return CandidateSpace(self.grade, self.dims, self.basis[self.marked:], self.families,
                              0, self.labels, None, dict(self.meta))

    @property
    def slice_part(self) -> "CandidateSpace":
        return CandidateSpace(self.grade, self.dims, self.basis[:self.marked], [], self.marked,
                              [], None, {})

    def specialize(self, values: Sequence[Any]) -> "CandidateSpace":
        """Constant space at parameter values (``None`` means ``x = infinity``)."""
        if len(values) != len(self.families):
            raise ValueError("one value per family expected")
        extra = []
        for (u, v), x in zip(self.families, values):
            extra.append(dict(u) if x is None else _add(u, v, Fraction(x), 1))
        return CandidateSpace(self.grade, self.dims, self.basis + extra, [], self.marked,
                              self.labels, self.r, dict(self.meta))

    def hull(self, keep: Optional[int] = None) -> "CandidateSpace":
        """Replace every family except ``keep`` by the span of its ``u`` and ``v``."""
        basis = list(self.basis)
        fams = []
        for n, (u, v) in enumerate(self.families):
            if n == keep:
                fams.append((u, v))
            else:
                basis.extend([u, v])
        return CandidateSpace(self.grade, self.dims, basis, fams, self.marked, [], None, {})

    def with_basis(self, extra: Sequence[Vector]) -> "CandidateSpace":
        return CandidateSpace(self.grade, self.dims, self.basis + [dict(v) for v in extra],
                              self.families, self.marked, self.labels, self.r, dict(self.meta))

    def matrices(self) -> List[np.ndarray]:
        """Constant basis vectors as ``dims`` shaped object matrices."""
        out = []
        for v in self.basis:
            m = np.zeros(self.dims, dtype=object)
            m[...] = 0
            for k, x in v.items():
                m[divmod(k, self.dims[1])] = x
            out.append(m)
        return out

    def is_independent(self, x: Any = 0) -> bool:
        vecs = self.specialize([x] * self.nparams).basis
        return SparseEchelon_rank(vecs) == len(vecs)

    def dimension_vector(self) -> Dict[str, int]:
        """Counts of complement vectors per module label (families count under
        their combined label)."""
        out: Dict[str, int] = {}
        for lab in self.labels:
            out[lab] = out.get(lab, 0) + 1
        return out

    def to_json(self) -> dict:
        def enc(v):
            return [[k, str(x)] for k, x in sorted(v.items())]

        return {
            "grade": list(self.grade),
            "dims": list(self.dims),
            "dim": self.dim,
            "marked": self.marked,
            "basis": [enc(v) for v in self.basis],
            "families": [[enc(u), enc(v)] for u, v in self.families],
            "labels": list(self.labels),
            "r": self.r,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CandidateSpace":
        def dec(v):
            return {int(k): Fraction(x) for k, x in v}

        return cls(tuple(data["grade"]), tuple(data["dims"]), [dec(v) for v in data["basis"]],
                   [(dec(u), dec(v)) for u, v in data.get("families", [])], data.get("marked", 0),
                   list(data.get("labels", [])), data.get("r"), dict(data.get("meta", {})))

    @classmethod
    def from_matrices(cls, grade: Sequence[int], mats: Sequence[Any], marked: int = 0,
                      r: Optional[int] = None) -> "CandidateSpace":
        mats = [np.asarray(m, dtype=object) for m in mats]
        if not mats:
            raise ValueError("need at least one matrix (or use the constructor)")
        d1, d2 = mats[0].shape
        basis = [{i * d2 + j: x for (i, j), x in np.ndenumerate(m) if x} for m in mats]
        return cls(tuple(grade), (d1, d2), basis, [], marked, [], r)


def SparseEchelon_rank(vectors: Iterable[Vector]) -> int:  # noqa: N802 - small helper
    ech = SparseEchelon()
    for v in vectors:
        ech.add(v)
    return ech.rank


def unit(i: int, j: int, d2: int, c: Any = 1) -> Vector:
    """The sparse vector ``c * x_i (x) y_j`` of a two-factor space."""
    return {i * d2 + j: Fraction(c)}


def slice_candidate(T: Tensor3, grade: Sequence[int] = (1, 1, 0)) -> CandidateSpace:
    """The slice space as a candidate of the given grade (``T(C^*)`` for (1,1,0))."""
    grade = tuple(grade)
    f1, f2 = _GRADE_FACTORS[grade]
    other = 3 - f1 - f2
    S = slice_space(T, other)
    return CandidateSpace(grade, (T.dims[f1], T.dims[f2]), S.vectors(), [], S.dim, [], S.dim)


def extend(T: Tensor3, extra: Sequence[Vector], grade: Sequence[int] = (1, 1, 0),
           families: Sequence[Tuple[Vector, Vector]] = (), labels: Sequence[str] = ()) -> CandidateSpace:
    """``T``'s slice space of the given grade plus extra vectors/families."""
    S = slice_candidate(T, grade)
    E = CandidateSpace(S.grade, S.dims, S.basis + [dict(v) for v in extra], list(families), S.marked,
                       list(labels), S.marked + len(extra) + len(families))
    return E


# ---------------------------------------------------------------------------
# kernel machinery


def _pair_index(n: int) -> Dict[Tuple[int, int], int]:
    return {p: k for k, p in enumerate(itertools.combinations(range(n), 2))}


def _skew_columns(v: Vector, d1: int, d2: int, side: int, pidx) -> List[Vector]:
    """Columns of ``v (x) x_l`` for all ``l`` under skew-symmetrization.

    ``side == 0``: ``E (x) X -> Lambda^2 X (x) Y`` (X the first factor);
    ``side == 1``: ``E (x) Y -> X (x) Lambda^2 Y``.
    """
    cols = []
    if side == 0:
        for l in range(d1):
            col: Vector = {}
            for k, x in v.items():
                i, j = divmod(k, d2)
                if i == l:
                    continue
                row = pidx[(min(i, l), max(i, l))] * d2 + j
                val = x if i < l else -x
                y = col.get(row, 0) + val
                if y:
                    col[row] = y
                else:
                    col.pop(row, None)
            cols.append(col)
    else:
        npairs = d2 * (d2 - 1) // 2
        for l in range(d2):
            col = {}
            for k, x in v.items():
                i, j = divmod(k, d2)
                if j == l:
                    continue
                row = i * npairs + pidx[(min(j, l), max(j, l))]
                val = x if j < l else -x
                y = col.get(row, 0) + val
                if y:
                    col[row] = y
                else:
                    col.pop(row, None)
            cols.append(col)
    return cols


@dataclass
class _KernelInfo:
    generic: int
    maximum: int
    exact: bool
    exceptional: List[Tuple[str, int]] = field(default_factory=list)


def _param_matrix(const_cols: Sequence[Vector], fam_cols: Sequence[Tuple[Vector, Vector]],
                  nrows_hint: Optional[int] = None):
    """Dense Q[x] matrix (rows = used coordinates) from constant and x*u+v columns."""
    rows = sorted({k for c in const_cols for k in c} | {k for u, v in fam_cols for k in u} |
                  {k for u, v in fam_cols for k in v})
    ridx = {k: n for n, k in enumerate(rows)}
    ncols = len(const_cols) + len(fam_cols)
    M = [[QX.zero] * ncols for _ in rows]
    for c, col in enumerate(const_cols):
        for k, x in col.items():
            M[ridx[k]][c] = QX(x)
    off = len(const_cols)
    for c, (u, v) in enumerate(fam_cols):
        for k, x in u.items():
            M[ridx[k]][off + c] += QX(x) * X
        for k, x in v.items():
            M[ridx[k]][off + c] += QX(x)
    return M


def _rank_with_family(const_cols: Sequence[Vector], fam_cols: Sequence[Tuple[Vector, Vector]]):
    """(generic rank, min rank over x in C, exceptional list) of [const | x*u+v]."""
    if not fam_cols:
        r = SparseEchelon_rank(const_cols)
        return r, r, []
    # eliminate the constant part sparsely, then reduce family columns against it
    ech = SparseEchelon()
    for c in const_cols:
        ech.add(c)
    red = [(ech.reduce(u), ech.reduce(v)) for u, v in fam_cols]
    red = [(u, v) for u, v in red if u or v]
    if not red:
        return ech.rank, ech.rank, []
    M = _param_matrix([], red)
    pr = rank_parametric(M, max_dim=max(64, len(red)))
    exc = [(f, ech.rank + r) for f, r in pr.exceptional]
    return ech.rank + pr.generic_rank, ech.rank + pr.min_rank, exc


def _sample_point(n: int, seed: int = 12345) -> List[Fraction]:
    rng = np.random.default_rng(seed)
    return [Fraction(int(a), int(b)) for a, b in zip(rng.integers(-997, 998, n), rng.integers(1, 998, n))]


def _skew_kernel(E: CandidateSpace, side: int) -> _KernelInfo:
    d1, d2 = E.dims
    pidx = _pair_index(d1 if side == 0 else d2)
    const_cols = [c for v in E.basis for c in _skew_columns(v, d1, d2, side, pidx)]
    fams = []
    for u, v in E.families:
        cu = _skew_columns(u, d1, d2, side, pidx)
        cv = _skew_columns(v, d1, d2, side, pidx)
        fams.append(list(zip(cu, cv)))
    n = d1 if side == 0 else d2
    total = E.dim * n
    if not fams:
        r = SparseEchelon_rank(const_cols)
        return _KernelInfo(total - r, total - r, True)
    if len(fams) == 1:
        g, mn, exc = _rank_with_family(const_cols, fams[0])
        return _KernelInfo(total - g, total - mn, True, [(f, total - r) for f, r in exc])
    # several parameters: hull bounds, tightest over the kept family
    best = None
    for keep in range(len(fams)):
        cc = list(const_cols)
        for n_, fc in enumerate(fams):
            if n_ != keep:
                cc.extend(u for u, _ in fc)
                cc.extend(v for _, v in fc)
        ncols_h = len(cc) + len(fams[keep])
        _, mn, _ = _rank_with_family(cc, fams[keep])
        bound = ncols_h - mn
        best = bound if best is None else min(best, bound)
    pt = _sample_point(len(fams))
    S = E.specialize(pt)
    sampled = _skew_kernel(S, side).generic
    return _KernelInfo(sampled, best, False)


@dataclass
class TestResult:
    """Outcome of a degree-three test.

    ``kernel_generic`` is the dimension for a generic parameter value (the
    only value for constant candidates); ``kernel_max`` the maximum over all
    complex parameter values (an upper bound when ``exact`` is False).
    Unpacks as ``(passed, kernel_dim)``.
    """

    test: str
    r: int
    kernel_generic: int
    kernel_max: int
    exact: bool = True
    parametric: bool = False
    exceptional: List[Tuple[str, int]] = field(default_factory=list)

    @property
    def passed_generic(self) -> bool:
        return self.kernel_generic >= self.r

    @property
    def passed(self) -> bool:
        """Passes for some parameter value (possibly, when not exact)."""
        return self.kernel_max >= self.r

    @property
    def kernel_dim(self) -> int:
        return self.kernel_max if self.parametric else self.kernel_generic

    @property
    def status(self) -> str:
        if not self.parametric:
            return "pass" if self.passed else "fail"
        if self.passed_generic:
            return "pass generically"
        if not self.passed:
            return "refuted for all parameter values"
        if self.exact:
            return "pass at exceptional parameter values"
        return "refuted generically only"

    def __iter__(self):
        yield self.passed
        yield self.kernel_dim

    def __getitem__(self, n: int):
        return (self.passed, self.kernel_dim)[n]

    def to_json(self) -> dict:
        return {"test": self.test, "r": self.r, "passed": self.passed, "status": self.status,
                "kernel_generic": self.kernel_generic, "kernel_max": self.kernel_max,
                "exact": self.exact, "exceptional": [[f, k] for f, k in self.exceptional]}


def _check_r(E: CandidateSpace, r: Optional[int], strict: bool) -> int:
    if r is None:
        r = E.r if E.r is not None else E.dim
    if strict and E.dim != r:
        raise ValueError(f"candidate has dimension {E.dim}, expected r = {r}")
    return r


def _grade_side(E: CandidateSpace, test: str) -> int:
    """Which factor of the candidate is squared by the named test."""
    return 0 if test in ("210", "201", "021") else 1


def test_210(T: Optional[Tensor3], E110: CandidateSpace, r: Optional[int] = None,
             strict: bool = True) -> TestResult:
    """The (210)-test: ``dim (E (x) A) cap (S^2 A (x) B) >= r``.

    For other grades the first factor of the grade plays the role of ``A``
    (the (201)-test for ``E_101``, the (021)-test for ``E_011``).
    """
    r = _check_r(E110, r, strict)
    if T is not None:
        f1, f2 = _GRADE_FACTORS[E110.grade]
        if (T.dims[f1], T.dims[f2]) != E110.dims:
            raise ValueError("candidate dims do not match the tensor")
    k = _skew_kernel(E110, 0)
    return TestResult("210", r, k.generic, k.maximum, k.exact, E110.is_parametric, k.exceptional)


def test_120(T: Optional[Tensor3], E110: CandidateSpace, r: Optional[int] = None,
             strict: bool = True) -> TestResult:
    """The (120)-test: ``dim (E (x) B) cap (A (x) S^2 B) >= r``."""
    r = _check_r(E110, r, strict)
    if T is not None:
        f1, f2 = _GRADE_FACTORS[E110.grade]
        if (T.dims[f1], T.dims[f2]) != E110.dims:
            raise ValueError("candidate dims do not match the tensor")
    k = _skew_kernel(E110, 1)
    return TestResult("120", r, k.generic, k.maximum, k.exact, E110.is_parametric, k.exceptional)


def pure_kernel(E: CandidateSpace, side: int = 0) -> int:
    """``dim (E (x) X) cap (S^2 X (x) Y)`` for a constant space (``side`` 0) or
    its mirror (``side`` 1)."""
    if E.is_parametric:
        raise ValueError("pure_kernel needs a constant space")
    return _skew_kernel(E, side).generic


# -- (111) -------------------------------------------------------------------


def _lift(E: CandidateSpace, dims3: Sequence[int]) -> Tuple[List[Vector], List[List[Tuple[Vector, Vector]]]]:
    """``E (x) (third factor)`` as vectors of ``A (x) B (x) C``."""
    dA, dB, dC = dims3
    f1, f2 = _GRADE_FACTORS[E.grade]
    g = 3 - f1 - f2
    d2 = E.dims[1]

    def flat(idx):
        return (idx[0] * dB + idx[1]) * dC + idx[2]

    def lift_vec(v: Vector, t: int) -> Vector:
        out = {}
        for k, x in v.items():
            a, b = divmod(k, d2)
            idx = [0, 0, 0]
            idx[f1], idx[f2], idx[g] = a, b, t
            out[flat(idx)] = x
        return out

    n = dims3[g]
    const = [lift_vec(v, t) for v in E.basis for t in range(n)]
    fams = [[(lift_vec(u, t), lift_vec(v, t)) for t in range(n)] for u, v in E.families]
    return const, fams


def test_111(E110: CandidateSpace, E101: CandidateSpace, E011: CandidateSpace,
             r: Optional[int] = None, strict: bool = True) -> TestResult:
    """The (111)-test: ``dim (E110 (x) C) cap (E101 (x) B) cap (E011 (x) A) >= r``."""
    spaces = {s.grade: s for s in (E110, E101, E011)}
    if set(spaces) != {(1, 1, 0), (1, 0, 1), (0, 1, 1)}:
        raise ValueError("need one candidate of each grade (1,1,0), (1,0,1), (0,1,1)")
    dA, dB = E110.dims
    dC = E101.dims[1]
    if E101.dims[0] != dA or E011.dims != (dB, dC):
        raise ValueError("candidate dims are inconsistent")
    if r is None:
        r = E110.r if E110.r is not None else E110.dim
    if strict:
        for s in (E110, E101, E011):
            if s.dim != r:
                raise ValueError(f"candidate of grade {s.grade} has dimension {s.dim}, expected {r}")
    dims3 = (dA, dB, dC)
    N = dA * dB * dC
    lifted = [_lift(s, dims3) for s in (E110, E101, E011)]
    npar = sum(len(f) for _, f in lifted)
    if npar == 0:
        d = len(sparse_intersect([c for c, _ in lifted], N))
        return TestResult("111", r, d, d, True, False)
    param_spaces = [n for n, (_, f) in enumerate(lifted) if f]
    best = None
    exact = npar == 1
    exc: List[Tuple[str, int]] = []
    for n in param_spaces:
        const_p, fams_p = lifted[n]
        for keep in range(len(fams_p)):
            # the kept family stays parametric; everything else becomes constant hulls
            P_const = list(const_p)
            for m, fc in enumerate(fams_p):
                if m != keep:
                    P_const.extend(u for u, _ in fc)
                    P_const.extend(v for _, v in fc)
            others = []
            for m, (c, f) in enumerate(lifted):
                if m == n:
                    continue
                others.append(list(c) + [u for fc in f for u, _ in fc] + [v for fc in f for _, v in fc])
            Z = sparse_intersect(others, N)
            dimP = len(P_const) + len(fams_p[keep])
            g, mn, e = _rank_with_family(list(P_const) + Z, fams_p[keep])
            bound = dimP + len(Z) - mn
            if npar == 1:
                exc = [(f, dimP + len(Z) - rr) for f, rr in e]
                generic = dimP + len(Z) - g
            best = bound if best is None else min(best, bound)
    if npar > 1:
        pts = _sample_point(npar)
        it = iter(pts)
        spec = [s.specialize([next(it) for _ in s.families]) for s in (E110, E101, E011)]
        generic = test_111(*spec, r=r, strict=False).kernel_generic
    return TestResult("111", r, generic, best, exact, True, exc)


# ---------------------------------------------------------------------------
# kappa split and Cartan bound


@dataclass
class KappaSplit:
    kappa_f: int
    kappa_p: int
    kappa_m: int
    kappa_f_prime: int = 0
    kappa_p_prime: int = 0
    kappa_m_prime: int = 0

    @property
    def total(self) -> int:
        return self.kappa_f + self.kappa_p + self.kappa_m

    @property
    def total_prime(self) -> int:
        return self.kappa_f_prime + self.kappa_p_prime + self.kappa_m_prime

    @property
    def mixed_free(self) -> bool:
        """Both mixed kernels vanish (flagged as suspicious, never a refutation)."""
        return self.kappa_m == 0 and self.kappa_m_prime == 0

    def to_json(self) -> dict:
        return {"kappa_f": self.kappa_f, "kappa_p": self.kappa_p, "kappa_m": self.kappa_m,
                "kappa_f_prime": self.kappa_f_prime, "kappa_p_prime": self.kappa_p_prime,
                "kappa_m_prime": self.kappa_m_prime, "mixed_free": self.mixed_free}


def kappa_split(T: Tensor3, Eprime: CandidateSpace) -> KappaSplit:
    """Free/pure/mixed split of the (210) and (120) kernels for a given complement.

    ``Eprime`` must be a constant space meeting ``T(C^*)`` only in zero.
    ``kappa_p`` is the pure kernel of this particular complement (the
    minimum over all complements is not attempted).
    """
    if Eprime.is_parametric:
        raise ValueError("kappa_split needs a constant complement; specialize first")
    S = slice_candidate(T, Eprime.grade)
    if S.dims != Eprime.dims:
        raise ValueError("complement dims do not match the tensor")
    comp = Eprime.complement if Eprime.marked else Eprime
    if SparseEchelon_rank(S.basis + comp.basis) != S.dim + comp.dim:
        raise ValueError("the complement meets the slice space")
    full = CandidateSpace(S.grade, S.dims, S.basis + comp.basis, [], S.dim)
    out = []
    for side in (0, 1):
        kf = pure_kernel(S, side)
        kp = pure_kernel(comp, side)
        tot = pure_kernel(full, side)
        out.extend([kf, kp, tot - kf - kp])
    return KappaSplit(*out)


@dataclass
class FlagProfile:
    s: List[int]

    @property
    def bound(self) -> int:
        return sum((i + 1) * x for i, x in enumerate(self.s))


def cartan_bound(Eprime: CandidateSpace, factor: str = "B", seeds: Sequence[int] = (0, 1, 2)) -> Tuple[FlagProfile, int]:
    """Projection profile along a generic flag and the bound ``sum i * s_i``.

    With ``factor == "B"`` (the second factor of the grade) the flag is taken
    in ``B`` and the bound dominates the pure (210)-kernel; ``"A"`` takes the
    flag in the first factor and bounds the (120) side.  Random integer
    flags are tried per seed; the lexicographically largest profile wins.
    All ranks are exact.
    """
    if Eprime.is_parametric:
        raise ValueError("cartan_bound needs a constant space")
    side = 1 if factor in ("B", 1, "second") else 0
    d1, d2 = Eprime.dims
    mats = Eprime.matrices()
    n = d2 if side == 1 else d1
    best: Optional[List[int]] = None
    for seed in seeds:
        rng = np.random.default_rng(seed)
        F = rng.integers(-9, 10, size=(n, n))
        while rank_exact(F.tolist()) < n:
            F = rng.integers(-9, 10, size=(n, n))
        cum = []
        for i in range(1, n + 1):
            # projection of each element: M @ F[:, :i] (flag in B) or F[:i] @ M (flag in A)
            rows = []
            for M in mats:
                P = (M.dot(F[:, :i].astype(object)) if side == 1 else F[:i].astype(object).dot(M))
                rows.append([Fraction(int(x)) if not isinstance(x, Fraction) else x for x in P.reshape(-1)])
            cum.append(rank_exact(rows) if rows else 0)
            if cum[-1] == len(mats):
                cum.extend([cum[-1]] * (n - i))
                break
        s = [cum[0]] + [cum[i] - cum[i - 1] for i in range(1, len(cum))]
        while s and s[-1] == 0:
            s.pop()
        if best is None or s > best:
            best = s
    prof = FlagProfile(best or [])
    return prof, prof.bound


# ---------------------------------------------------------------------------
# flag conditions


@dataclass
class FlagReport:
    refuted: bool
    steps: List[dict]

    def __bool__(self) -> bool:  # truthy == not refuted
        return not self.refuted

    def to_json(self) -> dict:
        return {"refuted": self.refuted, "steps": self.steps}


def flag_filtration_check(filtration: Sequence[Any], ranks: Optional[Sequence[int]] = None,
                          seeds: Sequence[int] = (0, 1, 2)) -> FlagReport:
    """Necessary matrix-rank conditions for a filtration ``F_1 < ... < F_r``.

    ``F_j`` lying in the ``j``-th secant variety of the two-factor Segre
    variety means every element of ``F_j`` has rank at most ``j``.  An
    element of larger rank (found among seeded integer combinations, its
    rank computed exactly) refutes the filtration.  Nestedness is checked as
    well.  Not refuting is not a proof of the condition.

    Args:
        filtration: a list of :class:`CandidateSpace` or lists of matrices.
        ranks: the index ``j`` of each step (default ``1, 2, ...``).
    """
    spaces = []
    for F in filtration:
        if isinstance(F, CandidateSpace):
            spaces.append(F.matrices())
        else:
            spaces.append([np.asarray(m, dtype=object) for m in F])
    if ranks is None:
        ranks = list(range(1, len(spaces) + 1))
    steps = []
    refuted = False
    prev = None
    for j, mats in zip(ranks, spaces):
        vecs = [[Fraction(x) for x in m.reshape(-1)] for m in mats]
        nested = True
        if prev is not None:
            nested = rank_exact(prev + vecs) == rank_exact(vecs)
        gen_rank = 0
        for seed in seeds:
            rng = np.random.default_rng(seed)
            c = rng.integers(-9, 10, size=len(mats))
            M = sum((int(a) * m for a, m in zip(c, mats)), np.zeros(mats[0].shape, dtype=object))
            gen_rank = max(gen_rank, rank_exact(M.tolist()))
        bad = gen_rank > j or not nested
        refuted = refuted or bad
        steps.append({"j": j, "dim": len(mats), "generic_rank": gen_rank, "nested": nested,
                      "refuted": bad})
        prev = vecs
    return FlagReport(refuted, steps)


# ---------------------------------------------------------------------------
# minimum-rank bound


@dataclass
class EmptycorBound:
    bound: int
    rho: int
    m: int
    factor: str
    certificate: MinRankCertificate
    note: str = ""

    def to_json(self) -> dict:
        return {"bound": self.bound, "rho": self.rho, "m": self.m, "factor": self.factor,
                "certificate": self.certificate.to_json(), "note": self.note}


def emptycor_bound(T: Tensor3, factor: str = "C", p: int = 5, budget: int = 10**7) -> EmptycorBound:
    """Lower bound ``m + rho - 1`` from the minimum rank ``rho`` of a slice space.

    ``rho`` is certified by exhausting ``P(S (x) F_p)``; every rational
    element of the slice space then has rank ``>= rho``, so the slice space
    avoids the rank ``rho - 1`` locus over Q.

    Raises:
        BudgetExceeded: too many projective points.
    """
    from .tensor import _factor_index

    f = _factor_index(factor)
    if not is_concise(T)[f]:
        raise ValueError(f"tensor is not concise in factor {'ABC'[f]}")
    S = slice_space(T, f)
    cert = min_rank_certificate(S.integer_basis(), p, budget=budget)
    m = T.dims[f]
    return EmptycorBound(m + cert.rho - 1, cert.rho, m, "ABC"[f], cert,
                         note="avoidance certified over Q by reduction mod p")


# ---------------------------------------------------------------------------
# torus-fixed candidates


def _weights(T: Tensor3) -> List[Tuple[Fraction, ...]]:
    return [tuple(row) for row in torus_lattice(T)]


def _adapted_pieces(T: Tensor3, classes: Optional[Dict[int, str]] = None):
    """Weight decomposition of ``(A (x) B) / T(C^*)`` in a module-adapted basis.

    Returns ``(slice_vectors, pieces)``; each piece is a dict with keys
    ``weight``, ``vectors`` (adapted quotient basis) and ``labels``.
    """
    dA, dB, _ = T.dims
    W = _weights(T)
    wa, wb = W[:dA], W[dA:dA + dB]
    groups: Dict[Tuple, List[Tuple[int, int]]] = {}
    for i in range(dA):
        for j in range(dB):
            w = tuple(x + y for x, y in zip(wa[i], wb[j]))
            groups.setdefault(w, []).append((i, j))
    S = slice_candidate(T, (1, 1, 0))
    square = dA == dB
    cls = (lambda i: classes.get(i, "M")) if classes is not None else (lambda i: "M")

    def label(kind, i, j):
        ci, cj = sorted([cls(i), cls(j)])
        if kind == "diag":
            return "L^2" if ci == "L" else "S2M"
        if ci == "L" and cj == "L":
            return "L^2" if kind == "sym" else "L^L"
        if ci == "L" or cj == "L":
            return "L.M" if kind == "sym" else "L^M"
        return "S2M" if kind == "sym" else "L2_0M"

    pieces = []
    for w, pairs in groups.items():
        keys = {i * dB + j for i, j in pairs}
        # slice vectors are torus weight vectors? project onto this weight space
        s_w = []
        for v in S.basis:
            comp = {k: x for k, x in v.items() if k in keys}
            if comp:
                s_w.append(comp)
        ech = SparseEchelon()
        for v in s_w:
            ech.add(v)
        cand = []
        seen = set()
        for i, j in sorted(pairs):
            if i == j and square:
                cand.append(({i * dB + j: Fraction(1)}, label("diag", i, j)))
            elif square and (j, i) in pairs:
                if (j, i) in seen:
                    continue
                seen.add((i, j))
                a, b = i * dB + j, j * dB + i
                cand.append(({a: Fraction(1), b: Fraction(1)}, label("sym", i, j)))
                cand.append(({a: Fraction(1), b: Fraction(-1)}, label("anti", i, j)))
            else:
                cand.append(({i * dB + j: Fraction(1)}, label("sym", i, j) if square else "X(x)Y"))
        vecs, labs = [], []
        for v, lab in cand:
            if ech.add(v):
                vecs.append(v)
                labs.append(lab)
        if vecs:
            pieces.append({"weight": [str(x) for x in w], "vectors": vecs, "labels": labs})
    pieces.sort(key=lambda p: (len(p["vectors"]), p["weight"]))
    return S, pieces


def torus_candidates(T: Tensor3, r: int, budget: int = 10**6, classes: Optional[Dict[int, str]] = None,
                     multiplicity: str = "adapted") -> List[CandidateSpace]:
    """Torus-fixed ``E_110 = T(C^*) + E'`` of dimension ``r``.

    The torus is the diagonal symmetry torus of ``T`` (kernel of the support
    equations).  A torus-fixed ``E'`` is a sum of subspaces of the weight
    spaces of ``(A (x) B)/T(C^*)``.  Per weight space of dimension ``d``:

    * ``d == 1``: in or out;
    * ``d == 2``: nothing, everything, or a line - the family ``x*q1 + q2``
      plus the point ``q1`` (``x = infinity``);
    * ``d >= 3``: with ``multiplicity == "adapted"`` only subsets of the
      module-adapted basis are taken (recorded in ``meta["coverage"]``);
      ``"abort"`` raises instead.

    Args:
        T: the tensor.
        r: target border rank (``dim E_110``).
        budget: maximum number of candidates.
        classes: optional map from basis index to ``"L"``/``"M"`` for module
            labels (e.g. ``{0: "L"}`` for the Coppersmith-Winograd tensors).
        multiplicity: ``"adapted"`` or ``"abort"``.

    Raises:
        BudgetExceeded: more than ``budget`` candidates.
    """
    S, pieces = _adapted_pieces(T, classes)
    k = r - S.dim
    if k < 0:
        raise ValueError(f"r = {r} is below dim T(C*) = {S.dim}")
    if k == 0:
        return [CandidateSpace((1, 1, 0), S.dims, S.basis, [], S.dim, [], r,
                               {"choices": [], "coverage": "complete"})]
    options_per_piece = []
    for n, pc in enumerate(pieces):
        d = len(pc["vectors"])
        opts = [(0, "none")]
        if d == 1:
            opts.append((1, "all"))
        elif d == 2:
            opts += [(1, "family"), (1, "point"), (2, "all")]
        else:
            if multiplicity == "abort":
                opts = [(0, "none"), (d, "all")]
                pc["abort"] = True
            else:
                for s in range(1, d + 1):
                    for sub in itertools.combinations(range(d), s):
                        opts.append((s, ("subset", sub)))
        options_per_piece.append(opts)
    out: List[CandidateSpace] = []

    def rec(n: int, left: int, chosen: list):
        if left == 0:
            build(chosen)
            return
        if n == len(pieces):
            return
        for size, opt in options_per_piece[n]:
            if size <= left:
                rec(n + 1, left - size, chosen + ([(n, opt)] if size else []))

    def build(chosen):
        basis = list(S.basis)
        fams, labels, choices = [], [], []
        cover = "complete"
        for n, opt in chosen:
            pc = pieces[n]
            vecs, labs = pc["vectors"], pc["labels"]
            if opt == "all":
                basis.extend(vecs)
                labels.extend(labs)
            elif opt == "family":
                fams.append((vecs[0], vecs[1]))
                fam_labels = "|".join(labs)
            elif opt == "point":
                basis.append(vecs[0])
                labels.append(labs[0])
            else:
                sub = opt[1]
                basis.extend(vecs[i] for i in sub)
                labels.extend(labs[i] for i in sub)
                cover = "adapted-basis"
            choices.append({"weight": pc["weight"], "option": opt if isinstance(opt, str) else list(opt[1])})
        labels.extend("|".join(pieces[n]["labels"]) for n, opt in chosen if opt == "family")
        out.append(CandidateSpace((1, 1, 0), S.dims, basis, fams, S.dim, labels, r,
                                  {"choices": choices, "coverage": cover}))
        if len(out) > budget:
            raise BudgetExceeded(f"more than {budget} torus-fixed candidates", partial=len(out))

    if multiplicity == "abort" and any(p.get("abort") for p in pieces) and k > 0:
        for pc in pieces:
            if pc.get("abort") and len(pc["vectors"]) > k:
                pass
        big = [pc for pc in pieces if pc.get("abort")]
        if big:
            raise ValueError(f"weight space of multiplicity {len(big[0]['vectors'])} > 2 in the quotient; "
                             "use multiplicity='adapted' to enumerate adapted-basis subsets")
    rec(0, k, [])
    return out


@dataclass
class SearchReport:
    r: int
    counts: Dict[str, int]
    passing: Dict[str, List[dict]]
    triples_tested: int
    triples_passing: List[dict]
    undecided: List[dict]
    coverage: str
    classes: Dict[str, Dict[str, int]] = field(default_factory=dict)

    @property
    def refuted(self) -> bool:
        """No torus-fixed triple passes (within the enumeration's coverage)."""
        return not self.triples_passing and not self.undecided

    def to_json(self) -> dict:
        return {"r": self.r, "counts": self.counts, "passing": self.passing,
                "triples_tested": self.triples_tested, "triples_passing": self.triples_passing,
                "undecided": self.undecided, "coverage": self.coverage, "refuted": self.refuted,
                "type_classes": self.classes}


def _to_grade(E: CandidateSpace, grade: Tuple[int, int, int]) -> CandidateSpace:
    return CandidateSpace(grade, E.dims, E.basis, E.families, E.marked, E.labels, E.r, E.meta)


def search_lower_bound(T: Tensor3, r: int, budget: int = 10**6, classes: Optional[Dict[int, str]] = None,
                       multiplicity: str = "adapted") -> SearchReport:
    """Run every torus-fixed degree-two candidate triple through the degree-three tests.

    Each grade is enumerated with :func:`torus_candidates` on the tensor
    with its factors reordered so that the grade leads; candidates must
    pass both of their two-factor tests; surviving triples go through the
    (111)-test.  A parametric candidate survives unless refuted for all
    parameter values.
    """
    grades = [(1, 1, 0), (1, 0, 1), (0, 1, 1)]
    lists: Dict[Tuple, List[CandidateSpace]] = {}
    counts: Dict[str, int] = {}
    passing: Dict[str, List[dict]] = {}
    coverage = "complete"
    type_classes: Dict[str, Dict[str, int]] = {}
    for g in grades:
        perm = _GRADE_PERM[g]
        Tg = T.permute_factors(perm)
        cls_g = classes
        cands = torus_candidates(Tg, r, budget, cls_g, multiplicity)
        key = "".join(map(str, g))
        counts[key] = len(cands)
        keep = []
        summary = []
        tally: Dict[str, int] = {}
        for E in cands:
            E = _to_grade(E, g)
            if E.meta.get("coverage") != "complete":
                coverage = "adapted-basis"
            t1 = test_210(None, E, r)
            t2 = test_120(None, E, r)
            sig = ",".join(f"{a}:{b}" for a, b in sorted(E.dimension_vector().items()))
            ok = t1.passed and t2.passed
            tally[sig + ("|pass" if ok else "|fail")] = tally.get(sig + ("|pass" if ok else "|fail"), 0) + 1
            if ok:
                keep.append(E)
                summary.append({"labels": E.labels, "choices": E.meta.get("choices"),
                                "tests": [t1.to_json(), t2.to_json()]})
        lists[g] = keep
        passing[key] = summary
        type_classes[key] = tally
    triples_passing, undecided = [], []
    tested = 0
    for E1 in lists[(1, 1, 0)]:
        for E2 in lists[(1, 0, 1)]:
            for E3 in lists[(0, 1, 1)]:
                tested += 1
                t = test_111(E1, E2, E3, r)
                rec = {"E110": E1.meta.get("choices"), "E101": E2.meta.get("choices"),
                       "E011": E3.meta.get("choices"), "test": t.to_json()}
                if t.passed:
                    (triples_passing if t.exact else undecided).append(rec)
    return SearchReport(r, counts, passing, tested, triples_passing, undecided, coverage, type_classes)


# ---------------------------------------------------------------------------
# candidates passing every degree-three test


def _weak_parameters(m: int, r: int) -> Tuple[int, int, int]:
    if r == 2 * m:
        if m < 9 or m in (10, 15):
            raise ValueError(f"m = {m} is outside the range (m >= 9, m not 10 or 15) for r = 2m")
        k = math.isqrt(m)
        t = k + -(-(m - k * k) // 2)
        tp = k + (m - k * k) // 2
        return k, t, tp
    k = math.isqrt(r - m) if r > m else 0
    if k * k != r - m or k == 0:
        raise ValueError(f"(m, r) = ({m}, {r}): need r = 2m or r = m + k^2")
    if 2 * m > k**3 - k**2:
        raise ValueError(f"m = {m} exceeds k^3/2 - k^2/2 for k = {k}")
    return k, k, k


def _weak_tensor(m: int, supports: Sequence[set], seed: int = 0) -> Tensor3:
    """A concise tensor sum_i a_i (x) b_s(i) (x) c_t(i) whose slice spaces
    avoid the given supports (pairs in A(x)B, A(x)C, B(x)C)."""
    rng = np.random.default_rng(seed)
    for _ in range(10000):
        s = rng.permutation(m)
        t = rng.permutation(m)
        if all((i, int(s[i])) not in supports[0] and (i, int(t[i])) not in supports[1]
               and (int(s[i]), int(t[i])) not in supports[2] for i in range(m)):
            return Tensor3((m, m, m), {(i, int(s[i]), int(t[i])): 1 for i in range(m)})
    raise RuntimeError("no suitable tensor found")  # pragma: no cover


def weak_candidate(m: int, r: int, T: Optional[Tensor3] = None) -> Tuple[CandidateSpace, CandidateSpace, CandidateSpace]:
    """Explicit candidates passing all degree-three tests for border rank ``r``.

    ``E'`` is ``<a_1..a_k> (x) <b_1..b_k>`` plus the tails
    ``<a_{k+1}..a_{t'}> (x) b_1`` and ``a_1 (x) <b_{k+1}..b_t>`` (and the same
    pattern in the other two grades), with ``k = floor(sqrt m)`` for
    ``r = 2m`` or ``r = m + k^2`` without tails.  ``T`` must be concise in
    ``C^m (x) C^m (x) C^m`` with slice spaces meeting the ``E'`` trivially;
    by default a permuted unit tensor is constructed.

    Raises:
        ValueError: ``(m, r)`` out of range, or ``T`` unsuitable.
    """
    k, t, tp = _weak_parameters(m, r)
    supp = set((i, j) for i in range(k) for j in range(k))
    supp |= {(i, 0) for i in range(k, tp)}
    supp |= {(0, j) for j in range(k, t)}
    if len(supp) != r - m:
        raise ValueError("internal dimension mismatch")  # pragma: no cover
    if T is None:
        T = _weak_tensor(m, [supp, supp, supp])
    if T.dims != (m, m, m):
        raise ValueError("tensor dims must be (m, m, m)")
    out = []
    for g in [(1, 1, 0), (1, 0, 1), (0, 1, 1)]:
        S = slice_candidate(T, g)
        if S.dim != m:
            raise ValueError("tensor is not concise")
        extra = [unit(i, j, m) for i, j in sorted(supp)]
        if SparseEchelon_rank(S.basis + extra) != S.dim + len(extra):
            raise ValueError(f"slice space of grade {g} meets E'")
        out.append(CandidateSpace(g, (m, m), S.basis + extra, [], S.dim, ["E'"] * len(extra), r,
                                  {"k": k, "t": t, "t_prime": tp}))
    return tuple(out)
