"""Exact linear algebra over Q and Q(zeta_12).

Dense routines work on lists of lists (or numpy object arrays) of
``int``/``Fraction``/:class:`~borderlab.scalar.Cyclotomic12`.  The sparse
:class:`SparseEchelon` keeps vectors as ``{index: value}`` dicts and is what
the apolarity tests use for kernels and subspace intersections.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..scalar import Cyclotomic12, PrimeFieldElement

__all__ = [
    "SparseEchelon",
    "as_rows",
    "intersect",
    "kernel_basis",
    "rank_exact",
    "rank_bareiss",
    "rref",
    "sparse_intersect",
    "sparse_kernel_dim",
    "sparse_rank",
]

Vector = Dict[int, Any]


def as_rows(M: Any) -> List[List[Any]]:
    """Copy a matrix-like object into a list of row lists."""
    if isinstance(M, np.ndarray):
        if M.ndim != 2:
            raise ValueError("expected a 2-d array")
        return [[_py(x) for x in row] for row in M.tolist()]
    return [[_py(x) for x in row] for row in M]


def _py(x: Any) -> Any:
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _is_cyclotomic(rows: Sequence[Sequence[Any]]) -> bool:
    return any(isinstance(x, Cyclotomic12) for row in rows for x in row)


def _integerize(rows: List[List[Any]]) -> List[List[int]]:
    """Scale each row of a rational matrix by the lcm of its denominators."""
    out = []
    for row in rows:
        fr = [Fraction(x) for x in row]
        d = 1
        for x in fr:
            d = lcm(d, x.denominator)
        out.append([int(x * d) for x in fr])
    return out


def rank_bareiss(M: Any) -> Tuple[int, List[int]]:
    """Rank of an integer/rational matrix by fraction-free elimination.

    Pivots are chosen as the entry of largest absolute value in the current
    column.  Returns ``(rank, pivot_columns)``.
    """
    rows = _integerize(as_rows(M))
    if not rows or not rows[0]:
        return 0, []
    A = np.array(rows, dtype=object)
    n, m = A.shape
    prev = 1
    r = 0
    pivots: List[int] = []
    for c in range(m):
        if r == n:
            break
        col = A[r:, c]
        best, best_abs = -1, 0
        for i, v in enumerate(col):
            av = abs(v)
            if av > best_abs:
                best, best_abs = i, av
        if best < 0:
            continue
        piv = r + best
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        p = A[r, c]
        if r + 1 < n and c + 1 < m:
            sub = A[r + 1:, c + 1:]
            A[r + 1:, c + 1:] = (sub * p - np.outer(A[r + 1:, c], A[r, c + 1:])) // prev
        A[r + 1:, c] = 0
        prev = p
        pivots.append(c)
        r += 1
    return r, pivots


def rref(M: Any) -> Tuple[List[List[Any]], List[int]]:
    """Reduced row echelon form over the field of the entries.

    Works for ``Fraction``, :class:`Cyclotomic12` and prime field entries.
    Integers are promoted to ``Fraction``.
    """
    rows = as_rows(M)
    A = [[Fraction(x) if isinstance(x, int) else x for x in row] for row in rows]
    n = len(A)
    m = len(A[0]) if n else 0
    pivots: List[int] = []
    r = 0
    for c in range(m):
        if r == n:
            break
        piv = next((i for i in range(r, n) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(n):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
    return A, pivots


def rank_exact(M: Any) -> int:
    """Exact rank over Q (fraction-free elimination) or Q(zeta_12) (field elimination)."""
    rows = as_rows(M)
    if not rows or not rows[0]:
        return 0
    if _is_cyclotomic(rows):
        return len(rref(rows)[1])
    if any(isinstance(x, PrimeFieldElement) for row in rows for x in row):
        raise TypeError("use rank_modp for prime field matrices")
    return rank_bareiss(rows)[0]


def kernel_basis(M: Any, ncols: Optional[int] = None) -> List[List[Any]]:
    """Basis of the right kernel ``{v : M v = 0}``; its size is ``cols - rank``."""
    rows = as_rows(M)
    if not rows:
        if ncols is None:
            raise ValueError("ncols required for an empty matrix")
        m = ncols
        R: List[List[Any]] = []
        pivots: List[int] = []
    else:
        m = len(rows[0])
        R, pivots = rref(rows)
    zero = R[0][0] * 0 if R else Fraction(0)
    one = zero + 1
    free = [c for c in range(m) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [zero] * m
        v[f] = one
        for i, pc in enumerate(pivots):
            v[pc] = -R[i][f]
        basis.append(v)
    return basis


def intersect(spaces: Sequence[Sequence[Sequence[Any]]], ambient_dim: int) -> List[List[Any]]:
    """Basis of the intersection of subspaces given by spanning vectors.

    Each subspace is a list of vectors of length ``ambient_dim``.  Works over
    any field supported by :func:`rref`.
    """
    if not spaces:
        raise ValueError("need at least one subspace")
    cur = _independent(spaces[0], ambient_dim)
    for sp in spaces[1:]:
        other = _independent(sp, ambient_dim)
        if not cur or not other:
            return []
        # solutions of sum a_i u_i = sum b_j v_j, i.e. kernel of [U | -V]
        cols = [list(u) for u in cur] + [[-x for x in v] for v in other]
        mat = [[cols[j][i] for j in range(len(cols))] for i in range(ambient_dim)]
        ker = kernel_basis(mat)
        new = []
        for kv in ker:
            vec = [sum((kv[i] * cur[i][t] for i in range(len(cur))), 0 * kv[0]) for t in range(ambient_dim)]
            new.append(vec)
        cur = _independent(new, ambient_dim)
    return cur


def _independent(vectors: Sequence[Sequence[Any]], n: int) -> List[List[Any]]:
    if not vectors:
        return []
    R, piv = rref([list(v) for v in vectors])
    return [R[i] for i in range(len(piv))]


# ---------------------------------------------------------------------------
# sparse elimination


class SparseEchelon:
    """Incremental row echelon form of sparse vectors.

    Vectors are ``{coordinate: value}`` dicts.  Each stored row is
    normalized to leading coefficient 1 at its smallest coordinate (its
    pivot).  With ``modulus`` set, values are ints reduced mod that prime;
    otherwise ``Fraction`` arithmetic is used (``int`` inputs are promoted).
    """

    def __init__(self, modulus: Optional[int] = None):
        self.modulus = modulus
        self.rows: Dict[int, Vector] = {}

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def rank(self) -> int:
        return len(self.rows)

    def _clean(self, v: Vector) -> Vector:
        p = self.modulus
        if p is None:
            return {k: (Fraction(x) if isinstance(x, int) else x) for k, x in v.items() if x}
        out = {}
        for k, x in v.items():
            if isinstance(x, Fraction):
                if x.denominator % p == 0:
                    from ..scalar import BadPrime

                    raise BadPrime(p, str(x))
                x = x.numerator * pow(x.denominator, -1, p)
            x = int(x) % p
            if x:
                out[k] = x
        return out

    def reduce(self, v: Vector) -> Vector:
        """Reduce ``v`` against the stored rows (leading-term reduction)."""
        row = self._clean(v)
        p = self.modulus
        done: Dict[int, Any] = {}
        while row:
            c = min(row)
            pr = self.rows.get(c)
            if pr is None:
                # keep the leading term, continue reducing the tail
                done[c] = row.pop(c)
                continue
            f = row[c]
            for k, x in pr.items():
                if k in row:
                    y = row[k] - f * x
                    if p is not None:
                        y %= p
                    if y:
                        row[k] = y
                    else:
                        del row[k]
                else:
                    y = -f * x
                    if p is not None:
                        y %= p
                    row[k] = y
        return done

    def add(self, v: Vector) -> bool:
        """Insert ``v``; return True iff it was independent of the stored rows."""
        row = self._clean(v)
        p = self.modulus
        while row:
            c = min(row)
            pr = self.rows.get(c)
            if pr is None:
                f = row[c]
                if p is None:
                    inv = 1 / f
                    row = {k: x * inv for k, x in row.items()}
                else:
                    inv = pow(f, -1, p)
                    row = {k: x * inv % p for k, x in row.items()}
                self.rows[c] = row
                return True
            f = row[c]
            for k, x in pr.items():
                y = row.get(k, 0) - f * x
                if p is not None:
                    y %= p
                if y:
                    row[k] = y
                else:
                    row.pop(k, None)
        return False

    def contains(self, v: Vector) -> bool:
        return not self.reduce(v)


def sparse_rank(vectors: Iterable[Vector], modulus: Optional[int] = None) -> int:
    ech = SparseEchelon(modulus)
    for v in vectors:
        ech.add(v)
    return ech.rank


def sparse_kernel_dim(columns: Sequence[Vector], modulus: Optional[int] = None) -> int:
    """Kernel dimension of the matrix whose columns are the given sparse vectors."""
    return len(columns) - sparse_rank(columns, modulus)


def sparse_intersect(spaces: Sequence[Sequence[Vector]], ambient_dim: int,
                     modulus: Optional[int] = None) -> List[Vector]:
    """Basis of the intersection of sparse subspaces (Zassenhaus' algorithm)."""
    if not spaces:
        raise ValueError("need at least one subspace")
    n = ambient_dim
    cur = _sparse_basis(spaces[0], modulus)
    for sp in spaces[1:]:
        if not cur:
            return []
        ech = SparseEchelon(modulus)
        for u in cur:
            w = dict(u)
            w.update({k + n: x for k, x in u.items()})
            ech.add(w)
        for v in sp:
            ech.add(dict(v))
        new = []
        for c, row in ech.rows.items():
            if c >= n:
                new.append({k - n: x for k, x in row.items()})
        cur = new
    return cur


def _sparse_basis(vectors: Sequence[Vector], modulus: Optional[int]) -> List[Vector]:
    ech = SparseEchelon(modulus)
    for v in vectors:
        ech.add(v)
    return list(ech.rows.values())
