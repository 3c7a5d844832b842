"""Order-3 tensors, the tensor catalog, Kronecker products and slice spaces.

A :class:`Tensor3` stores its nonzero entries sparsely as a dict keyed by
``(i, j, k)``; :meth:`Tensor3.to_dense` and :meth:`Tensor3.from_dense`
convert losslessly.  Kronecker products flatten index pairs row-major,
``(i, i') -> i * d' + i'``.
"""

from __future__ import annotations

import itertools
import json
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .linalg import rank_exact, rank_modp
from .linalg.exact import SparseEchelon
from .scalar import (
    Cyclotomic12,
    PrimeFieldElement,
    parse_scalar,
    prime_for_seed,
    scalar_to_str,
)

__all__ = [
    "CATALOG_NAMES",
    "MatrixSpace",
    "Tensor3",
    "catalog",
    "from_spec",
    "is_1generic",
    "is_concise",
    "kron_power",
    "kronecker",
    "slice_space",
    "torus_lattice",
]

Index = Tuple[int, int, int]

FACTORS = ("A", "B", "C")


def _factor_index(factor: Any) -> int:
    if isinstance(factor, int):
        if factor not in (0, 1, 2):
            raise ValueError(f"bad factor {factor}")
        return factor
    f = str(factor).upper()
    if f not in FACTORS:
        raise ValueError(f"bad factor {factor!r}; expected A, B or C")
    return FACTORS.index(f)


def _field_of(values: Iterable[Any]) -> str:
    field = "rational"
    for v in values:
        if isinstance(v, Cyclotomic12):
            field = "cyclotomic12"
        elif isinstance(v, PrimeFieldElement):
            return f"fp:{v.p}"
        elif isinstance(v, (complex, float)) or type(v).__module__.startswith("mpmath"):
            return "complex"
    return field


class Tensor3:
    """Sparse order-3 tensor in ``A (x) B (x) C``.

    Args:
        dims: ``(dA, dB, dC)``.
        entries: mapping ``(i, j, k) -> value``; zero values are dropped.
        field: scalar field descriptor (inferred from the values if omitted).
    """

    __slots__ = ("dims", "_entries", "field")

    def __init__(self, dims: Sequence[int], entries: Optional[Dict[Index, Any]] = None,
                 field: Optional[str] = None):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d < 0 for d in dims):
            raise ValueError(f"bad dims {dims}")
        clean: Dict[Index, Any] = {}
        for key, v in (entries or {}).items():
            i, j, k = (int(x) for x in key)
            if not (0 <= i < dims[0] and 0 <= j < dims[1] and 0 <= k < dims[2]):
                raise IndexError(f"index {(i, j, k)} outside dims {dims}")
            if isinstance(v, np.integer):
                v = int(v)
            if v:
                clean[(i, j, k)] = v
        self.dims = dims
        self._entries = clean
        self.field = field or _field_of(clean.values())

    # -- basic protocol -----------------------------------------------------

    def __getitem__(self, idx: Index) -> Any:
        return self._entries.get(tuple(idx), 0)

    def items(self) -> Iterator[Tuple[Index, Any]]:
        return iter(sorted(self._entries.items()))

    @property
    def entries(self) -> Dict[Index, Any]:
        return dict(self._entries)

    @property
    def support(self) -> List[Index]:
        return sorted(self._entries)

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def __len__(self) -> int:
        return self.nnz

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor3):
            return NotImplemented
        return self.dims == other.dims and self._entries == other._entries

    def __hash__(self):
        return hash((self.dims, tuple(sorted(self._entries.items()))))

    def __repr__(self) -> str:
        return f"Tensor3(dims={self.dims}, nnz={self.nnz}, field={self.field!r})"

    def __add__(self, other: "Tensor3") -> "Tensor3":
        if self.dims != other.dims:
            raise ValueError("dims mismatch")
        d = dict(self._entries)
        for key, v in other._entries.items():
            d[key] = d.get(key, 0) + v
        return Tensor3(self.dims, d)

    def __neg__(self) -> "Tensor3":
        return Tensor3(self.dims, {k: -v for k, v in self._entries.items()}, self.field)

    def __sub__(self, other: "Tensor3") -> "Tensor3":
        return self + (-other)

    def scale(self, c: Any) -> "Tensor3":
        return Tensor3(self.dims, {k: c * v for k, v in self._entries.items()})

    def map_values(self, f) -> "Tensor3":
        return Tensor3(self.dims, {k: f(v) for k, v in self._entries.items()})

    # -- conversions --------------------------------------------------------

    def to_dense(self, dtype: Any = object) -> np.ndarray:
        arr = np.zeros(self.dims, dtype=dtype)
        if dtype is object:
            arr[...] = 0
        for (i, j, k), v in self._entries.items():
            arr[i, j, k] = v
        return arr

    @classmethod
    def from_dense(cls, arr: Any, field: Optional[str] = None) -> "Tensor3":
        a = np.asarray(arr)
        if a.ndim != 3:
            raise ValueError("expected a 3-way array")
        entries = {}
        for idx in zip(*np.nonzero(a)):
            v = a[idx]
            if isinstance(v, np.integer):
                v = int(v)
            elif isinstance(v, np.floating):
                v = float(v)
            elif isinstance(v, np.complexfloating):
                v = complex(v)
            entries[tuple(int(x) for x in idx)] = v
        return cls(a.shape, entries, field)

    def permute_factors(self, perm: Sequence[int]) -> "Tensor3":
        """Reorder the factors: new factor ``n`` is old factor ``perm[n]``."""
        perm = tuple(perm)
        dims = tuple(self.dims[p] for p in perm)
        return Tensor3(dims, {tuple(key[p] for p in perm): v for key, v in self._entries.items()}, self.field)

    def relabel(self, maps: Sequence[Sequence[int]]) -> "Tensor3":
        """Apply index permutations ``maps[f][old] = new`` per factor."""
        return Tensor3(self.dims, {(maps[0][i], maps[1][j], maps[2][k]): v
                                   for (i, j, k), v in self._entries.items()}, self.field)

    def is_symmetric(self) -> bool:
        if len(set(self.dims)) != 1:
            return False
        for key, v in self._entries.items():
            for p in itertools.permutations(key):
                if self._entries.get(p, 0) != v:
                    return False
        return True

    def flattening(self, factor: Any) -> np.ndarray:
        """Matrix of ``factor^* -> (other two factors)``: rows index the chosen factor."""
        f = _factor_index(factor)
        others = [g for g in range(3) if g != f]
        n1 = self.dims[others[1]]
        M = np.zeros((self.dims[f], self.dims[others[0]] * n1), dtype=object)
        M[...] = 0
        for key, v in self._entries.items():
            M[key[f], key[others[0]] * n1 + key[others[1]]] = v
        return M

    # -- files --------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "field": self.field,
            "entries": [[i, j, k, scalar_to_str(v)] for (i, j, k), v in self.items()],
        }

    @classmethod
    def from_json(cls, data: Any) -> "Tensor3":
        if isinstance(data, str):
            data = json.loads(data)
        field = data.get("field", "rational")
        entries = {}
        for i, j, k, v in data["entries"]:
            entries[(int(i), int(j), int(k))] = parse_scalar(str(v), field)
        return cls(data["dims"], entries, field)


# ---------------------------------------------------------------------------
# matrix spaces


class MatrixSpace:
    """A linear space of ``dA x dB`` matrices given by a basis.

    The basis is checked for linear independence at construction (exactly,
    over the field of the entries).
    """

    def __init__(self, dims: Sequence[int], basis: Sequence[Any], check: bool = True):
        self.dims = (int(dims[0]), int(dims[1]))
        mats = []
        for b in basis:
            a = np.array(b, dtype=object)
            if a.shape != self.dims:
                raise ValueError(f"basis matrix of shape {a.shape}, expected {self.dims}")
            mats.append(a)
        self.basis = mats
        if check and mats:
            r = rank_exact([m.reshape(-1).tolist() for m in mats])
            if r != len(mats):
                raise ValueError("basis matrices are linearly dependent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __len__(self) -> int:
        return self.dim

    def vectors(self) -> List[Dict[int, Any]]:
        """Basis as sparse vectors in ``A (x) B`` (index ``i * dB + j``)."""
        dB = self.dims[1]
        out = []
        for m in self.basis:
            v = {}
            for (i, j), x in np.ndenumerate(m):
                if x:
                    v[i * dB + j] = x
            out.append(v)
        return out

    def integer_basis(self) -> List[np.ndarray]:
        return [m.astype(np.int64) for m in self.basis]

    def generic_element(self, seed: int = 0, lo: int = -9, hi: int = 9) -> np.ndarray:
        rng = np.random.default_rng(seed)
        coeffs = rng.integers(lo, hi + 1, size=self.dim)
        acc = np.zeros(self.dims, dtype=object)
        acc[...] = 0
        for c, m in zip(coeffs, self.basis):
            acc = acc + int(c) * m
        return acc

    def __repr__(self) -> str:
        return f"MatrixSpace(dims={self.dims}, dim={self.dim})"


def slice_space(T: Tensor3, factor: Any = "C") -> MatrixSpace:
    """The image ``T(factor^*)`` as a space of matrices on the other two factors.

    Images of dual basis vectors are kept in index order, skipping zero
    images (and, for non-concise tensors, images dependent on earlier ones).
    """
    f = _factor_index(factor)
    others = [g for g in range(3) if g != f]
    dims = (T.dims[others[0]], T.dims[others[1]])
    slices: Dict[int, Dict[Tuple[int, int], Any]] = {}
    for key, v in T._entries.items():
        slices.setdefault(key[f], {})[(key[others[0]], key[others[1]])] = v
    basis = []
    ech = SparseEchelon()
    for idx in sorted(slices):
        ent = slices[idx]
        vec = {a * dims[1] + b: x for (a, b), x in ent.items()}
        if any(isinstance(x, Cyclotomic12) for x in ent.values()):
            # SparseEchelon works over Q; cyclotomic slices fall back to dense rank
            cand = basis + [ent]
            mats = [[e.get((a, b), 0) for a in range(dims[0]) for b in range(dims[1])] for e in cand]
            if rank_exact(mats) == len(cand):
                basis.append(ent)
            continue
        if ech.add(vec):
            basis.append(ent)
    mats = []
    for ent in basis:
        m = np.zeros(dims, dtype=object)
        m[...] = 0
        for (a, b), x in ent.items():
            m[a, b] = x
        mats.append(m)
    return MatrixSpace(dims, mats, check=False)


def is_concise(T: Tensor3) -> Tuple[bool, bool, bool]:
    """Per factor, whether the flattening from that factor's dual is injective."""
    out = []
    for f in range(3):
        if T.dims[f] == 0:
            out.append(True)
            continue
        out.append(slice_space(T, f).dim == T.dims[f])
    return tuple(out)  # type: ignore[return-value]


def is_1generic(T: Tensor3, factor: Any = "A", seeds: Sequence[int] = (0, 1, 2)) -> bool:
    """Whether ``T(factor^*)`` contains a matrix of full rank ``m``.

    Pseudo-random integer combinations are ranked modulo a table prime; a
    full mod-p rank is confirmed by an exact rank computation of the same
    integer matrix (mod-p rank never exceeds rational rank, so this is a
    certificate).
    """
    if len(set(T.dims)) != 1:
        raise ValueError("is_1generic needs dA = dB = dC")
    m = T.dims[0]
    S = slice_space(T, factor)
    if S.dim == 0:
        return False
    for seed in seeds:
        M = S.generic_element(seed)
        p = prime_for_seed(seed)
        try:
            r = rank_modp(M, p)
        except Exception:
            r = -1
        if r == m and rank_exact(M) == m:
            return True
    return False


# ---------------------------------------------------------------------------
# Kronecker products


def kronecker(T: Tensor3, T2: Tensor3) -> Tensor3:
    """``T (x) T2`` regrouped as an order-3 tensor with row-major pair flattening."""
    dA, dB, dC = T2.dims
    entries = {}
    for (i, j, k), v in T._entries.items():
        for (i2, j2, k2), w in T2._entries.items():
            entries[(i * dA + i2, j * dB + j2, k * dC + k2)] = v * w
    dims = tuple(a * b for a, b in zip(T.dims, T2.dims))
    return Tensor3(dims, entries)


def kron_power(T: Tensor3, k: int) -> Tensor3:
    if k < 1:
        raise ValueError("power must be >= 1")
    out = T
    for _ in range(k - 1):
        out = kronecker(out, T)
    return out


# ---------------------------------------------------------------------------
# catalog


def _cw(q: int) -> Tensor3:
    if q < 1:
        raise ValueError("cw needs q >= 1")
    e = {}
    for j in range(1, q + 1):
        e[(0, j, j)] = 1
        e[(j, 0, j)] = 1
        e[(j, j, 0)] = 1
    return Tensor3((q + 1,) * 3, e)


def _skewcw(q: int) -> Tensor3:
    if q < 2 or q % 2:
        raise ValueError("skewcw needs an even q >= 2")
    p = q // 2
    e: Dict[Index, int] = {}
    for x in range(1, p + 1):
        y = x + p
        e[(0, x, y)] = 1
        e[(0, y, x)] = -1
        e[(x, 0, y)] = -1
        e[(y, 0, x)] = 1
        e[(x, y, 0)] = 1
        e[(y, x, 0)] = -1
    return Tensor3((q + 1,) * 3, e)


def _perm_sign(p: Sequence[int]) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def _eps3() -> Tensor3:
    return Tensor3((3, 3, 3), {tuple(p): _perm_sign(p) for p in itertools.permutations(range(3))})


def _cw2mono() -> Tensor3:
    """``sum_sigma a_s1 b_s2 c_s3``: the cubic ``x0 x1 x2`` as a symmetric tensor."""
    return Tensor3((3, 3, 3), {tuple(p): 1 for p in itertools.permutations(range(3))})


def _unit(r: int) -> Tensor3:
    return Tensor3((r, r, r), {(i, i, i): 1 for i in range(r)})


def _matmul(l: int, m: int, n: int) -> Tensor3:
    e = {}
    for i in range(l):
        for j in range(m):
            for k in range(n):
                e[(i * m + j, j * n + k, k * l + i)] = 1
    return Tensor3((l * m, m * n, n * l), e)


def _poly_tensor(n: int, signed: bool) -> Tensor3:
    """Symmetric tensor of the permanent/determinant with polynomial coefficients.

    Entry at a position triple is ``sgn / 6`` (``1/6`` for the permanent) when
    the three positions form a permutation pattern, so that evaluating at
    ``(X, X, X)`` gives the polynomial itself.
    """
    if n != 3:
        raise ValueError("only n = 3 is supported")
    e: Dict[Index, Fraction] = {}
    for sigma in itertools.permutations(range(3)):
        val = Fraction(_perm_sign(sigma) if signed else 1, 6)
        pos = [r * 3 + sigma[r] for r in range(3)]
        for order in itertools.permutations(pos):
            e[tuple(order)] = val
    return Tensor3((9, 9, 9), e)


def _random(dims: Sequence[int], seed: int, lo: int = -3, hi: int = 3, density: float = 1.0) -> Tensor3:
    rng = np.random.default_rng(seed)
    arr = rng.integers(lo, hi + 1, size=tuple(dims))
    if density < 1.0:
        arr = arr * (rng.random(size=tuple(dims)) < density)
    return Tensor3.from_dense(arr)


CATALOG_NAMES = ("cw", "skewcw", "cw2mono", "eps3", "unit", "matmul", "perm", "det",
                 "perm_poly", "det_poly", "zero", "random")


def catalog(name: str, *params: Any, **kw: Any) -> Tensor3:
    """Build a catalog tensor.

    Names and parameters:

    * ``cw(q)``: small Coppersmith-Winograd tensor, dims ``(q+1,)*3``.
    * ``skewcw(q)``: skew cousin, ``q`` even.
    * ``cw2mono()``: ``cw(2)`` in the basis where it is the monomial ``x0 x1 x2``.
    * ``eps3()``: the sign tensor, equal to ``skewcw(2)``.
    * ``unit(r)``, ``matmul(n)`` or ``matmul(l, m, n)``, ``zero(dA, dB, dC)``.
    * ``perm(3)`` / ``det(3)``: Kronecker squares of ``cw2mono`` / ``eps3``;
      ``perm_poly(3)`` / ``det_poly(3)`` use polynomial coefficients
      (``1/6`` of the Kronecker-square entries).
    * ``random(dA, dB, dC, seed=0)``: integer entries in ``[-3, 3]``.
    """
    name = name.lower()
    if name == "cw":
        return _cw(int(params[0]))
    if name == "skewcw":
        return _skewcw(int(params[0]))
    if name == "cw2mono":
        return _cw2mono()
    if name == "eps3":
        return _eps3()
    if name == "unit":
        return _unit(int(params[0]))
    if name == "matmul":
        if len(params) == 1:
            n = int(params[0])
            return _matmul(n, n, n)
        return _matmul(*(int(x) for x in params))
    if name in ("perm", "det"):
        n = int(params[0]) if params else 3
        if n != 3:
            raise ValueError("only n = 3 is supported")
        base = _cw2mono() if name == "perm" else _eps3()
        return kronecker(base, base)
    if name in ("perm_poly", "det_poly"):
        n = int(params[0]) if params else 3
        return _poly_tensor(n, signed=(name == "det_poly"))
    if name == "zero":
        dims = [int(x) for x in params] if params else [3, 3, 3]
        if len(dims) == 1:
            dims = dims * 3
        return Tensor3(dims, {})
    if name == "random":
        dims = [int(x) for x in params[:3]] if params else [3, 3, 3]
        seed = int(kw.get("seed", params[3] if len(params) > 3 else 0))
        return _random(dims, seed)
    raise ValueError(f"unknown catalog tensor {name!r}; known: {', '.join(CATALOG_NAMES)}")


def from_spec(spec: str, power: int = 1) -> Tensor3:
    """Parse a command-line tensor spec such as ``"skewcw:4"``, ``"det:3"`` or ``"matmul:2,2,2"``.

    ``power`` > 1 takes a Kronecker power.  A path ending in ``.json`` is
    read as a tensor file.
    """
    if spec.endswith(".json"):
        with open(spec) as fh:
            T = Tensor3.from_json(json.load(fh))
    else:
        name, _, rest = spec.partition(":")
        params = [p for p in rest.split(",") if p] if rest else []
        T = catalog(name, *params)
    return kron_power(T, power) if power > 1 else T


# ---------------------------------------------------------------------------
# torus weights


def torus_lattice(T: Tensor3) -> List[List[Fraction]]:
    """Weights of the diagonal torus preserving ``T``.

    Returns one weight vector per basis coordinate, for all three factors
    concatenated (``dA + dB + dC`` rows).  The torus is the kernel of the
    support equations ``alpha_i + beta_j + gamma_k = 0``; row ``n`` is the
    linear form giving the weight of the ``n``-th basis vector.
    """
    from .linalg import kernel_basis

    dA, dB, dC = T.dims
    n = dA + dB + dC
    rows = []
    for (i, j, k) in T.support:
        r = [0] * n
        r[i] += 1
        r[dA + j] += 1
        r[dA + dB + k] += 1
        rows.append(r)
    if not rows:
        return [[Fraction(int(a == b)) for b in range(n)] for a in range(n)]
    K = kernel_basis(rows, ncols=n)
    return [[K[c][v] for c in range(len(K))] for v in range(n)]
