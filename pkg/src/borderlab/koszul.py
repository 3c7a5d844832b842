"""Koszul flattenings and the border-rank lower bounds they certify.

For ``T`` in ``A (x) B (x) C`` the ``p``-th Koszul flattening is

    T_A^{wedge p} : Lambda^p A (x) B^*  ->  Lambda^{p+1} A (x) C,
    X (x) beta  |->  sum_{ijk} T^{ijk} beta(b_j) (a_i wedge X) (x) c_k.

If ``dim A = 2p+1`` then ``rank T_A^{wedge p} / binom(2p, p)`` is a lower
bound for the border rank.  Larger ``A`` is first projected onto a
pseudo-random ``2p+1`` dimensional quotient; the projected tensor is a
degeneration of ``T``, so the bound holds for every projection, generic or
not.  Ranks are computed modulo a prime, which can only under-estimate the
rank over Q, so modular bounds are certified as well.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .linalg import BudgetExceeded, RankCertificate, certified_rank_modp, rank_bareiss
from .tensor import Tensor3, _factor_index, from_spec

__all__ = [
    "KoszulBound",
    "bound_table",
    "koszul_map",
    "koszul_shape",
    "lower_bound",
    "restrict_generic",
]

# put the chosen factor first, keeping the cyclic order of the other two
_CYCLIC = {0: (0, 1, 2), 1: (1, 2, 0), 2: (2, 0, 1)}


def koszul_shape(dims: Sequence[int], p: int, factor: Any = "A") -> tuple:
    """``(rows, cols)`` of the Koszul flattening for tensors of the given dims."""
    f = _factor_index(factor)
    a, b, c = (dims[x] for x in _CYCLIC[f])
    return math.comb(a, p + 1) * c, math.comb(a, p) * b


def koszul_map(T: Tensor3, factor: Any = "A", p: int = 1) -> np.ndarray:
    """Matrix of ``Lambda^p F (x) G^* -> Lambda^{p+1} F (x) H``.

    ``F`` is the chosen factor; ``(G, H)`` are the remaining factors in
    cyclic order (``(B, C)`` for ``A``, ``(C, A)`` for ``B``, ``(A, B)``
    for ``C``).  Rows are indexed by (sorted ``p+1``-subset, ``H`` index),
    columns by (sorted ``p``-subset, ``G`` index), both lexicographically.
    Inserting ``a_i`` in front of ``a_S`` contributes the sign
    ``(-1)^{#{s in S : s < i}}``.
    """
    f = _factor_index(factor)
    S = T.permute_factors(_CYCLIC[f]) if f else T
    a, b, c = S.dims
    if not 0 <= p < max(a, 1):
        raise ValueError(f"p = {p} out of range for a factor of dimension {a}")
    lo = list(combinations(range(a), p))
    hi = list(combinations(range(a), p + 1))
    hi_index = {s: n for n, s in enumerate(hi)}
    acc: Dict[tuple, Any] = {}
    by_j: Dict[int, List[tuple]] = {}
    for (i, j, k), v in S.items():
        by_j.setdefault(j, []).append((i, k, v))
    for col_set, subset in enumerate(lo):
        members = set(subset)
        for j, lst in by_j.items():
            col = col_set * b + j
            for i, k, v in lst:
                if i in members:
                    continue
                below = sum(1 for s in subset if s < i)
                sign = -1 if below % 2 else 1
                new = tuple(sorted(subset + (i,)))
                key = (hi_index[new] * c + k, col)
                acc[key] = acc.get(key, 0) + sign * v
    shape = (len(hi) * c, len(lo) * b)
    integral = all(isinstance(v, (int, np.integer)) and abs(v) < 2**62 for v in acc.values())
    M = np.zeros(shape, dtype=np.int64 if integral else object)
    if not integral:
        M[...] = 0
    for (r, col), v in acc.items():
        M[r, col] = v
    return M


def restrict_generic(T: Tensor3, factor: Any = "A", target_dim: Optional[int] = None,
                     seed: int = 0, projection: Any = None) -> Tensor3:
    """Compose ``T`` with a pseudo-random projection of one factor.

    The projection is ``target_dim x dim`` with integer entries uniform in
    ``[-9, 9]`` drawn from ``numpy.random.default_rng(seed)``.  Pass
    ``projection="identity"`` to skip (``target_dim`` must then equal the
    factor dimension) or an explicit integer matrix.
    """
    f = _factor_index(factor)
    d = T.dims[f]
    if target_dim is None:
        target_dim = d
    if target_dim > d:
        raise ValueError("target_dim exceeds the factor dimension")
    if isinstance(projection, str) and projection == "identity":
        if target_dim != d:
            raise ValueError("identity projection needs target_dim == dim")
        return T
    if projection is None:
        rng = np.random.default_rng(seed)
        P = rng.integers(-9, 10, size=(target_dim, d))
    else:
        P = np.asarray(projection)
        if P.shape != (target_dim, d):
            raise ValueError("projection has the wrong shape")
    entries: Dict[tuple, Any] = {}
    for key, v in T.items():
        i = key[f]
        for a in range(target_dim):
            w = int(P[a, i])
            if w:
                nk = list(key)
                nk[f] = a
                nk = tuple(nk)
                entries[nk] = entries.get(nk, 0) + w * v
    dims = list(T.dims)
    dims[f] = target_dim
    return Tensor3(dims, entries)


@dataclass
class KoszulBound:
    """A certified border-rank lower bound ``ceil(rank / binom(2p, p))``."""

    tensor_id: str
    factor: str
    p: int
    restriction_dim: int
    seed: int
    prime: Optional[int]
    rank: int
    bound: int
    certificate: RankCertificate
    shape: tuple = ()
    per_seed: List[dict] = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "tensor": self.tensor_id,
            "factor": self.factor,
            "p": self.p,
            "restriction_dim": self.restriction_dim,
            "seed": self.seed,
            "prime": self.prime,
            "rank": self.rank,
            "bound": self.bound,
            "matrix_shape": list(self.shape),
            "certificate": self.certificate.to_json(),
            "per_seed": self.per_seed,
        }


def _bound_from_rank(rank: int, p: int) -> int:
    denom = math.comb(2 * p, p)
    return -(-rank // denom)


def lower_bound(T: Tensor3, factor: Any = "A", p: int = 1, seeds: Sequence[int] = (0, 1, 2),
                prime: Optional[int] = None, exact: bool = False,
                tensor_id: str = "") -> KoszulBound:
    """Best Koszul-flattening bound over the given restriction seeds.

    Args:
        T: the tensor.
        factor: factor to restrict and take exterior powers of.
        p: exterior power; the factor is projected to dimension ``2p+1``.
        seeds: restriction seeds (the maximum bound is returned).
        prime: modulus for the rank (default: chosen from the seed).
        exact: compute the exact rank over Q instead (fraction-free).
    """
    f = _factor_index(factor)
    n = 2 * p + 1
    if n > T.dims[f]:
        raise ValueError(f"2p+1 = {n} exceeds dim {T.dims[f]} of factor {factor}")
    best: Optional[KoszulBound] = None
    per_seed = []
    t0 = time.perf_counter()
    for seed in seeds:
        R = restrict_generic(T, f, n, seed) if n < T.dims[f] else T
        M = koszul_map(R, f, p)
        if exact:
            r, piv = rank_bareiss(M)
            cert = RankCertificate(rank=r, method="exact", seed=seed)
        else:
            cert = certified_rank_modp(M, seed=seed, prime=prime)
            r = cert.rank
        b = _bound_from_rank(r, p)
        per_seed.append({"seed": seed, "rank": r, "bound": b, "prime": cert.prime})
        if best is None or b > best.bound:
            best = KoszulBound(tensor_id=tensor_id, factor="ABC"[f], p=p, restriction_dim=n,
                               seed=seed, prime=cert.prime, rank=r, bound=b, certificate=cert,
                               shape=M.shape)
    assert best is not None
    best.per_seed = per_seed
    best.seconds = time.perf_counter() - t0
    return best


def bound_table(rows: Sequence[dict], max_matrix_dim: int = 6000, force: bool = False) -> List[dict]:
    """Evaluate a list of Koszul-bound rows.

    Each row is a dict with keys ``tensor`` (catalog spec, e.g.
    ``"skewcw:4"``), ``power``, ``p`` and optional ``factor``, ``seeds``,
    ``long`` (mark as long-running).  Rows whose flattening has more than
    ``max_matrix_dim`` rows/columns, or that are marked long-running, are
    skipped unless ``force``.
    """
    out = []
    for row in rows:
        spec = row["tensor"]
        power = int(row.get("power", 1))
        p = int(row["p"])
        factor = row.get("factor", "A")
        T = from_spec(spec, power)
        f = _factor_index(factor)
        dims = list(T.dims)
        dims[f] = 2 * p + 1
        shape = koszul_shape(dims, p, f)
        rec = {"tensor": spec, "power": power, "p": p, "factor": "ABC"[f], "matrix_shape": list(shape)}
        if not force and (max(shape) > max_matrix_dim or row.get("long")):
            rec["status"] = "skipped"
            rec["reason"] = "long-running row (use force)"
            out.append(rec)
            continue
        try:
            kb = lower_bound(T, f, p, seeds=row.get("seeds", (0, 1, 2)), tensor_id=f"{spec}^{power}")
        except BudgetExceeded as exc:  # pragma: no cover - defensive
            rec["status"] = "skipped"
            rec["reason"] = str(exc)
            out.append(rec)
            continue
        rec.update(kb.to_json())
        rec["status"] = "ok"
        out.append(rec)
    return out
