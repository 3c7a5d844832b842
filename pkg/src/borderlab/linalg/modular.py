"""Modular ranks, rank certificates and finite-field minimum-rank certificates."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, List, Optional, Sequence

import numpy as np

from .. import _kernels
from ..scalar import BadPrime, PRIME_TABLE, PrimeFieldElement, is_prime, prime_for_seed

__all__ = [
    "BudgetExceeded",
    "MinRankCertificate",
    "RankCertificate",
    "certified_rank_modp",
    "integer_matrix",
    "min_rank_certificate",
    "projective_point",
    "projective_point_count",
    "rank_modp",
]


class BudgetExceeded(RuntimeError):
    """A computation would exceed its configured budget.

    ``partial`` carries whatever was computed before giving up.
    """

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class RankCertificate:
    """Record of a rank computation.

    For ``method == "mod-p"`` the rank is a lower bound for the rank over Q
    of the same integer matrix; for ``"exact"`` it is the rank.
    """

    rank: int
    method: str
    prime: Optional[int] = None
    seed: Optional[int] = None
    pivots: Optional[List[int]] = None

    def to_json(self) -> dict:
        d = {"rank": self.rank, "method": self.method, "prime": self.prime, "seed": self.seed}
        if self.pivots is not None:
            d["pivots"] = list(self.pivots)
        return d


def integer_matrix(M: Any, p: Optional[int] = None) -> np.ndarray:
    """Convert a matrix of ints/Fractions/prime-field elements to an int64 array.

    With ``p`` given, rationals are reduced mod ``p`` (raising
    :class:`BadPrime` when a denominator vanishes) and the result lies in
    ``[0, p)``.  Without ``p`` all entries must be integers fitting in int64.
    """
    if isinstance(M, np.ndarray) and M.dtype != object:
        A = M.astype(np.int64)
        return A % p if p is not None else A
    rows = M.tolist() if isinstance(M, np.ndarray) else M
    n = len(rows)
    m = len(rows[0]) if n else 0
    out = np.zeros((n, m), dtype=np.int64)
    for i, row in enumerate(rows):
        for j, x in enumerate(row):
            if isinstance(x, PrimeFieldElement):
                if p is not None and x.p != p:
                    raise ValueError("prime mismatch")
                out[i, j] = x.value
            elif isinstance(x, Fraction) and x.denominator != 1:
                if p is None:
                    raise ValueError("non-integer entry without a prime")
                if x.denominator % p == 0:
                    raise BadPrime(p, str(x))
                out[i, j] = x.numerator * pow(x.denominator, -1, p) % p
            else:
                v = int(x)
                out[i, j] = v % p if p is not None else v
    return out


def rank_modp(M: Any, p: int) -> int:
    """Rank over ``F_p`` of an integer (or reducible rational) matrix."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    A = integer_matrix(M, p)
    if A.size == 0:
        return 0
    return _kernels.rank_mod_p(A, p)


def certified_rank_modp(M: Any, seed: int = 0, prime: Optional[int] = None,
                        max_retries: int = len(PRIME_TABLE)) -> RankCertificate:
    """Modular rank with automatic prime choice and :class:`BadPrime` retry."""
    last: Optional[BadPrime] = None
    for attempt in range(max_retries):
        p = prime if (prime is not None and attempt == 0) else prime_for_seed(seed, attempt)
        try:
            r = rank_modp(M, p)
        except BadPrime as exc:
            last = exc
            continue
        return RankCertificate(rank=r, method="mod-p", prime=p, seed=seed)
    raise last if last is not None else RuntimeError("no prime available")


# ---------------------------------------------------------------------------
# minimum-rank certificates


def projective_point_count(p: int, d: int) -> int:
    return (p**d - 1) // (p - 1)


def projective_point(index: int, d: int, p: int) -> List[int]:
    """Normalized coefficients (first nonzero = 1) of the ``index``-th point of P^{d-1}(F_p)."""
    return [int(x) for x in _kernels._point_coeffs(index, d, p)]


@dataclass
class MinRankCertificate:
    """Outcome of an exhaustive minimum-rank scan over ``P(S (x) F_p)``.

    ``rho`` is the minimum F_p-rank.  Every nonzero rational element of the
    space has rank at least ``rho`` (reduce a primitive integer multiple
    mod ``p``).  Soundness is over Q only: over C smaller ranks may occur.
    """

    rho: int
    prime: int
    dim: int
    points: int
    witness: List[int]
    complete: bool = True
    checkpoints: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def min_rank_certificate(basis: Sequence[Any], p: int, budget: int = 10**7,
                         checkpoint_every: int = 10**6) -> MinRankCertificate:
    """Minimum rank over all points of the projectivized space ``P(S (x) F_p)``.

    Args:
        basis: integer matrices spanning ``S`` (all the same shape).
        p: a prime (small primes are the intended use).
        budget: maximum number of projective points to visit.
        checkpoint_every: progress records are taken at this interval.

    Raises:
        BudgetExceeded: if the point count exceeds ``budget``.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    mats = [integer_matrix(np.asarray(b, dtype=object) if not isinstance(b, np.ndarray) else b, p)
            for b in basis]
    d = len(mats)
    if d == 0:
        raise ValueError("empty matrix space")
    total = projective_point_count(p, d)
    if total > budget:
        raise BudgetExceeded(f"{total} projective points exceed the budget {budget}",
                             partial={"points": total, "dim": d, "prime": p})
    B = np.stack(mats)
    best, best_idx = 1 << 30, -1
    checkpoints = []
    start = 0
    while start < total:
        stop = min(total, start + checkpoint_every)
        r, idx = _kernels.min_rank_projective(B, p, start, stop, floor=0)
        if r < best:
            best, best_idx = r, idx
        checkpoints.append({"scanned": stop, "min_rank": best})
        if best == 0:
            break
        start = stop
    return MinRankCertificate(rho=int(best), prime=p, dim=d, points=total,
                              witness=projective_point(best_idx, d, p), checkpoints=checkpoints)
