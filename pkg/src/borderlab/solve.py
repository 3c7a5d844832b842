"""Tight weights, reduced border-decomposition equations and their numerical solution.

A tensor is *standard tight* in its basis when there are injective integer
weights ``omega_A, omega_B, omega_C`` with ``omega_A(i) + omega_B(j) +
omega_C(k) = 0`` on its support.  Looking for decompositions

    T = sum_s A_s(t) (x) B_s(t) (x) C_s(t) + O(t),
    A_s(t) = sum_i A_si t^omega_A(i) a_i   (and similarly for B, C),

every product ``A_si B_sj C_sk`` carries the power ``t^(omega-sum)``, so only
triples of non-positive weight sum give equations: the coefficient must be
``T^ijk`` for sum zero and zero for negative sums.

The pipeline: find weights minimizing the number of such triples (an exact
rational LP inside a branch-and-bound), generate the equations, solve them
with Levenberg-Marquardt from random complex starts, then sparsify by
pinning parameters to simple values until the solution is isolated.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from . import _kernels
from .decomp import BorderDecomposition, Term
from .linalg import BudgetExceeded, kernel_basis
from .scalar import LaurentPoly
from .tensor import Tensor3

__all__ = [
    "LMConfig",
    "SolveResult",
    "TightProblem",
    "TightWeights",
    "assemble_decomposition",
    "equation_count",
    "equations",
    "is_standard_tight",
    "jacobian_check",
    "laurent_residuals",
    "lm_solve",
    "multistart",
    "params_from_decomposition",
    "search_min_equations",
    "sparsify",
    "weights_from_decomposition",
    "weights_from_lp",
]

Triple = Tuple[int, int, int]


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class TightWeights:
    """Integer weights per factor; ``symmetric`` means one shared weight map."""

    omega_A: Tuple[int, ...]
    omega_B: Tuple[int, ...]
    omega_C: Tuple[int, ...]
    symmetric: bool = False

    @classmethod
    def symmetric_weights(cls, omega: Sequence[int]) -> "TightWeights":
        w = tuple(int(x) for x in omega)
        return cls(w, w, w, True)

    @classmethod
    def make(cls, wA: Sequence[int], wB: Sequence[int], wC: Sequence[int]) -> "TightWeights":
        return cls(tuple(int(x) for x in wA), tuple(int(x) for x in wB), tuple(int(x) for x in wC), False)

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (len(self.omega_A), len(self.omega_B), len(self.omega_C))

    def total(self, i: int, j: int, k: int) -> int:
        return self.omega_A[i] + self.omega_B[j] + self.omega_C[k]

    def is_injective(self) -> bool:
        return all(len(set(w)) == len(w) for w in (self.omega_A, self.omega_B, self.omega_C))

    def shifted(self, cA: int, cB: int, cC: int) -> "TightWeights":
        """Translate the factor weights (the problem is unchanged when ``cA + cB + cC == 0``)."""
        return TightWeights(tuple(x + cA for x in self.omega_A), tuple(x + cB for x in self.omega_B),
                            tuple(x + cC for x in self.omega_C), self.symmetric and cA == cB == cC)

    def to_json(self) -> dict:
        if self.symmetric:
            return {"symmetric": True, "omega": list(self.omega_A)}
        return {"symmetric": False, "omega_A": list(self.omega_A), "omega_B": list(self.omega_B),
                "omega_C": list(self.omega_C)}

    @classmethod
    def from_json(cls, data: dict) -> "TightWeights":
        if data.get("symmetric"):
            return cls.symmetric_weights(data["omega"])
        return cls.make(data["omega_A"], data["omega_B"], data["omega_C"])


def is_standard_tight(T: Tensor3, w: TightWeights) -> bool:
    """Injective weights summing to zero on every support triple of ``T``."""
    if w.dims != T.dims:
        raise ValueError(f"weights for dims {w.dims}, tensor has dims {T.dims}")
    if not w.is_injective():
        return False
    return all(w.total(i, j, k) == 0 for (i, j, k) in T.support)


def _triples(dims: Sequence[int], symmetric: bool) -> Iterable[Triple]:
    if symmetric:
        return itertools.combinations_with_replacement(range(dims[0]), 3)
    return itertools.product(range(dims[0]), range(dims[1]), range(dims[2]))


def equation_count(w: TightWeights, symmetric: Optional[bool] = None) -> int:
    """``#{triples with weight sum <= 0}`` (multisets in symmetric mode)."""
    sym = w.symmetric if symmetric is None else symmetric
    return sum(1 for t in _triples(w.dims, sym) if w.total(*t) <= 0)


# ---------------------------------------------------------------------------
# exact rational simplex


def _simplex(G: List[List[Fraction]], h: List[Fraction], n: int) -> Optional[List[Fraction]]:
    """A point of ``{y in Q^n : G y <= h}`` minimizing ``sum |y|``, or None.

    Dense two-phase tableau simplex over ``Fraction`` with Bland's rule;
    free variables are split as ``y = u - v``.
    """
    m = len(G)
    if m == 0:
        return [Fraction(0)] * n
    # columns: u (n), v (n), slack (m), artificial (for rows with h < 0)
    ncol = 2 * n + m
    art_rows = [r for r in range(m) if h[r] < 0]
    art_col = {r: ncol + a for a, r in enumerate(art_rows)}
    ncol_total = ncol + len(art_rows)
    T: List[List[Fraction]] = []
    basis: List[int] = []
    for r in range(m):
        sign = -1 if h[r] < 0 else 1
        row = [Fraction(0)] * (ncol_total + 1)
        for c in range(n):
            g = G[r][c]
            if g:
                row[c] = sign * g
                row[n + c] = -sign * g
        row[2 * n + r] = Fraction(sign)
        if sign < 0:
            row[art_col[r]] = Fraction(1)
            basis.append(art_col[r])
        else:
            basis.append(2 * n + r)
        row[-1] = sign * h[r]
        T.append(row)

    def pivot(pr: int, pc: int):
        prow = T[pr]
        inv = 1 / prow[pc]
        if inv != 1:
            T[pr] = prow = [x * inv for x in prow]
        for r in range(len(T)):
            if r != pr:
                f = T[r][pc]
                if f:
                    row = T[r]
                    T[r] = [a - f * b if b else a for a, b in zip(row, prow)]
        basis[pr] = pc

    def run(cost: List[Fraction], allowed: int) -> bool:
        # reduced costs z_j = c_j - c_B B^-1 a_j, kept as an extra row
        z = list(cost) + [Fraction(0)]
        for r, b in enumerate(basis):
            if z[b]:
                f = z[b]
                z = [a - f * x for a, x in zip(z, T[r])]
        for _ in range(100000):
            pc = next((c for c in range(allowed) if z[c] < 0), None)
            if pc is None:
                return True
            best = None
            for r in range(m):
                a = T[r][pc]
                if a > 0:
                    ratio = T[r][-1] / a
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                        best = (ratio, r)
            if best is None:
                return False  # unbounded
            pr = best[1]
            pivot(pr, pc)
            f = z[pc]
            z = [a - f * x for a, x in zip(z, T[pr])]
        raise RuntimeError("simplex iteration limit")  # pragma: no cover

    if art_rows:
        cost1 = [Fraction(0)] * ncol + [Fraction(1)] * len(art_rows)
        run(cost1, ncol_total)
        if sum(T[r][-1] for r, b in enumerate(basis) if b >= ncol) > 0:
            return None
        # drive remaining (zero-level) artificials out of the basis
        for r, b in enumerate(basis):
            if b >= ncol:
                pc = next((c for c in range(ncol) if T[r][c] != 0), None)
                if pc is not None:
                    pivot(r, pc)
    for row in T:
        for c in range(ncol, ncol_total):
            row[c] = Fraction(0)
    cost2 = [Fraction(1)] * (2 * n) + [Fraction(0)] * (ncol_total - 2 * n)
    run(cost2, ncol)
    x = [Fraction(0)] * ncol_total
    for r, b in enumerate(basis):
        x[b] = T[r][-1]
    return [x[c] - x[n + c] for c in range(n)]


def _lp_cutting_plane(G: List[List[Fraction]], h: List[Fraction], n: int,
                      start: Sequence[int] = (), batch: int = 64) -> Optional[List[Fraction]]:
    """Feasible point of ``G y <= h`` by solving growing subsystems (exact)."""
    active = list(dict.fromkeys(start))
    if not active:
        active = list(range(min(len(G), 2 * n + 2)))
    while True:
        y = _simplex([G[r] for r in active], [h[r] for r in active], n)
        if y is None:
            return None
        viol = []
        for r in range(len(G)):
            s = sum((g * v for g, v in zip(G[r], y) if g), Fraction(0))
            if s > h[r]:
                viol.append((s - h[r], r))
        if not viol:
            return y
        viol.sort(reverse=True)
        act = set(active)
        active.extend(r for _, r in viol[:batch] if r not in act)


class _WeightLP:
    """Weights as ``omega = N y`` over the kernel of the support equalities."""

    def __init__(self, support: Iterable[Triple], dims: Sequence[int], symmetric: bool):
        self.dims = tuple(dims)
        self.symmetric = symmetric
        if symmetric:
            n = dims[0]
            self.offsets = (0, 0, 0)
        else:
            n = sum(dims)
            self.offsets = (0, dims[0], dims[0] + dims[1])
        self.nvar = n
        rows = []
        for t in set(map(tuple, support)):
            rows.append(self._row(t))
        if rows:
            K = kernel_basis(rows, ncols=n)
        else:
            K = [[Fraction(int(a == b)) for a in range(n)] for b in range(n)]
        self.N = [[Fraction(K[c][v]) for c in range(len(K))] for v in range(n)]  # n x k
        self.k = len(K)

    def _row(self, t: Triple) -> List[int]:
        r = [0] * self.nvar
        for f, idx in enumerate(t):
            r[self.offsets[f] + idx] += 1
        return r

    def sum_row(self, t: Triple) -> List[Fraction]:
        """Coefficients of the weight sum of ``t`` in the ``y`` coordinates."""
        out = [Fraction(0)] * self.k
        for f, idx in enumerate(t):
            row = self.N[self.offsets[f] + idx]
            for c in range(self.k):
                if row[c]:
                    out[c] += row[c]
        return out

    def diff_row(self, f: int, i: int, j: int) -> List[Fraction]:
        a, b = self.N[self.offsets[f] + i], self.N[self.offsets[f] + j]
        return [x - y for x, y in zip(a, b)]

    def weights(self, y: Sequence[Fraction]) -> List[Fraction]:
        return [sum((a * b for a, b in zip(row, y) if a), Fraction(0)) for row in self.N]

    def to_tight(self, w: Sequence[Fraction]) -> TightWeights:
        d = 1
        for x in w:
            d = math.lcm(d, x.denominator)
        ints = [int(x * d) for x in w]
        if self.symmetric:
            return TightWeights.symmetric_weights(ints)
        a, b, c = self.dims
        return TightWeights.make(ints[:a], ints[a:a + b], ints[a + b:])


def _system(lp: _WeightLP, S_le: Iterable[Triple], S_gt: Iterable[Triple],
            extra: Sequence[Tuple[List[Fraction], Fraction]] = ()):
    G, h = [], []
    for t in S_le:
        G.append(lp.sum_row(tuple(t)))
        h.append(Fraction(0))
    for t in S_gt:
        G.append([-x for x in lp.sum_row(tuple(t))])
        h.append(Fraction(-1))
    for row, rhs in extra:
        G.append(row)
        h.append(rhs)
    return G, h


def _factor_ties(lp: _WeightLP, w: Sequence[Fraction]) -> Optional[Tuple[int, int, int]]:
    factors = [0] if lp.symmetric else [0, 1, 2]
    for f in factors:
        off = lp.offsets[f]
        seen: Dict[Fraction, int] = {}
        for i in range(lp.dims[f]):
            v = w[off + i]
            if v in seen:
                return f, seen[v], i
            seen[v] = i
    return None


def weights_from_lp(support: Iterable[Triple], S_le: Iterable[Triple], S_gt: Iterable[Triple],
                    dims: Sequence[int], symmetric: bool = False,
                    max_branches: int = 10000) -> Optional[TightWeights]:
    """Injective tight weights with ``sum <= 0`` on ``S_le`` and ``sum >= 1`` on ``S_gt``.

    The support equalities are solved exactly (weights live in their
    kernel); the inequalities are an exact rational LP.  Injectivity is
    imposed lazily: when two weights of a factor tie, branch on
    ``w_i - w_j >= 1`` or ``w_j - w_i >= 1``.  Denominators are cleared at
    the end (all constraints are invariant under positive scaling by an
    integer ``>= 1``).  Returns None when infeasible.
    """
    support = [tuple(t) for t in support]
    S_le = [tuple(t) for t in S_le]
    S_gt = [tuple(t) for t in S_gt]
    if set(support) & set(S_gt):
        return None
    lp = _WeightLP(support, dims, symmetric)
    if lp.k == 0:
        return None
    base_G, base_h = _system(lp, S_le, S_gt)
    stack: List[List[Tuple[List[Fraction], Fraction]]] = [[]]
    branches = 0
    while stack:
        extra = stack.pop()
        branches += 1
        if branches > max_branches:
            raise BudgetExceeded("injectivity branching exceeded its budget")
        G = base_G + [r for r, _ in extra]
        h = base_h + [b for _, b in extra]
        start = list(range(len(base_G), len(G))) + [r for r in range(len(base_G)) if base_h[r] < 0]
        y = _lp_cutting_plane(G, h, lp.k, start=start)
        if y is None:
            continue
        w = lp.weights(y)
        tie = _factor_ties(lp, w)
        if tie is None:
            tw = lp.to_tight(w)
            return tw
        f, i, j = tie
        d = lp.diff_row(f, i, j)
        # w_j - w_i >= 1  and  w_i - w_j >= 1  (pushed so the first is tried first)
        stack.append(extra + [(list(d), Fraction(-1))])
        stack.append(extra + [([-x for x in d], Fraction(-1))])
    return None


def search_min_equations(T: Tensor3, budget: int = 100000, symmetric: Optional[bool] = None,
                         incumbent: Optional[TightWeights] = None,
                         time_limit: Optional[float] = None) -> Tuple[Optional[TightWeights], int, bool]:
    """Tight weights minimizing the number of equations, by branch and bound.

    Off-support triples are decided in a fixed order, trying ``sum > 0``
    first; every node is checked by the LP relaxation without injectivity
    (a sound pruning rule) and pruned when ``#S_le`` reaches the incumbent.
    Complete assignments go through :func:`weights_from_lp`.

    Returns:
        ``(weights, count, complete)``; ``complete`` is False when the
        budget (number of LP solves) or ``time_limit`` (seconds) ran out, in which case the best weights
        found so far are returned.  ``(None, 0, True)`` means no tight
        weights exist.
    """
    sym = T.is_symmetric() if symmetric is None else symmetric
    dims = T.dims
    support = set(T.support)
    if sym:
        support = {tuple(sorted(t)) for t in support}
    lp = _WeightLP(support, dims, sym)
    free = [t for t in _triples(dims, sym) if t not in support]
    best_w, best = None, math.inf
    if incumbent is not None and is_standard_tight(T, incumbent):
        best_w, best = incumbent, equation_count(incumbent, sym)
    base = len(support)
    calls = 0
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    rows = {t: lp.sum_row(t) for t in free}

    def feasible(le, gt):
        nonlocal calls
        calls += 1
        if calls > budget:
            raise BudgetExceeded("search budget exhausted")
        if deadline is not None and time.perf_counter() > deadline:
            raise BudgetExceeded("search time limit reached")
        G = [rows[t] for t in le] + [[-x for x in rows[t]] for t in gt]
        h = [Fraction(0)] * len(le) + [Fraction(-1)] * len(gt)
        return _lp_cutting_plane(G, h, lp.k, start=range(len(G))) is not None

    complete = True
    try:
        if lp.k == 0:
            return None, 0, True
        # quick check: any injective tight weights at all?
        first = weights_from_lp(support, [], [], dims, sym)
        if first is None:
            return None, 0, True
        if best_w is None:
            best_w, best = first, equation_count(first, sym)
        stack = [(0, [], [])]
        while stack:
            n, le, gt = stack.pop()
            if base + len(le) >= best:
                continue
            if n == len(free):
                w = weights_from_lp(support, [t for t in le] + list(support), gt, dims, sym)
                if w is not None:
                    cnt = equation_count(w, sym)
                    if cnt < best:
                        best_w, best = w, cnt
                continue
            t = free[n]
            # children: '>' explored first (pushed last)
            if base + len(le) + 1 < best and feasible(le + [t], gt):
                stack.append((n + 1, le + [t], gt))
            if feasible(le, gt + [t]):
                stack.append((n + 1, le, gt + [t]))
    except BudgetExceeded:
        complete = False
    return best_w, (0 if best_w is None else int(best)), complete


# ---------------------------------------------------------------------------
# equations


@dataclass
class TightProblem:
    """The reduced equation system for ``r`` terms.

    ``eqs`` rows are index triples (sorted in symmetric mode), ``target``
    the right-hand sides.  Parameters are ``A`` (``r x dA``), then ``B``
    and ``C`` in asymmetric mode, flattened row-major.
    """

    dims: Tuple[int, int, int]
    r: int
    symmetric: bool
    eqs: np.ndarray
    target: np.ndarray
    weights: Optional[TightWeights] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_equations(self) -> int:
        return int(self.eqs.shape[0])

    @property
    def n_params(self) -> int:
        return self.r * (self.dims[0] if self.symmetric else sum(self.dims))

    @property
    def gauge_dim(self) -> int:
        """Declared continuous gauge: two rescalings per term (asymmetric), none (symmetric)."""
        return 0 if self.symmetric else 2 * self.r

    def split(self, x: np.ndarray):
        r, (a, b, c) = self.r, self.dims
        x = np.asarray(x, dtype=np.complex128)
        if self.symmetric:
            A = x.reshape(r, a)
            return A, A, A
        return x[:r * a].reshape(r, a), x[r * a:r * (a + b)].reshape(r, b), x[r * (a + b):].reshape(r, c)

    def residual(self, x: np.ndarray) -> np.ndarray:
        A, B, C = self.split(x)
        if self.r == 0:
            return -self.target.astype(np.complex128)
        return _kernels.trilinear_residual(A, B, C, self.eqs, self.target)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        A, B, C = self.split(x)
        return _kernels.trilinear_jacobian(A, B, C, self.eqs, self.symmetric)

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims), "r": self.r, "symmetric": self.symmetric,
            "eqs": self.eqs.tolist(),
            "target": [[float(z.real), float(z.imag)] for z in self.target],
            "weights": self.weights.to_json() if self.weights else None,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TightProblem":
        tgt = np.array([complex(a, b) for a, b in data["target"]], dtype=np.complex128)
        w = TightWeights.from_json(data["weights"]) if data.get("weights") else None
        eqs = np.array(data["eqs"], dtype=np.int64).reshape(-1, 3)
        return cls(tuple(data["dims"]), int(data["r"]), bool(data["symmetric"]), eqs, tgt, w,
                   dict(data.get("meta", {})))


def equations(T: Tensor3, w: Optional[TightWeights], r: int, symmetric: Optional[bool] = None,
              scale: complex = 1.0) -> TightProblem:
    """Equations ``sum_s A_si B_sj C_sk = scale * T^ijk`` over triples of sum ``<= 0``.

    With ``w=None`` every triple is kept (an ordinary rank decomposition).
    Symmetric mode (default: ``w.symmetric``) identifies the three factors
    and indexes equations by multisets ``i <= j <= k``.

    Raises:
        ValueError: the weights are not tight for ``T``, or symmetric mode
            is requested for a non-symmetric tensor.
    """
    sym = (w.symmetric if w is not None else T.is_symmetric()) if symmetric is None else symmetric
    if w is not None and not is_standard_tight(T, w):
        raise ValueError("weights are not tight for this tensor")
    if sym and not T.is_symmetric():
        raise ValueError("symmetric mode needs a symmetric tensor")
    if sym and w is not None and not (w.omega_A == w.omega_B == w.omega_C):
        raise ValueError("symmetric mode needs one shared weight map")
    rows, tgt = [], []
    for t in _triples(T.dims, sym):
        if w is None or w.total(*t) <= 0:
            rows.append(t)
            v = T[t]
            tgt.append(complex(v) * scale if v else 0j)
    eqs = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return TightProblem(tuple(T.dims), int(r), sym, eqs, np.array(tgt, dtype=np.complex128), w)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt


@dataclass
class LMConfig:
    max_iter: int = 500
    tol: float = 1e-12
    step_tol: float = 1e-15
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e16


@dataclass
class SolveResult:
    """A parameter vector with its residual and isolation data.

    ``history`` lists the residual 2-norm after every accepted step
    (non-increasing).  ``jacobian_rank`` is the numerical rank of the
    Jacobian restricted to the free parameters; the point is isolated
    modulo the declared gauge when ``jacobian_rank >= n_free - gauge_dim``.
    """

    params: np.ndarray
    residual_norm: float
    max_residual: float
    iterations: int
    converged: bool
    seed: Optional[int] = None
    history: List[float] = field(default_factory=list)
    fixed: Dict[int, complex] = field(default_factory=dict)
    frozen: List[int] = field(default_factory=list)
    jacobian_rank: Optional[int] = None
    n_free: Optional[int] = None
    gauge_dim: int = 0
    message: str = ""

    @property
    def isolated(self) -> Optional[bool]:
        if self.jacobian_rank is None or self.n_free is None:
            return None
        return self.jacobian_rank >= self.n_free - self.gauge_dim

    def to_json(self) -> dict:
        return {
            "params": [[float(z.real), float(z.imag)] for z in self.params],
            "residual_norm": self.residual_norm, "max_residual": self.max_residual,
            "iterations": self.iterations, "converged": self.converged, "seed": self.seed,
            "history": self.history,
            "fixed": {str(k): [v.real, v.imag] for k, v in self.fixed.items()},
            "frozen": self.frozen, "jacobian_rank": self.jacobian_rank, "n_free": self.n_free,
            "gauge_dim": self.gauge_dim, "isolated": self.isolated, "message": self.message,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SolveResult":
        p = np.array([complex(a, b) for a, b in data["params"]], dtype=np.complex128)
        return cls(p, data["residual_norm"], data["max_residual"], data["iterations"], data["converged"],
                   data.get("seed"), list(data.get("history", [])),
                   {int(k): complex(*v) for k, v in data.get("fixed", {}).items()},
                   list(data.get("frozen", [])), data.get("jacobian_rank"), data.get("n_free"),
                   data.get("gauge_dim", 0), data.get("message", ""))


def random_start(P: TightProblem, seed: int) -> np.ndarray:
    """Complex Gaussian start with unit variance."""
    rng = np.random.default_rng(seed)
    n = P.n_params
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)


def _numerical_rank(J: np.ndarray, rtol: float = 1e-8) -> int:
    if J.size == 0:
        return 0
    s = np.linalg.svd(J, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def lm_solve(P: TightProblem, config: Optional[LMConfig] = None, seed: Optional[int] = 0,
             x0: Optional[np.ndarray] = None, fixed: Optional[Dict[int, complex]] = None) -> SolveResult:
    """Levenberg-Marquardt on the complex residual.

    The residual is holomorphic in the parameters, so the damped step
    ``(J^H J + lambda I) d = -J^H F`` is the Gauss-Newton step of the real
    system of doubled dimension (real and imaginary parts).  Damping starts
    at ``lambda0``, is multiplied by ``lambda_up`` after a rejected step
    and divided by ``lambda_down`` after an accepted one.  Parameters in
    ``fixed`` are held at their values.  Never raises on divergence; the
    result carries ``converged=False``.
    """
    cfg = config or LMConfig()
    x = (random_start(P, seed if seed is not None else 0) if x0 is None
         else np.array(x0, dtype=np.complex128).copy())
    fixed = dict(fixed or {})
    for i, v in fixed.items():
        x[i] = v
    free = np.array([i for i in range(P.n_params) if i not in fixed], dtype=np.int64)
    F = P.residual(x)
    norm = float(np.linalg.norm(F))
    history = [norm]
    lam = cfg.lambda0
    it = 0
    msg = "max iterations"
    if norm < cfg.tol:
        msg = "converged"
    elif P.r == 0 or free.size == 0:
        msg = "no free parameters"
    else:
        while it < cfg.max_iter:
            it += 1
            J = P.jacobian(x)[:, free]
            g = J.conj().T @ F
            H = J.conj().T @ J
            accepted = False
            while lam <= cfg.lambda_max:
                try:
                    d = np.linalg.solve(H + lam * np.eye(H.shape[0]), -g)
                except np.linalg.LinAlgError:
                    lam *= cfg.lambda_up
                    continue
                xn = x.copy()
                xn[free] += d
                Fn = P.residual(xn)
                nn = float(np.linalg.norm(Fn))
                if np.isfinite(nn) and nn < norm:
                    step = float(np.linalg.norm(d))
                    x, F, norm = xn, Fn, nn
                    history.append(norm)
                    lam = max(lam / cfg.lambda_down, 1e-20)
                    accepted = True
                    break
                lam *= cfg.lambda_up
            if not accepted:
                msg = "damping limit"
                break
            if norm < cfg.tol:
                msg = "converged"
                break
            if step < cfg.step_tol * (1 + float(np.linalg.norm(x))):
                msg = "step tolerance"
                break
    F = P.residual(x)
    norm = float(np.linalg.norm(F))
    return SolveResult(params=x, residual_norm=norm, max_residual=float(np.max(np.abs(F))) if F.size else 0.0,
                       iterations=it, converged=norm < cfg.tol, seed=seed, history=history,
                       fixed=fixed, gauge_dim=P.gauge_dim, message=msg)


def multistart(P: TightProblem, starts: int = 8, seed: int = 0, config: Optional[LMConfig] = None,
               stop_on_success: bool = True) -> Tuple[SolveResult, List[SolveResult]]:
    """Independent :func:`lm_solve` runs with seeds ``seed, seed+1, ...``; returns the best."""
    runs = []
    for s in range(seed, seed + starts):
        res = lm_solve(P, config, seed=s)
        runs.append(res)
        if stop_on_success and res.converged:
            break
    best = min(runs, key=lambda r: r.residual_norm)
    return best, runs


def isolation(P: TightProblem, res: SolveResult, rtol: float = 1e-8) -> SolveResult:
    """Fill in the Jacobian rank on the free parameters."""
    free = [i for i in range(P.n_params) if i not in res.fixed]
    J = P.jacobian(res.params)[:, free]
    res.jacobian_rank = _numerical_rank(J, rtol)
    res.n_free = len(free)
    res.gauge_dim = P.gauge_dim
    return res


_SIMPLE = (1, -1, 1j, -1j)


def sparsify(P: TightProblem, result: SolveResult, config: Optional[LMConfig] = None,
             tol: Optional[float] = None, snap: Optional[float] = None,
             rtol: float = 1e-8, max_pins: Optional[int] = None) -> SolveResult:
    """Pin parameters to simple values until the solution is isolated.

    Free parameters are visited by increasing magnitude.  Each is pinned to
    0; if re-solving (LM from the current point with the pin held) does not
    bring the residual back below ``tol`` the pin is undone and the nearest
    of ``{1, -1, i, -i}`` is tried (only within ``snap`` when given).  A
    parameter whose pins all fail is frozen (kept free, never retried).
    Stops as soon as the Jacobian on the remaining free parameters has full
    column rank: no continuous freedom is left.
    """
    cfg = config or LMConfig(max_iter=200)
    tol = (result.residual_norm * 10 + 1e-12) if tol is None else tol
    cur = isolation(P, SolveResult(result.params.copy(), result.residual_norm, result.max_residual,
                                   result.iterations, result.converged, result.seed, list(result.history),
                                   dict(result.fixed), list(result.frozen)), rtol)
    frozen = set(cur.frozen)
    pins = 0
    while cur.jacobian_rank < cur.n_free:
        free = [i for i in range(P.n_params) if i not in cur.fixed and i not in frozen]
        if not free or (max_pins is not None and pins >= max_pins):
            break
        i = min(free, key=lambda j: (abs(cur.params[j]), j))
        v = cur.params[i]
        tries = [0j]
        near = min(_SIMPLE, key=lambda s: abs(v - s))
        if snap is None or abs(v - near) <= snap:
            tries.append(complex(near))
        accepted = False
        for val in tries:
            fx = dict(cur.fixed)
            fx[i] = val
            res = lm_solve(P, cfg, seed=result.seed, x0=cur.params, fixed=fx)
            if res.residual_norm <= tol:
                res.frozen = sorted(frozen)
                cur = isolation(P, res, rtol)
                accepted = True
                pins += 1
                break
        if not accepted:
            frozen.add(i)
    cur.frozen = sorted(frozen)
    cur.message = "isolated" if cur.jacobian_rank >= cur.n_free else "pins exhausted"
    return cur


def jacobian_check(P: TightProblem, points: int = 100, seed: int = 0, h: float = 1e-6) -> float:
    """Largest relative deviation between the analytic Jacobian and central differences.

    Each point is a complex Gaussian parameter vector; for every point one
    random real direction is probed (``J v`` against
    ``(F(x + h v) - F(x - h v)) / 2h``) plus one imaginary direction.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        x = (rng.standard_normal(P.n_params) + 1j * rng.standard_normal(P.n_params)) / math.sqrt(2)
        J = P.jacobian(x)
        for v in (rng.standard_normal(P.n_params), 1j * rng.standard_normal(P.n_params)):
            an = J @ v
            fd = (P.residual(x + h * v) - P.residual(x - h * v)) / (2 * h)
            scale = max(float(np.max(np.abs(an))), 1e-300)
            worst = max(worst, float(np.max(np.abs(an - fd))) / scale)
    return worst


# ---------------------------------------------------------------------------
# decompositions <-> parameters


def assemble_decomposition(w: Optional[TightWeights], result: Any, P: TightProblem,
                           digits: int = 30) -> BorderDecomposition:
    """``A_s(t) = sum_i A_si t^omega_A(i) a_i`` (and B, C) as a border decomposition.

    ``result`` is a :class:`SolveResult` or a raw parameter vector.
    ``w=None`` gives constant vectors (a rank decomposition).
    """
    x = result.params if isinstance(result, SolveResult) else np.asarray(result, dtype=np.complex128)
    A, B, C = P.split(x)
    dA, dB, dC = P.dims
    wA = w.omega_A if w is not None else (0,) * dA
    wB = w.omega_B if w is not None else (0,) * dB
    wC = w.omega_C if w is not None else (0,) * dC
    one = LaurentPoly({0: mpmath.mpc(1)})
    terms = []
    with mpmath.workdps(digits):
        def vec(row, wts):
            return [LaurentPoly({wts[i]: mpmath.mpc(complex(row[i]))}) for i in range(len(row))]

        for s in range(P.r):
            a = vec(A[s], wA)
            if P.symmetric:
                terms.append(Term(one, a, a, a))
            else:
                terms.append(Term(one, a, vec(B[s], wB), vec(C[s], wC)))
    return BorderDecomposition(P.dims, terms, "complex", P.symmetric, {"source": "solve"})


def weights_from_decomposition(D: BorderDecomposition) -> TightWeights:
    """Read off per-coordinate weights of a decomposition in tight form.

    Raises:
        ValueError: a coordinate carries two different exponents, a term
            has a non-constant coefficient, or a coordinate never occurs.
    """
    def collect(getter, n):
        w: Dict[int, int] = {}
        for t in D.terms:
            for i, x in enumerate(getter(t)):
                for e, _ in x.items():
                    if w.setdefault(i, e) != e:
                        raise ValueError(f"coordinate {i} has exponents {w[i]} and {e}")
        missing = [i for i in range(n) if i not in w]
        if missing:
            raise ValueError(f"coordinates {missing} never occur")
        return tuple(w[i] for i in range(n))

    for t in D.terms:
        if set(e for e, _ in t.coeff.items()) != {0}:
            raise ValueError("terms must have constant coefficients")
    dA, dB, dC = D.dims
    wA = collect(lambda t: t.vecA, dA)
    if D.symmetric:
        return TightWeights.symmetric_weights(wA)
    return TightWeights.make(wA, collect(lambda t: t.vecB, dB), collect(lambda t: t.vecC, dC))


def params_from_decomposition(D: BorderDecomposition, P: TightProblem) -> np.ndarray:
    """Parameter vector of a tight-form decomposition (term coefficients folded into ``A``)."""
    if D.rank != P.r or tuple(D.dims) != tuple(P.dims) or D.symmetric != P.symmetric:
        raise ValueError("decomposition does not match the problem shape")
    rows = []

    def coeffs(v):
        out = []
        for x in v:
            items = list(x.items())
            out.append(complex(items[0][1]) if items else 0j)
        return out

    As, Bs, Cs = [], [], []
    for t in D.terms:
        c = complex(t.coeff.terms.get(0, 0))
        if P.symmetric:
            # c * a^(x)3 = (c^(1/3) a)^(x)3
            root = c ** (1.0 / 3.0) if c != 1 else 1.0
            As.append([root * z for z in coeffs(t.vecA)])
        else:
            As.append([c * z for z in coeffs(t.vecA)])
            Bs.append(coeffs(t.vecB))
            Cs.append(coeffs(t.vecC))
    rows = np.array(As, dtype=np.complex128).reshape(-1)
    if not P.symmetric:
        rows = np.concatenate([rows, np.array(Bs, dtype=np.complex128).reshape(-1),
                               np.array(Cs, dtype=np.complex128).reshape(-1)])
    return rows


def laurent_residuals(D: BorderDecomposition, T: Tensor3, scale: complex = 1.0) -> Dict[int, np.ndarray]:
    """Dense float coefficients of ``t^e`` (``e <= 0``) of ``sum_terms - scale * T t^0``.

    An expansion path independent of :func:`borderlab.decomp.expand`: each
    term's vectors become per-exponent dense arrays and every exponent
    combination is one :func:`numpy.einsum` outer product.
    """
    dims = D.dims
    out: Dict[int, np.ndarray] = {}

    def dense(vec):
        parts: Dict[int, np.ndarray] = {}
        for i, x in enumerate(vec):
            for e, c in x.items():
                parts.setdefault(e, np.zeros(len(vec), dtype=np.complex128))[i] += complex(c)
        return parts

    for t in D.terms:
        pa, pb, pc = dense(t.vecA), dense(t.vecB), dense(t.vecC)
        if not (pa and pb and pc):
            continue
        pk = {e: complex(c) for e, c in t.coeff.items()}
        for (ea, a), (eb, b), (ec, c), (ek, k) in itertools.product(pa.items(), pb.items(), pc.items(), pk.items()):
            e = ea + eb + ec + ek
            if e > 0:
                continue
            slot = out.setdefault(e, np.zeros(dims, dtype=np.complex128))
            slot += k * np.einsum("i,j,k->ijk", a, b, c)
    slot = out.setdefault(0, np.zeros(dims, dtype=np.complex128))
    for key, v in T.items():
        slot[key] -= scale * complex(v)
    return dict(sorted(out.items()))


def residual_vs_expansion(D: BorderDecomposition, P: TightProblem, T: Tensor3, scale: complex = 1.0) -> float:
    """Largest gap between the equation residuals at ``D``'s parameters and the
    Laurent coefficients of the decomposition (both pipelines, tight form)."""
    w = P.weights
    x = params_from_decomposition(D, P)
    F = P.residual(x)
    L = laurent_residuals(D, T, scale)
    worst = 0.0
    for n, (i, j, k) in enumerate(P.eqs):
        e = w.total(i, j, k) if w is not None else 0
        v = L[e][i, j, k] if e in L else 0.0
        worst = max(worst, abs(F[n] - v))
    return worst
