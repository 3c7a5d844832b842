"""Border-rank decompositions as Laurent-series data, their verification and
the built-in datasets.

A :class:`BorderDecomposition` is a list of terms ``c_s(t) a_s(t) (x) b_s(t)
(x) c_s(t)`` whose coefficient ``c_s`` and vector entries are
:class:`~borderlab.scalar.LaurentPoly`.  It is a border decomposition of
``T`` when the expansion has no negative powers of ``t`` and its ``t^0``
coefficient is ``lambda * T`` for the declared scale ``lambda``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath

from .scalar import (
    DEFAULT_DIGITS,
    Cyclotomic12,
    LaurentPoly,
    parse_scalar,
    scalar_to_str,
    to_complex,
    zeta,
)
from .tensor import Tensor3

__all__ = [
    "BUILTIN_NAMES",
    "BorderDecomposition",
    "Term",
    "VerificationReport",
    "builtin",
    "expand",
    "omega_bound",
    "scale_match",
    "verify_exact",
    "verify_numeric",
]

Vec = List[LaurentPoly]


@dataclass
class Term:
    """One rank-one curve ``coeff(t) * vecA(t) (x) vecB(t) (x) vecC(t)``."""

    coeff: LaurentPoly
    vecA: Vec
    vecB: Vec
    vecC: Vec

    def map(self, f) -> "Term":
        g = lambda v: [x.map_coeffs(f) for x in v]  # noqa: E731
        return Term(self.coeff.map_coeffs(f), g(self.vecA), g(self.vecB), g(self.vecC))


def _vec(entries: Dict[int, LaurentPoly], n: int) -> Vec:
    zero = LaurentPoly()
    return [entries.get(i, zero) for i in range(n)]


class BorderDecomposition:
    """A border-rank decomposition.

    Args:
        dims: ``(dA, dB, dC)``.
        terms: list of :class:`Term`.
        field: ``"rational"``, ``"cyclotomic12"`` or ``"complex"``.
        symmetric: Waring form (all three vectors of each term coincide).
        metadata: free-form dict; ``scale`` (declared lambda, default 1) and
            ``index_perm`` (``"id"`` or ``"swap"``) are interpreted.
    """

    def __init__(self, dims: Sequence[int], terms: Sequence[Term], field: str = "rational",
                 symmetric: bool = False, metadata: Optional[dict] = None):
        self.dims = tuple(int(d) for d in dims)
        self.terms = list(terms)
        self.field = field
        self.symmetric = bool(symmetric)
        self.metadata = dict(metadata or {})
        if self.symmetric and len(set(self.dims)) != 1:
            raise ValueError("symmetric decompositions need equal factor dims")
        for t in self.terms:
            if (len(t.vecA), len(t.vecB), len(t.vecC)) != self.dims:
                raise ValueError("term vector lengths do not match dims")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def rank(self) -> int:
        return len(self.terms)

    @property
    def scale(self) -> Any:
        return self.metadata.get("scale", 1)

    def substitute_scale(self, c: Any) -> "BorderDecomposition":
        """Reparameterize ``t -> c t`` (preserves being a border decomposition)."""
        terms = []
        for t in self.terms:
            f = lambda v: [x.substitute_scale(c) for x in v]  # noqa: E731
            terms.append(Term(t.coeff.substitute_scale(c), f(t.vecA), f(t.vecB), f(t.vecC)))
        return BorderDecomposition(self.dims, terms, self.field, self.symmetric, self.metadata)

    def drop_term(self, s: int) -> "BorderDecomposition":
        return BorderDecomposition(self.dims, self.terms[:s] + self.terms[s + 1:], self.field,
                                   self.symmetric, self.metadata)

    def to_numeric(self, digits: int = DEFAULT_DIGITS) -> "BorderDecomposition":
        """Convert all exact constants to ``mpmath.mpc`` at ``digits`` digits."""
        if self.field == "complex":
            return self
        conv = lambda x: to_complex(x, digits)  # noqa: E731
        return BorderDecomposition(self.dims, [t.map(conv) for t in self.terms], "complex",
                                   self.symmetric, self.metadata)

    # -- files --------------------------------------------------------------

    def to_json(self) -> dict:
        def lp(x: LaurentPoly):
            return [[e, scalar_to_str(c)] for e, c in x.items()]

        terms = []
        for t in self.terms:
            d = {"coeff": lp(t.coeff), "vecA": [lp(x) for x in t.vecA]}
            if not self.symmetric:
                d["vecB"] = [lp(x) for x in t.vecB]
                d["vecC"] = [lp(x) for x in t.vecC]
            terms.append(d)
        meta = {k: v for k, v in self.metadata.items() if k not in ("scale", "index_perm")}
        return {
            "dims": list(self.dims),
            "field": self.field,
            "symmetric": self.symmetric,
            "scale": scalar_to_str(self.scale) if not isinstance(self.scale, str) else self.scale,
            "index_perm": self.metadata.get("index_perm", "id"),
            "metadata": meta,
            "terms": terms,
        }

    @classmethod
    def from_json(cls, data: Any) -> "BorderDecomposition":
        if isinstance(data, str):
            data = json.loads(data)
        field = data.get("field", "rational")
        sym = bool(data.get("symmetric", False))

        def lp(x):
            return LaurentPoly({int(e): parse_scalar(str(c), field) for e, c in x})

        meta = dict(data.get("metadata", {}))
        terms = []
        # floating-point entries are parsed at the precision they were written with
        with mpmath.workdps(int(meta.get("digits", DEFAULT_DIGITS))):
            for t in data["terms"]:
                a = [lp(x) for x in t["vecA"]]
                b = a if sym else [lp(x) for x in t["vecB"]]
                c = a if sym else [lp(x) for x in t["vecC"]]
                terms.append(Term(lp(t["coeff"]), a, b, c))
            if "scale" in data:
                meta["scale"] = parse_scalar(str(data["scale"]), field)
        meta["index_perm"] = data.get("index_perm", "id")
        return cls(data["dims"], terms, field, sym, meta)


# ---------------------------------------------------------------------------
# expansion


def _split(vec: Vec) -> Dict[int, Dict[int, Any]]:
    """Vector of Laurent polynomials -> {exponent: {index: coefficient}}."""
    out: Dict[int, Dict[int, Any]] = {}
    for i, x in enumerate(vec):
        for e, c in x.items():
            out.setdefault(e, {})[i] = c
    return out


def expand(D: BorderDecomposition, max_exp: int = 0) -> Dict[int, Dict[Tuple[int, int, int], Any]]:
    """Coefficients of ``t^e`` for every ``e <= max_exp`` of the expansion.

    Returns ``{e: {(i, j, k): value}}`` with only nonzero values kept.
    Terms are accumulated in ascending term order.
    """
    acc: Dict[int, Dict[Tuple[int, int, int], Any]] = {}
    for t in D.terms:
        sa, sb, sc = _split(t.vecA), _split(t.vecB), _split(t.vecC)
        if not (sa and sb and sc) or not t.coeff:
            continue
        lo_b, lo_c = min(sb), min(sc)
        lo_coef = t.coeff.min_exp
        for ea, va in sa.items():
            if ea + lo_b + lo_c + lo_coef > max_exp:
                continue
            for eb, vb in sb.items():
                if ea + eb + lo_c + lo_coef > max_exp:
                    continue
                for ec, vc in sc.items():
                    base = ea + eb + ec
                    if base + lo_coef > max_exp:
                        continue
                    for ek, ck in t.coeff.items():
                        e = base + ek
                        if e > max_exp:
                            continue
                        slot = acc.setdefault(e, {})
                        for i, x in va.items():
                            cx = ck * x
                            for j, y in vb.items():
                                cxy = cx * y
                                for k, z in vc.items():
                                    key = (i, j, k)
                                    v = cxy * z
                                    slot[key] = slot[key] + v if key in slot else v
    return {e: {k: v for k, v in d.items() if v} for e, d in sorted(acc.items())}


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    mode: str
    passed: bool
    terms: int
    lowest_exponent: Optional[int]
    negative_residuals: Dict[int, float]
    t0_max: float
    t0_frobenius: float
    scale: str
    permutation: str = "id"
    tolerance: Optional[float] = None
    witness: Optional[dict] = None
    notes: List[str] = field(default_factory=list)

    @property
    def max_negative(self) -> float:
        return max(self.negative_residuals.values(), default=0.0)

    @property
    def max_error(self) -> float:
        return max(self.max_negative, self.t0_max)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "terms": self.terms,
            "lowest_exponent": self.lowest_exponent,
            "negative_residuals": {str(k): v for k, v in self.negative_residuals.items()},
            "max_negative_residual": self.max_negative,
            "t0_max": self.t0_max,
            "t0_frobenius": self.t0_frobenius,
            "scale": self.scale,
            "permutation": self.permutation,
            "tolerance": self.tolerance,
            "witness": self.witness,
            "notes": self.notes,
        }


def _apply_perm(T: Tensor3, perm: str) -> Tensor3:
    if perm in ("id", None):
        return T
    return _candidate_tensors(T)[perm]


def _check_dims(D: BorderDecomposition, T: Tensor3) -> None:
    if tuple(D.dims) != tuple(T.dims):
        raise ValueError(f"decomposition dims {D.dims} do not match tensor dims {T.dims}")


def verify_exact(D: BorderDecomposition, T: Tensor3, scale: Any = None) -> VerificationReport:
    """Exact verification over Q or Q(zeta_12).

    Passes iff every negative-exponent coefficient vanishes identically and
    the ``t^0`` coefficient equals ``scale * T`` (``scale`` defaults to the
    decomposition's declared scale).
    """
    if D.field not in ("rational", "cyclotomic12"):
        raise ValueError(f"verify_exact needs an exact field, got {D.field!r}")
    _check_dims(D, T)
    lam = D.scale if scale is None else scale
    perm = D.metadata.get("index_perm", "id")
    target = _apply_perm(T, perm)
    coeffs = expand(D, 0)
    neg = {e: float(max(_abs_exact(v) for v in d.values())) for e, d in coeffs.items() if e < 0 and d}
    witness = None
    for e, d in coeffs.items():
        if e < 0 and d:
            key = min(d)
            witness = {"exponent": e, "index": list(key), "value": scalar_to_str(d[key])}
            break
    t0 = coeffs.get(0, {})
    diff_max = 0.0
    frob = 0.0
    for key in set(t0) | set(target.support):
        dv = t0.get(key, 0) - lam * target[key]
        if dv:
            a = float(_abs_exact(dv))
            diff_max = max(diff_max, a)
            frob += a * a
            if witness is None:
                witness = {"exponent": 0, "index": list(key), "value": scalar_to_str(dv)}
    lowest = min(coeffs) if coeffs else None
    passed = not neg and diff_max == 0.0
    return VerificationReport(mode="exact", passed=passed, terms=len(D), lowest_exponent=lowest,
                              negative_residuals=neg, t0_max=diff_max, t0_frobenius=math.sqrt(frob),
                              scale=scalar_to_str(lam), permutation=perm, tolerance=0.0,
                              witness=witness)


def _abs_exact(v: Any) -> float:
    if isinstance(v, Cyclotomic12):
        return float(abs(to_complex(v, 20)))
    return abs(float(v)) if not isinstance(v, complex) else abs(v)


def verify_numeric(D: BorderDecomposition, T: Tensor3, digits: int = DEFAULT_DIGITS,
                   tol: Optional[float] = None, match: bool = True) -> VerificationReport:
    """High-precision numeric verification.

    The expansion is carried out in ``mpmath`` at ``digits`` significant
    digits.  Reports the largest entry of every negative-exponent
    coefficient and the largest entry of ``t^0 - lambda T``.  With ``match``
    the scale and index identification are found by :func:`scale_match`;
    otherwise the declared ones are used.  ``tol`` defaults to
    ``10^-(digits - 5)``.
    """
    _check_dims(D, T)
    if tol is None:
        tol = 10.0 ** (-(digits - 5))
    with mpmath.workdps(digits):
        N = D.to_numeric(digits)
        coeffs = expand(N, 0)
        neg = {e: float(max(abs(v) for v in d.values())) for e, d in coeffs.items() if e < 0 and d}
        t0 = coeffs.get(0, {})
        notes = []
        if match:
            lam, perm, _res = _scale_match_coeffs(t0, T)
            if lam is None:
                lam, perm = mpmath.mpc(1), "id"
                notes.append("scale_match found no identification")
        else:
            lam = to_complex(D.scale, digits) if not isinstance(D.scale, mpmath.mpc) else D.scale
            perm = D.metadata.get("index_perm", "id")
        target = _apply_perm(T, perm)
        diff_max = mpmath.mpf(0)
        frob = mpmath.mpf(0)
        for key in set(t0) | set(target.support):
            tv = target[key]
            dv = t0.get(key, 0) - lam * (to_complex(tv, digits) if tv else 0)
            a = abs(dv)
            if a > diff_max:
                diff_max = a
            frob += a * a
        lowest = min(coeffs) if coeffs else None
        max_neg = max(neg.values(), default=0.0)
        passed = max_neg <= tol and float(diff_max) <= tol
        if float(diff_max) < 10.0 ** (-(digits - 2)) and digits > 15:
            notes.append("t^0 residual at working precision")
        return VerificationReport(mode=f"numeric:{digits}", passed=passed, terms=len(D),
                                  lowest_exponent=lowest, negative_residuals=neg,
                                  t0_max=float(diff_max), t0_frobenius=float(mpmath.sqrt(frob)),
                                  scale=scalar_to_str(lam, 20), permutation=perm, tolerance=tol,
                                  notes=notes)


# ---------------------------------------------------------------------------
# scale / index matching


def _pair_swap_map(d: int) -> Optional[List[int]]:
    r = math.isqrt(d)
    if r * r != d or r < 2:
        return None
    return [(x % r) * r + x // r for x in range(d)]


def _candidate_tensors(T: Tensor3) -> Dict[str, Tensor3]:
    """The natural index identifications tried by :func:`scale_match`.

    Pair-flattening order (identity or swap of the two Kronecker indices,
    when every factor dimension is a perfect square) combined with factor
    reorderings that keep the dims (identity, B<->C, A<->B, A<->C) - at most
    eight candidates.
    """
    out: Dict[str, Tensor3] = {"id": T}
    swaps = [_pair_swap_map(d) for d in T.dims]
    if all(s is not None for s in swaps):
        out["swap"] = T.relabel(swaps)
    base = dict(out)
    for name, perm in (("BC", (0, 2, 1)), ("AB", (1, 0, 2)), ("AC", (2, 1, 0))):
        for bname, bt in base.items():
            if tuple(bt.dims[p] for p in perm) != bt.dims:
                continue
            cand = bt.permute_factors(perm)
            out[f"{bname}+{name}" if bname != "id" else name] = cand
    return out


def _scale_match_coeffs(t0: Dict[Tuple[int, int, int], Any], T: Tensor3):
    best = (None, None, math.inf)
    for name, cand in _candidate_tensors(T).items():
        num = mpmath.mpc(0)
        den = mpmath.mpf(0)
        for key, v in cand.items():
            tv = to_complex(v, max(mpmath.mp.dps, 15)) if not isinstance(v, mpmath.mpc) else v
            num += t0.get(key, 0) * mpmath.conj(tv)
            den += abs(tv) ** 2
        if den == 0:
            continue
        lam = num / den
        res = mpmath.mpf(0)
        for key in set(t0) | set(cand.support):
            tv = cand[key]
            tvc = to_complex(tv, max(mpmath.mp.dps, 15)) if tv else 0
            res = max(res, abs(t0.get(key, 0) - lam * tvc))
        if res < best[2]:
            best = (lam, name, res)
    return best


def scale_match(D: BorderDecomposition, T: Tensor3, digits: int = 30) -> Tuple[Any, str, float]:
    """Find the scale ``lambda`` and index identification matching ``D`` to ``T``.

    Returns ``(lambda, identification_name, max_residual)``; the residual is
    ``inf`` (and lambda ``None``) when the dims do not match.
    """
    if tuple(D.dims) != tuple(T.dims):
        return None, "none", math.inf
    with mpmath.workdps(digits):
        coeffs = expand(D.to_numeric(digits), 0)
        lam, name, res = _scale_match_coeffs(coeffs.get(0, {}), T)
        if lam is None:
            return None, "none", math.inf
        return lam, name, float(res)


# ---------------------------------------------------------------------------
# omega


def omega_bound(q: float, k: float, R: float, skew: bool = False) -> float:
    """Upper bound ``log_q((4/27) R^{3/k})`` for the matrix multiplication exponent.

    ``R`` is a border-rank upper bound for the ``k``-th Kronecker power of
    the (skew, if ``skew``) small Coppersmith-Winograd tensor with
    parameter ``q``.  The value is rounded to 10 significant digits.
    """
    if q < 2 or k < 1 or R < 1:
        raise ValueError("need q >= 2, k >= 1, R >= 1")
    if skew and int(q) % 2:
        raise ValueError("the skew tensor needs an even q")
    with mpmath.workdps(30):
        val = mpmath.log(mpmath.mpf(4) / 27 * mpmath.power(mpmath.mpf(R), mpmath.mpf(3) / k), q)
        return float(mpmath.nstr(val, 10))


# ---------------------------------------------------------------------------
# built-in decompositions


BUILTIN_NAMES = ("cw:q", "skewcw:q", "det3-17", "skewcw4sq-42", "skewcw2-rank5")


def _mono(c: Any, e: int = 0) -> LaurentPoly:
    return LaurentPoly({e: c})


def _cw_builtin(q: int) -> BorderDecomposition:
    n = q + 1
    terms = []
    for a in range(1, q + 1):
        v = _vec({0: _mono(1), a: _mono(1, 1)}, n)
        terms.append(Term(_mono(1, -2), v, v, v))
    v = _vec({0: _mono(1), **{a: _mono(1, 2) for a in range(1, q + 1)}}, n)
    terms.append(Term(_mono(-1, -3), v, v, v))
    v0 = _vec({0: _mono(1)}, n)
    terms.append(Term(LaurentPoly({-2: -q, -3: 1}), v0, v0, v0))
    return BorderDecomposition((n,) * 3, terms, "rational", True, {"source": f"cw:{q}"})


def _skewcw_builtin(q: int) -> BorderDecomposition:
    if q < 2 or q % 2:
        raise ValueError("skewcw needs an even q >= 2")
    p = q // 2
    n = q + 1
    terms = []
    one = _mono(1)

    def v(*pairs):
        # a_0 plus the given (index, coefficient, t-exponent) corrections
        d = {0: one}
        for i, c, e in pairs:
            d[i] = _mono(c, e)
        return _vec(d, n)

    for x in range(1, p + 1):
        y = x + p
        terms.append(Term(_mono(1, -3), v((x, 1, 2)), v((x, -1, 2)), v((y, -1, 1))))
        terms.append(Term(_mono(1, -3), v((x, -1, 2)), v((y, -1, 1)), v((x, 1, 2))))
        terms.append(Term(_mono(1, -3), v((y, -1, 1)), v((x, 1, 2)), v((x, -1, 2))))
    big = v(*((y, 1, 3) for y in range(p + 1, q + 1)))
    terms.append(Term(_mono(1, -5), big, big, big))
    v0 = _vec({0: one}, n)
    terms.append(Term(LaurentPoly({-3: Fraction(-3 * q, 2), -5: -1}), v0, v0, v0))
    return BorderDecomposition((n,) * 3, terms, "rational", False, {"source": f"skewcw:{q}"})


def _skewcw2_rank5() -> BorderDecomposition:
    h = Fraction(1, 2)

    def v(d):
        return _vec({i: _mono(c) for i, c in d.items()}, 3)

    data = [
        (2 * h, {0: 1}, {1: 1, 2: -1}, {1: 1, 2: 1}),
        (-h, {0: 1, 1: 1}, {0: 1, 2: -1}, {0: 1, 2: 1}),
        (-h, {0: 1, 1: -1}, {0: 1, 2: 1}, {0: 1, 2: -1}),
        (h, {0: 1, 2: 1}, {0: 1, 1: -1}, {0: 1, 1: 1}),
        (h, {0: 1, 2: -1}, {0: 1, 1: 1}, {0: 1, 1: -1}),
    ]
    terms = [Term(_mono(c), v(a), v(b), v(cc)) for c, a, b, cc in data]
    return BorderDecomposition((3, 3, 3), terms, "rational", False, {"source": "skewcw2-rank5"})


def _load_data(name: str) -> dict:
    with resources.files("borderlab.data").joinpath(name).open("r") as fh:
        return json.load(fh)


def _det3_17(digits: int) -> BorderDecomposition:
    data = _load_data("det3_17.json")
    rows, cols = data["matrix_shape"]
    n = rows * cols
    terms = []
    with mpmath.workdps(digits + 10):
        rad = {k: mpmath.mpf(v) for k, v in data["radicals"].items()}
        for ent in data["terms"]:
            entries = {}
            for e in ent:
                i, j = e["pos"]
                val = to_complex(zeta(e["zeta"]), digits)
                if "radical" in e:
                    val = val * rad[e["radical"]]
                entries[i * cols + j] = _mono(val, e["t"])
            v = _vec(entries, n)
            terms.append(Term(_mono(mpmath.mpc(1)), v, v, v))
    return BorderDecomposition((n,) * 3, terms, "complex", True,
                               {"source": "det3-17", "radical_forms": data["radical_forms"],
                                "digits": digits})


def _skewcw4sq_42(digits: int) -> BorderDecomposition:
    data = _load_data("skewcw4sq_42.json")
    rows, cols = data["matrix_shape"]
    n = rows * cols
    terms = []
    with mpmath.workdps(digits + 10):
        z = {k: parse_scalar(v, f"complex:{digits}") for k, v in data["constants"].items()}
        for ent in data["terms"]:
            entries = {}
            for e in ent:
                i, j = e["pos"]
                val = to_complex(zeta(e["zeta"]), digits)
                for name, ex in e["z"].items():
                    val = val * z[name] ** ex
                entries[i * cols + j] = _mono(val, e["t"])
            v = _vec(entries, n)
            terms.append(Term(_mono(mpmath.mpc(1)), v, v, v))
    return BorderDecomposition((n,) * 3, terms, "complex", True,
                               {"source": "skewcw4sq-42", "digits": digits})


def builtin(name: str, digits: int = DEFAULT_DIGITS) -> BorderDecomposition:
    """A built-in decomposition: ``cw:q``, ``skewcw:q``, ``det3-17``,
    ``skewcw4sq-42`` or ``skewcw2-rank5``.

    The numeric datasets are converted to ``mpmath`` at ``digits`` digits.
    """
    if name.startswith("builtin:"):
        name = name[len("builtin:"):]
    if name.startswith("cw:"):
        return _cw_builtin(int(name.split(":")[1]))
    if name.startswith("skewcw:"):
        return _skewcw_builtin(int(name.split(":")[1]))
    if name == "skewcw2-rank5":
        return _skewcw2_rank5()
    if name == "det3-17":
        return _det3_17(digits)
    if name == "skewcw4sq-42":
        return _skewcw4sq_42(digits)
    raise ValueError(f"unknown built-in decomposition {name!r}; known: {', '.join(BUILTIN_NAMES)}")
