"""Scalar arithmetic tower.

Every other module computes over one of the scalar kinds defined here:

* ``Fraction`` (from the standard library) for exact rationals,
* :class:`PrimeFieldElement` for arithmetic modulo a word-sized prime,
* :class:`Cyclotomic12` for the cyclotomic field ``Q(zeta)`` with
  ``zeta = exp(2*pi*i/12)``,
* ``mpmath.mpc`` for arbitrary-precision complex floats, and
* :class:`LaurentPoly`, sparse Laurent polynomials in a formal parameter
  ``t`` whose coefficients are any of the above.

All values are immutable.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, Iterator, Mapping, Tuple, Union

import mpmath

__all__ = [
    "BadPrime",
    "BigComplex",
    "Cyclotomic12",
    "DEFAULT_DIGITS",
    "GF",
    "LaurentPoly",
    "PRIME_TABLE",
    "PrimeFieldElement",
    "Rational",
    "ScalarKindError",
    "is_prime",
    "next_prime_below",
    "parse_complex",
    "parse_cyclotomic",
    "parse_rational",
    "parse_scalar",
    "prime_for_seed",
    "reduce_mod_p",
    "scalar_to_str",
    "to_complex",
    "zeta",
]

Rational = Fraction
BigComplex = mpmath.mpc

DEFAULT_DIGITS = 60


class BadPrime(ArithmeticError):
    """Raised when a prime divides a denominator that must be inverted."""

    def __init__(self, p: int, detail: str = ""):
        self.p = p
        super().__init__(f"prime {p} divides a denominator" + (f": {detail}" if detail else ""))


class ScalarKindError(TypeError):
    """Raised when two scalars of incompatible kinds are combined."""


# ---------------------------------------------------------------------------
# primes


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin test (exact for ``n < 3.3e24``)."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime_below(n: int) -> int:
    """Largest prime strictly smaller than ``n``."""
    k = n - 1
    while k >= 2:
        if is_prime(k):
            return k
        k -= 1
    raise ValueError(f"no prime below {n}")


def _build_prime_table(count: int = 16, bound: int = 2**31) -> Tuple[int, ...]:
    out = []
    n = bound
    while len(out) < count:
        n = next_prime_below(n)
        out.append(n)
    return tuple(out)


#: Word-sized primes below 2**31: products of two residues fit in a signed
#: 64-bit integer, which keeps the compiled elimination kernels overflow-free.
PRIME_TABLE: Tuple[int, ...] = _build_prime_table()


def prime_for_seed(seed: int, offset: int = 0) -> int:
    """Deterministically pick a table prime for ``seed`` (``offset`` = retry count)."""
    return PRIME_TABLE[(seed + offset) % len(PRIME_TABLE)]


# ---------------------------------------------------------------------------
# prime fields


class GF:
    """The prime field ``F_p``.  ``p`` is checked for primality on construction."""

    __slots__ = ("p",)

    def __init__(self, p: int):
        p = int(p)
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        self.p = p

    def __call__(self, value: Union[int, Fraction]) -> "PrimeFieldElement":
        if isinstance(value, Fraction):
            return reduce_mod_p(value, self.p)
        return PrimeFieldElement(int(value) % self.p, self.p)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GF) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("GF", self.p))

    def __repr__(self) -> str:
        return f"GF({self.p})"


class PrimeFieldElement:
    """An element of ``F_p``; ``value`` is kept in ``[0, p)``.

    Construct through :class:`GF` (which checks primality) or
    :func:`reduce_mod_p`.
    """

    __slots__ = ("value", "p")

    def __init__(self, value: int, p: int):
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "value", value % p)

    def __setattr__(self, name, value):
        raise AttributeError("PrimeFieldElement is immutable")

    def _coerce(self, other: Any) -> int:
        if isinstance(other, PrimeFieldElement):
            if other.p != self.p:
                raise ScalarKindError(f"mixing F_{self.p} and F_{other.p}")
            return other.value
        if isinstance(other, int):
            return other % self.p
        if isinstance(other, Fraction):
            return reduce_mod_p(other, self.p).value
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return PrimeFieldElement(self.value + o, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return PrimeFieldElement(self.value - o, self.p)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return PrimeFieldElement(o - self.value, self.p)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return PrimeFieldElement(self.value * o, self.p)

    __rmul__ = __mul__

    def inverse(self) -> "PrimeFieldElement":
        if self.value == 0:
            raise ZeroDivisionError("inverse of 0 in a prime field")
        return PrimeFieldElement(pow(self.value, -1, self.p), self.p)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o == 0:
            raise ZeroDivisionError("division by 0 in a prime field")
        return PrimeFieldElement(self.value * pow(o, -1, self.p), self.p)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return PrimeFieldElement(o, self.p) / self

    def __neg__(self):
        return PrimeFieldElement(-self.value, self.p)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        return PrimeFieldElement(pow(self.value, k, self.p), self.p)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, PrimeFieldElement):
            return other.p == self.p and other.value == self.value
        if isinstance(other, int):
            return self.value == other % self.p
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.value, self.p))

    def __bool__(self) -> bool:
        return self.value != 0

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.p})"


def reduce_mod_p(x: Union[int, Fraction], p: int) -> PrimeFieldElement:
    """Image of a rational number in ``F_p``.

    Raises:
        BadPrime: if ``p`` divides the denominator of ``x``.
    """
    x = Fraction(x)
    den = x.denominator % p
    if den == 0:
        raise BadPrime(p, str(x))
    return PrimeFieldElement(x.numerator * pow(den, -1, p), p)


# ---------------------------------------------------------------------------
# Q(zeta_12)


def _frac(x: Any) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise ScalarKindError(f"cannot treat {type(x).__name__} as a rational")


class Cyclotomic12:
    """Element ``c0 + c1 z + c2 z^2 + c3 z^3`` of ``Q[z]/(z^4 - z^2 + 1)``.

    ``z`` stands for the primitive twelfth root of unity ``exp(2 pi i / 12)``.
    """

    __slots__ = ("c",)

    def __init__(self, c0: Any = 0, c1: Any = 0, c2: Any = 0, c3: Any = 0):
        object.__setattr__(self, "c", (_frac(c0), _frac(c1), _frac(c2), _frac(c3)))

    def __setattr__(self, name, value):
        raise AttributeError("Cyclotomic12 is immutable")

    @classmethod
    def _from_poly(cls, coeffs: Iterable[Fraction]) -> "Cyclotomic12":
        """Reduce an arbitrary-degree polynomial in z modulo z^4 - z^2 + 1."""
        c = list(coeffs)
        for d in range(len(c) - 1, 3, -1):
            a = c[d]
            if a:
                # z^d = z^{d-4} * z^4 = z^{d-4} (z^2 - 1)
                c[d - 2] += a
                c[d - 4] -= a
            c[d] = Fraction(0)
        c += [Fraction(0)] * (4 - len(c))
        return cls(*c[:4])

    @staticmethod
    def _coerce(other: Any):
        if isinstance(other, Cyclotomic12):
            return other
        if isinstance(other, (int, Fraction)):
            return Cyclotomic12(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return Cyclotomic12(*(a + b for a, b in zip(self.c, o.c)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return Cyclotomic12(*(a - b for a, b in zip(self.c, o.c)))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o - self

    def __neg__(self):
        return Cyclotomic12(*(-a for a in self.c))

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        prod = [Fraction(0)] * 7
        for i, a in enumerate(self.c):
            if a:
                for j, b in enumerate(o.c):
                    if b:
                        prod[i + j] += a * b
        return Cyclotomic12._from_poly(prod)

    __rmul__ = __mul__

    def _mult_matrix(self):
        cols = []
        for k in range(4):
            e = [0, 0, 0, 0]
            e[k] = 1
            cols.append((self * Cyclotomic12(*e)).c)
        return [[cols[j][i] for j in range(4)] for i in range(4)]

    def inverse(self) -> "Cyclotomic12":
        """Multiplicative inverse, by solving the 4x4 multiplication system."""
        if not self:
            raise ZeroDivisionError("inverse of 0 in Q(zeta12)")
        m = self._mult_matrix()
        aug = [row[:] + [Fraction(1 if i == 0 else 0)] for i, row in enumerate(m)]
        n = 4
        for col in range(n):
            piv = next(r for r in range(col, n) if aug[r][col] != 0)
            aug[col], aug[piv] = aug[piv], aug[col]
            inv = 1 / aug[col][col]
            aug[col] = [v * inv for v in aug[col]]
            for r in range(n):
                if r != col and aug[r][col] != 0:
                    f = aug[r][col]
                    aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
        return Cyclotomic12(*(aug[i][n] for i in range(n)))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int) -> "Cyclotomic12":
        if k < 0:
            return self.inverse() ** (-k)
        result, base = Cyclotomic12(1), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.c == o.c

    def __hash__(self) -> int:
        if not any(self.c[1:]):
            return hash(self.c[0])
        return hash(self.c)

    def __bool__(self) -> bool:
        return any(self.c)

    def is_rational(self) -> bool:
        return not any(self.c[1:])

    def conjugate(self) -> "Cyclotomic12":
        """Complex conjugate (``z -> z^11 = z^{-1}``)."""
        zi = zeta(11)
        out = Cyclotomic12(self.c[0])
        for k in range(1, 4):
            if self.c[k]:
                out = out + self.c[k] * zi ** k
        return out

    def __repr__(self) -> str:
        return f"Cyclotomic12({scalar_to_str(self)!r})"


def zeta(k: int = 1) -> Cyclotomic12:
    """The element ``z^k`` of :class:`Cyclotomic12` (``z^12 = 1``)."""
    k %= 12
    return Cyclotomic12._from_poly([Fraction(0)] * k + [Fraction(1)])


# ---------------------------------------------------------------------------
# arbitrary precision complex


def to_complex(x: Any, digits: int = DEFAULT_DIGITS) -> mpmath.mpc:
    """Convert an exact scalar to an ``mpmath.mpc`` accurate to ``digits`` digits.

    The result is computed under ``mpmath.workdps(digits + 10)``; the
    returned value keeps that precision.
    """
    if digits < 15:
        raise ValueError("digits must be at least 15")
    with mpmath.workdps(digits + 10):
        if isinstance(x, Cyclotomic12):
            w = mpmath.exp(2j * mpmath.pi / 12)
            acc = mpmath.mpc(0)
            for k, a in enumerate(x.c):
                if a:
                    acc += mpmath.mpf(a.numerator) / a.denominator * w**k
            return acc
        if isinstance(x, Fraction):
            return mpmath.mpc(mpmath.mpf(x.numerator) / x.denominator)
        if isinstance(x, PrimeFieldElement):
            raise ScalarKindError("prime field elements have no complex embedding")
        return mpmath.mpc(x)


# ---------------------------------------------------------------------------
# Laurent polynomials


Scalar = Any


def _is_zero(c: Scalar) -> bool:
    return not c


class LaurentPoly:
    """Sparse Laurent polynomial ``sum_e c_e t^e`` with no stored zero coefficients.

    Coefficients may be ints, ``Fraction``, :class:`Cyclotomic12`,
    :class:`PrimeFieldElement`, Python complex or ``mpmath`` numbers; all
    terms of one polynomial should share a kind.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Union[Mapping[int, Scalar], Iterable[Tuple[int, Scalar]], None] = None):
        d: Dict[int, Scalar] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for e, c in items:
                e = int(e)
                if e in d:
                    d[e] = d[e] + c
                else:
                    d[e] = c
        object.__setattr__(self, "_terms", {e: c for e, c in sorted(d.items()) if not _is_zero(c)})
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("LaurentPoly is immutable")

    @classmethod
    def monomial(cls, coeff: Scalar, exp: int = 0) -> "LaurentPoly":
        return cls({exp: coeff})

    @classmethod
    def constant(cls, c: Scalar) -> "LaurentPoly":
        return cls({0: c})

    @property
    def terms(self) -> Dict[int, Scalar]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[int, Scalar]]:
        return iter(self._terms.items())

    def coeff(self, e: int, default: Scalar = 0) -> Scalar:
        return self._terms.get(e, default)

    def __getitem__(self, e: int) -> Scalar:
        return self._terms.get(e, 0)

    def is_zero(self) -> bool:
        return not self._terms

    __bool__ = lambda self: bool(self._terms)  # noqa: E731

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def min_exp(self) -> int | None:
        return next(iter(self._terms)) if self._terms else None

    @property
    def max_exp(self) -> int | None:
        return next(reversed(self._terms)) if self._terms else None

    @staticmethod
    def _coerce(other: Any) -> "LaurentPoly":
        if isinstance(other, LaurentPoly):
            return other
        return LaurentPoly({0: other})

    def __add__(self, other):
        o = self._coerce(other)
        d = dict(self._terms)
        for e, c in o._terms.items():
            d[e] = d[e] + c if e in d else c
        return LaurentPoly(d)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly({e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, LaurentPoly):
            return LaurentPoly({e: c * other for e, c in self._terms.items()})
        d: Dict[int, Scalar] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = e1 + e2
                v = c1 * c2
                d[e] = d[e] + v if e in d else v
        return LaurentPoly(d)

    def __rmul__(self, other):
        return LaurentPoly({e: other * c for e, c in self._terms.items()})

    def __pow__(self, k: int) -> "LaurentPoly":
        if k < 0:
            if len(self._terms) != 1:
                raise ValueError("only monomials can be inverted")
            (e, c), = self._terms.items()
            return LaurentPoly({-e * (-k): (1 / c) ** (-k)})
        out = LaurentPoly({0: 1})
        for _ in range(k):
            out = out * self
        return out

    def shift(self, k: int) -> "LaurentPoly":
        """Multiply by ``t^k``."""
        return LaurentPoly({e + k: c for e, c in self._terms.items()})

    def map_coeffs(self, f: Callable[[Scalar], Scalar]) -> "LaurentPoly":
        return LaurentPoly({e: f(c) for e, c in self._terms.items()})

    def substitute_scale(self, c: Scalar) -> "LaurentPoly":
        """The polynomial ``f(c t)``."""
        out = {}
        for e, a in self._terms.items():
            out[e] = a * (c**e if e >= 0 else (1 / c) ** (-e))
        return LaurentPoly(out)

    def evaluate(self, t: Scalar) -> Scalar:
        acc = 0
        for e, c in self._terms.items():
            acc = acc + c * (t**e if e >= 0 else (1 / t) ** (-e))
        return acc

    def __eq__(self, other: object) -> bool:
        if isinstance(other, LaurentPoly):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction, Cyclotomic12, complex, float)):
            return self == LaurentPoly({0: other})
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        if not self._terms:
            return "LaurentPoly(0)"
        parts = [f"({scalar_to_str(c)})*t^{e}" for e, c in self._terms.items()]
        return "LaurentPoly(" + " + ".join(parts) + ")"


# ---------------------------------------------------------------------------
# literal parsing and printing


def parse_rational(s: str) -> Fraction:
    """Parse ``"p/q"`` or ``"n"`` (surrounding whitespace allowed)."""
    return Fraction(s.strip())


_CYC_TERM = re.compile(
    r"\s*([+-]?)\s*(?:(\d+(?:/\d+)?)\s*\*?\s*)?(z(?:\s*\^\s*(\d+))?)?\s*"
)


def parse_cyclotomic(s: str) -> Cyclotomic12:
    """Parse a polynomial string in ``z`` such as ``"1/2*z^3-2"``."""
    text = s.replace(" ", "")
    if not text:
        raise ValueError("empty cyclotomic literal")
    acc = Cyclotomic12(0)
    pos = 0
    while pos < len(text):
        m = _CYC_TERM.match(text, pos)
        if m is None or m.end() == pos or (m.group(2) is None and m.group(3) is None):
            raise ValueError(f"cannot parse cyclotomic literal {s!r} at {pos}")
        sign = -1 if m.group(1) == "-" else 1
        coef = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        k = 0
        if m.group(3):
            k = int(m.group(4)) if m.group(4) else 1
        acc = acc + zeta(k) * (sign * coef)
        pos = m.end()
    return acc


_COMPLEX = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*"
    r"(?:([+-])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*[ij])?\s*$"
)


_PURE_IMAG = re.compile(r"^\s*([+-]?)\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*[ij]\s*$")


def parse_complex(s: str, digits: int = DEFAULT_DIGITS) -> mpmath.mpc:
    """Parse ``"a+bi"`` (either part optional) at ``digits`` decimal digits."""
    pure = _PURE_IMAG.match(s)
    if pure:
        with mpmath.workdps(digits + 10):
            im = mpmath.mpf(pure.group(2)) if pure.group(2) else mpmath.mpf(1)
            return mpmath.mpc(0, -im if pure.group(1) == "-" else im)
    m = _COMPLEX.match(s)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"cannot parse complex literal {s!r}")
    with mpmath.workdps(digits + 10):
        re_part = mpmath.mpf(m.group(1)) if m.group(1) else mpmath.mpf(0)
        if m.group(2):
            im = mpmath.mpf(m.group(3)) if m.group(3) else mpmath.mpf(1)
            if m.group(2) == "-":
                im = -im
        else:
            im = mpmath.mpf(0)
        return mpmath.mpc(re_part, im)


def parse_scalar(s: str, field: str) -> Scalar:
    """Parse a literal for the field descriptor used in data files.

    ``field`` is one of ``"rational"``, ``"cyclotomic12"``,
    ``"complex"``/``"complex:<digits>"`` or ``"fp:<p>"``.
    """
    if field == "rational":
        return parse_rational(s)
    if field == "cyclotomic12":
        return parse_cyclotomic(s)
    if field.startswith("complex"):
        digits = int(field.split(":")[1]) if ":" in field else DEFAULT_DIGITS
        return parse_complex(s, digits)
    if field.startswith("fp:"):
        p = int(field.split(":")[1])
        return GF(p)(parse_rational(s))
    raise ValueError(f"unknown field {field!r}")


def _mantissa_bits(x: mpmath.mpc) -> int:
    """Bits actually stored in ``x`` (the value keeps the precision it was made at)."""
    bits = 0
    for part in (x.real, x.imag):
        man = part._mpf_[1]
        bits = max(bits, int(man).bit_length())
    return bits


def scalar_to_str(x: Scalar, digits: int | None = None) -> str:
    """Inverse of :func:`parse_scalar` for every supported kind."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, PrimeFieldElement):
        return str(x.value)
    if isinstance(x, Cyclotomic12):
        parts = []
        for k, a in enumerate(x.c):
            if not a:
                continue
            mono = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
            if k == 0:
                body = str(abs(a))
            elif abs(a) == 1:
                body = mono
            else:
                body = f"{abs(a)}*{mono}"
            sign = "-" if a < 0 else "+"
            parts.append((sign, body))
        if not parts:
            return "0"
        s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
        for sign, body in parts[1:]:
            s += sign + body
        return s
    if isinstance(x, (mpmath.mpc, mpmath.mpf, complex, float)):
        if not isinstance(x, mpmath.mpc):
            x = mpmath.mpc(x)
        bits = _mantissa_bits(x)
        n = digits or max(17, int(bits * 0.30103) + 1)
        # arithmetic such as abs() rounds to the working precision, so widen it first
        with mpmath.workprec(max(bits, int(n * 3.33)) + 10):
            re_s = mpmath.nstr(x.real, n, strip_zeros=True, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)
            im = x.imag
            im_s = mpmath.nstr(abs(im), n, strip_zeros=True, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)
        return f"{re_s}{'-' if im < 0 else '+'}{im_s}i"
    raise ScalarKindError(f"unsupported scalar {type(x).__name__}")
