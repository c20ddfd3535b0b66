"""Exact arithmetic in a real number field Q(theta).

Elements are dense vectors of rationals reduced modulo the minimal
polynomial of theta, so equality is a coefficient compare.  The sign of
an element is decided by evaluating it on an isolating interval for theta
that is refined on demand.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Sequence, Union

Rational = Union[int, Fraction]

__all__ = [
    "FieldError",
    "ParseError",
    "NumberField",
    "FieldElement",
    "parse_element",
    "parse_polynomial",
    "sign",
    "to_float",
    "arith",
]


class FieldError(ArithmeticError):
    """Invalid field data or an undefined field operation."""


class ParseError(ValueError):
    """Raised for text that is not in the element grammar."""

    def __init__(self, message: str, text: str = "", pos: int | None = None):
        if pos is not None:
            message = f"{message} at position {pos} in {text!r}"
        super().__init__(message)
        self.text = text
        self.pos = pos


# --- dense polynomials over Q, coefficient lists low -> high -----------------


def _trim(p: list[Fraction]) -> list[Fraction]:
    while p and p[-1] == 0:
        p.pop()
    return p


def _pmul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def _psub(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    n = max(len(a), len(b))
    out = [Fraction(0)] * n
    for i, x in enumerate(a):
        out[i] += x
    for i, y in enumerate(b):
        out[i] -= y
    return _trim(out)


def _pdivmod(a: Sequence[Fraction], b: Sequence[Fraction]):
    a = list(a)
    b = _trim(list(b))
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    lead = b[-1]
    while len(_trim(a)) >= len(b):
        shift = len(a) - len(b)
        c = a[-1] / lead
        q[shift] = c
        for i, y in enumerate(b):
            a[i + shift] -= c * y
        a.pop()
    return _trim(q), _trim(a)


def _peval(p: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _imul(a: tuple[Fraction, Fraction], b: tuple[Fraction, Fraction]):
    prods = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(prods), max(prods)


def _ieval(p: Sequence[Fraction], lo: Fraction, hi: Fraction):
    """Interval Horner evaluation of p over [lo, hi]."""
    acc = (Fraction(0), Fraction(0))
    for c in reversed(p):
        acc = _imul(acc, (lo, hi))
        acc = (acc[0] + c, acc[1] + c)
    return acc


# --- the field ----------------------------------------------------------------


class NumberField:
    """The real field Q(theta) for one real root theta of an irreducible polynomial.

    Parameters
    ----------
    minimal_polynomial : sequence of int
        Integer coefficients, constant term first.
    root_interval : pair of rationals
        An interval containing exactly one real root of the polynomial.
    generator : str
        Name of theta in the element grammar.
    """

    def __init__(
        self,
        minimal_polynomial: Sequence[int],
        root_interval: tuple[Rational, Rational],
        generator: str = "theta",
    ):
        poly = [Fraction(int(c)) for c in minimal_polynomial]
        if any(Fraction(c) != int(c) for c in minimal_polynomial):
            raise FieldError("minimal polynomial must have integer coefficients")
        poly = _trim(poly)
        if len(poly) < 2:
            raise FieldError("minimal polynomial must have degree >= 1")
        lo, hi = (Fraction(v) for v in root_interval)
        if not lo < hi:
            raise FieldError("root interval must satisfy lo < hi")
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", generator):
            raise FieldError(f"invalid generator name {generator!r}")
        self.minimal_polynomial = tuple(int(c) for c in poly)
        self.degree = len(poly) - 1
        self.generator = generator
        self._monic = [c / poly[-1] for c in poly]
        if self.degree == 1:
            root = -self._monic[0]
            if not lo <= root <= hi:
                raise FieldError("root interval does not contain the root")
            self.root_interval = (lo, hi)
            self._theta = [root, root]
        else:
            _check_isolating(self.minimal_polynomial, lo, hi)
            self.root_interval = (lo, hi)
            # refined in place by sign(); the represented root never changes
            self._theta = [lo, hi]
        self._theta_float: float | None = None
        # x^k mod f for k = degree .. 2*degree - 2
        self._reductions: list[list[Fraction]] = []
        for k in range(self.degree, 2 * self.degree - 1):
            xk = [Fraction(0)] * k + [Fraction(1)]
            self._reductions.append(_pdivmod(xk, self._monic)[1])

    @classmethod
    def rationals(cls) -> "NumberField":
        """Q as the degree-one field whose generator is fixed to 1."""
        return cls((-1, 1), (0, 2), generator="one")

    # value-based identity so configs parsed twice give the same field;
    # isolating intervals of the same polynomial overlap iff they hold the same root
    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, NumberField):
            return NotImplemented
        if (self.minimal_polynomial, self.generator) != (
            other.minimal_polynomial,
            other.generator,
        ):
            return False
        lo = max(self._theta[0], other._theta[0])
        hi = min(self._theta[1], other._theta[1])
        return lo <= hi

    def __hash__(self):
        return hash((self.minimal_polynomial, self.generator))

    def __repr__(self):
        return (
            f"NumberField({self.polynomial_text()}, root in "
            f"[{self.root_interval[0]}, {self.root_interval[1]}])"
        )

    @property
    def is_rational(self) -> bool:
        return self.degree == 1

    def polynomial_text(self) -> str:
        terms = []
        for k, c in enumerate(self.minimal_polynomial):
            if c:
                terms.append(_term_text(Fraction(c), "x", k))
        return _join_terms(terms)

    # -- constructors --
    def element(self, coeffs: Sequence[Rational]) -> "FieldElement":
        return FieldElement(self, self._reduce([Fraction(c) for c in coeffs]))

    def __call__(self, value: Union[Rational, str, "FieldElement"]) -> "FieldElement":
        if isinstance(value, FieldElement):
            if value.field != self:
                raise FieldError("element belongs to a different field")
            return value
        if isinstance(value, str):
            return parse_element(value, self)
        return self.element([value])

    @property
    def gen(self) -> "FieldElement":
        if self.degree == 1:
            return self.element([self._theta[0]])
        return self.element([0, 1])

    @property
    def zero(self) -> "FieldElement":
        return self.element([0])

    @property
    def one(self) -> "FieldElement":
        return self.element([1])

    # -- internals --
    def _reduce(self, p: list[Fraction]) -> tuple[Fraction, ...]:
        p = list(p)
        n = self.degree
        if len(p) > 2 * n - 1:
            p = _pdivmod(p, self._monic)[1]
        out = [Fraction(0)] * n
        for k, c in enumerate(p):
            if k < n:
                out[k] += c
            elif c:
                for j, r in enumerate(self._reductions[k - n]):
                    out[j] += c * r
        return tuple(out)

    def _refine(self, steps: int = 1) -> None:
        lo, hi = self._theta
        if lo == hi:
            return
        f = self.minimal_polynomial
        flo = _peval([Fraction(c) for c in f], lo)
        for _ in range(steps):
            mid = (lo + hi) / 2
            fm = _peval([Fraction(c) for c in f], mid)
            if fm == 0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        self._theta = [lo, hi]
        self._theta_float = None

    def theta_interval(self, width: Fraction | None = None) -> tuple[Fraction, Fraction]:
        """Current isolating interval for theta, refined below ``width`` if given."""
        if width is not None:
            while self._theta[1] - self._theta[0] > width:
                self._refine(16)
        return self._theta[0], self._theta[1]

    def theta_float(self) -> float:
        if self._theta_float is None:
            self.theta_interval(Fraction(1, 2**64))
            lo, hi = self._theta
            self._theta_float = float((lo + hi) / 2)
        return self._theta_float


def _check_isolating(poly: Sequence[int], lo: Fraction, hi: Fraction) -> None:
    import sympy

    x = sympy.Symbol("x")
    P = sympy.Poly(list(reversed(poly)), x, domain="QQ")
    if not P.is_irreducible:
        raise FieldError(f"polynomial {P.as_expr()} is not irreducible over Q")
    n = P.count_roots(sympy.Rational(lo.numerator, lo.denominator),
                      sympy.Rational(hi.numerator, hi.denominator))
    if n != 1:
        raise FieldError(
            f"root interval [{lo}, {hi}] contains {n} real roots of {P.as_expr()}"
        )


def _term_text(c: Fraction, name: str, k: int) -> str:
    mono = "" if k == 0 else (name if k == 1 else f"{name}^{k}")
    if not mono:
        return str(c)
    if c == 1:
        return mono
    if c == -1:
        return "-" + mono
    return f"{c}*{mono}"


def _join_terms(terms: list[str]) -> str:
    if not terms:
        return "0"
    out = terms[0]
    for t in terms[1:]:
        out += " - " + t[1:] if t.startswith("-") else " + " + t
    return out


class FieldElement:
    """An immutable element of a :class:`NumberField`."""

    __slots__ = ("field", "coeffs", "_float", "_hash")

    def __init__(self, field: NumberField, coeffs: tuple[Fraction, ...]):
        self.field = field
        self.coeffs = coeffs
        self._float: float | None = None
        self._hash: int | None = None

    # -- coercion --
    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.field is not self.field and other.field != self.field:
                raise FieldError("mixed-field arithmetic")
            return other
        if isinstance(other, (int, Fraction)):
            return self.field.element([other])
        return NotImplemented

    # -- arithmetic --
    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return FieldElement(self.field, tuple(a + b for a, b in zip(self.coeffs, o.coeffs)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return FieldElement(self.field, tuple(a - b for a, b in zip(self.coeffs, o.coeffs)))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __neg__(self):
        return FieldElement(self.field, tuple(-a for a in self.coeffs))

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.field.degree == 1:
            return FieldElement(self.field, (self.coeffs[0] * o.coeffs[0],))
        return FieldElement(self.field, self.field._reduce(_pmul(self.coeffs, o.coeffs)))

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise ZeroDivisionError("division by the zero element")
        if self.field.degree == 1:
            return FieldElement(self.field, (1 / self.coeffs[0],))
        # extended Euclid: u*a + v*f = 1
        f = list(self.field._monic)
        r0, r1 = f, _trim(list(self.coeffs))
        s0, s1 = [], [Fraction(1)]
        while r1:
            q, r = _pdivmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, _psub(s0, _pmul(q, s1))
        # r0 is a nonzero constant since f is irreducible
        if len(r0) != 1:
            raise FieldError("minimal polynomial is not irreducible")
        inv = [c / r0[0] for c in s0]
        return FieldElement(self.field, self.field._reduce(inv))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = self.field.one
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- comparison --
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def sign(self) -> int:
        return sign(self)

    def __abs__(self):
        return -self if sign(self) < 0 else self

    def __eq__(self, other):
        o = self._coerce(other) if isinstance(other, (FieldElement, int, Fraction)) else NotImplemented
        if o is NotImplemented:
            return NotImplemented
        return self.coeffs == o.coeffs

    def __hash__(self):
        if self._hash is None:
            if all(c == 0 for c in self.coeffs[1:]):
                self._hash = hash(self.coeffs[0])
            else:
                self._hash = hash(self.coeffs)
        return self._hash

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is NotImplemented:
            raise TypeError(f"cannot compare FieldElement with {type(other).__name__}")
        return sign(self - o)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __float__(self):
        if self._float is None:
            self._float = to_float(self, 1e-15 * max(1.0, abs(self._approx())))
        return self._float

    def _approx(self) -> float:
        th = self.field.theta_float()
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * th + float(c)
        return acc

    def as_rational(self) -> Fraction:
        """The element as a rational, if it lies in Q."""
        if self.field.degree == 1:
            return self.coeffs[0]
        if any(self.coeffs[1:]):
            raise FieldError(f"{self} is not rational")
        return self.coeffs[0]

    def is_rational(self) -> bool:
        return self.field.degree == 1 or not any(self.coeffs[1:])

    def __str__(self):
        if self.field.degree == 1:
            return str(self.coeffs[0])
        terms = [
            _term_text(c, self.field.generator, k) for k, c in enumerate(self.coeffs) if c
        ]
        return _join_terms(terms)

    def __repr__(self):
        return f"FieldElement({self})"


def sign(a: FieldElement) -> int:
    """Exact sign of ``a`` at the selected root."""
    coeffs = a.coeffs
    if not any(coeffs[1:]):
        c = coeffs[0]
        return (c > 0) - (c < 0)
    field = a.field
    # Float fast path: Horner error is at most a few ulps of sum |c_i||theta|^i,
    # so a margin of 1e-9 relative to that sum leaves the sign certain.
    try:
        th = field.theta_float()
        v = 0.0
        bound = 0.0
        for c in reversed(coeffs):
            fc = float(c)
            v = v * th + fc
            bound = bound * abs(th) + abs(fc)
        if abs(v) > 1e-9 * bound:
            return 1 if v > 0 else -1
    except OverflowError:
        pass
    while True:
        lo, hi = field._theta
        vlo, vhi = _ieval(coeffs, lo, hi)
        if vlo > 0:
            return 1
        if vhi < 0:
            return -1
        if lo == hi:
            return 0  # unreachable for a nonzero element of an irreducible field
        field._refine(8)


def to_float(a: FieldElement, abs_err: float) -> float:
    """A float within ``abs_err`` of ``a``."""
    if abs_err <= 0:
        raise ValueError("abs_err must be positive")
    if a.field.degree == 1 or not any(a.coeffs[1:]):
        return float(a.coeffs[0])
    field = a.field
    tol = Fraction(abs_err) / 2
    while True:
        lo, hi = field._theta
        vlo, vhi = _ieval(a.coeffs, lo, hi)
        if vhi - vlo <= tol:
            return float((vlo + vhi) / 2)
        field._refine(8)


def arith(a: FieldElement, b: FieldElement, op: str) -> FieldElement:
    """Apply ``op`` in {'add', 'sub', 'mul', 'div'}."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


# --- grammar ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace
            break
        if m.group(1) is not None:
            tokens.append(("int", int(m.group(1)), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", text, m.start(3))
            tokens.append((ch, ch, m.start(3)))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    """Recursive descent over the element grammar.

    The grammar is extended with a unary minus so negative literals such as
    ``-1/4`` can be written directly.
    """

    def __init__(self, text, const: Callable, name: Callable, power: Callable):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.const = const
        self.name = name
        self.power = power

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self):
        value = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", self.text, tok[2])
        return value

    def expr(self):
        if self.peek()[0] == "-":
            self.take()
            value = -self.term()
        else:
            if self.peek()[0] == "+":
                self.take()
            value = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self):
        value = self.factor()
        while self.peek()[0] in ("*", "/"):
            op, _, pos = self.take()
            rhs = self.factor()
            if op == "*":
                value = value * rhs
            else:
                try:
                    value = value / rhs
                except ZeroDivisionError:
                    raise ParseError("division by zero", self.text, pos) from None
        return value

    def factor(self):
        base = self.base()
        if self.peek()[0] == "^":
            _, _, pos = self.take()
            neg = False
            if self.peek()[0] == "-":
                self.take()
                neg = True
            n = self.take("int")[1]
            try:
                base = self.power(base, -n if neg else n)
            except ZeroDivisionError:
                raise ParseError("negative exponent on zero", self.text, pos) from None
        return base

    def base(self):
        tok = self.peek()
        if tok[0] == "int":
            self.take()
            return self.const(Fraction(tok[1]))
        if tok[0] == "name":
            self.take()
            return self.name(tok[1], tok[2])
        if tok[0] == "(":
            self.take()
            value = self.expr()
            self.take(")")
            return value
        if tok[0] == "-":
            self.take()
            return -self.base()
        raise ParseError(f"unexpected {tok[1]!r}", self.text, tok[2])


def parse_element(text: str, field: NumberField) -> FieldElement:
    """Parse ``text`` in the element grammar into a canonical element of ``field``."""

    def name(n, pos):
        if n != field.generator:
            raise ParseError(f"unknown name {n!r}", text, pos)
        return field.gen

    def power(b, n):
        if n < 0 and b.is_zero():
            raise ZeroDivisionError
        return b**n

    if not isinstance(text, str):
        raise ParseError(f"expected a string, got {type(text).__name__}")
    return _Parser(text, lambda c: field.element([c]), name, power).parse()


class _Poly:
    """Minimal Q[x] arithmetic used to read minimal polynomials."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = _trim(list(c))

    def __add__(self, o):
        return _Poly(_psub(self.c, [-x for x in o.c]))

    def __sub__(self, o):
        return _Poly(_psub(self.c, o.c))

    def __neg__(self):
        return _Poly([-x for x in self.c])

    def __mul__(self, o):
        return _Poly(_pmul(self.c, o.c))

    def __truediv__(self, o):
        if len(o.c) != 1:
            raise ParseError("polynomial division is only allowed by constants")
        return _Poly([x / o.c[0] for x in self.c])

    def __pow__(self, n):
        if n < 0:
            raise ParseError("negative exponent in polynomial")
        out = _Poly([Fraction(1)])
        for _ in range(n):
            out = out * self
        return out


def parse_polynomial(text: str, variable: str) -> list[int]:
    """Parse an integer polynomial in ``variable``; returns coefficients low -> high."""

    def name(n, pos):
        if n != variable:
            raise ParseError(f"unknown name {n!r}", text, pos)
        return _Poly([Fraction(0), Fraction(1)])

    poly = _Parser(text, lambda c: _Poly([c]), name, lambda b, n: b**n).parse()
    if any(c.denominator != 1 for c in poly.c):
        # scale to a primitive integer polynomial
        import math

        lcm = 1
        for c in poly.c:
            lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
        poly = _Poly([c * lcm for c in poly.c])
    return [int(c) for c in poly.c]
