"""Iterated function systems of similarities with exact coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .exactnum import FieldElement, NumberField

__all__ = [
    "IFSError",
    "UndecidedError",
    "Similarity",
    "IFS",
    "Word",
    "compose",
    "words_of_generation",
    "attractor_meets",
]

Word = tuple  # tuple of 0-based letters


class IFSError(ValueError):
    """An IFS whose data violates the structural requirements."""


class UndecidedError(RuntimeError):
    """The attractor intersection test hit its work cap without a verdict."""


@dataclass(frozen=True)
class Similarity:
    """The map ``x -> r*x + d``."""

    r: FieldElement
    d: FieldElement

    def __call__(self, x):
        return self.r * x + self.d

    def then(self, other: "Similarity") -> "Similarity":
        """``self ∘ other``: apply ``other`` first."""
        return Similarity(self.r * other.r, self.r * other.d + self.d)

    def inverse(self) -> "Similarity":
        inv = self.r.inverse()
        return Similarity(inv, -self.d * inv)

    def image(self, lo=0, hi=1) -> tuple[FieldElement, FieldElement]:
        """Image of ``[lo, hi]`` as an ordered pair."""
        a, b = self(lo), self(hi)
        return (a, b) if a <= b else (b, a)

    @property
    def abs_r(self) -> FieldElement:
        return abs(self.r)

    def __str__(self):
        return f"({self.r})x + ({self.d})"


@dataclass(frozen=True)
class IFS:
    """Contracting similarities with a probability vector.

    The convex hull of the attractor is normalised to ``[0, 1]``.
    """

    field: NumberField
    maps: tuple[Similarity, ...]
    probs: tuple[Fraction, ...]
    name: str = ""

    def __post_init__(self):
        maps = tuple(self.maps)
        probs = tuple(Fraction(p) for p in self.probs)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "probs", probs)
        if len(maps) < 2:
            raise IFSError("an IFS needs at least two maps")
        if len(probs) != len(maps):
            raise IFSError(f"{len(probs)} probabilities for {len(maps)} maps")
        if any(p <= 0 for p in probs):
            raise IFSError("probabilities must be positive")
        if sum(probs) != 1:
            raise IFSError(f"probabilities sum to {sum(probs)}, not 1")
        for i, s in enumerate(maps):
            if s.r.field != self.field or s.d.field != self.field:
                raise IFSError(f"map {i + 1} has coefficients in a different field")
            if s.r.is_zero() or not abs(s.r) < 1:
                raise IFSError(f"map {i + 1} is not a contraction: r = {s.r}")
        if len(set(maps)) != len(maps):
            raise IFSError("maps must be distinct")
        ends = [e for s in maps for e in (s(0), s(1))]
        if min(ends) != 0 or max(ends) != 1:
            raise IFSError("the convex hull of the attractor must be [0, 1]")

    @property
    def m(self) -> int:
        return len(self.maps)

    def with_probs(self, probs: Sequence) -> "IFS":
        return IFS(self.field, self.maps, tuple(Fraction(p) for p in probs), self.name)

    def covers_unit_interval(self) -> bool:
        """True iff the first-level images cover ``[0, 1]``, i.e. ``K = [0, 1]``."""
        return _covers(self, [s.image() for s in self.maps])

    def max_abs_r(self) -> FieldElement:
        return max(s.abs_r for s in self.maps)


def _covers(ifs: IFS, intervals) -> bool:
    reach = ifs.field.zero
    for lo, hi in sorted(intervals, key=lambda iv: iv[0]):
        if lo > reach:
            return False
        if hi > reach:
            reach = hi
    return reach == 1


def compose(ifs: IFS, w: Iterable[int]) -> Similarity:
    """``S_{w_1} ∘ ... ∘ S_{w_k}``; the empty word gives the identity."""
    one, zero = ifs.field.one, ifs.field.zero
    s = Similarity(one, zero)
    for letter in w:
        s = s.then(ifs.maps[letter])
    return s


def words_of_generation(ifs: IFS, t) -> dict[Word, Similarity]:
    """Words ``w`` with ``|r_w| < t <= |r_{w^-}|``, mapped to ``S_w``.

    ``t`` may be a field element (exact comparisons) or a float.  For
    ``t > 1`` the result is empty.
    """
    if isinstance(t, (int, Fraction)):
        t = ifs.field(t)
    exact = isinstance(t, FieldElement)
    if exact and t.sign() <= 0 or not exact and t <= 0:
        raise ValueError("t must be positive")
    if (t > 1) if exact else (t > 1.0):
        return {}

    def below(r):
        return r < t if exact else float(r) < t

    out = {}
    stack: list[tuple[Word, Similarity]] = [((), compose(ifs, ()))]
    while stack:
        w, s = stack.pop()
        for letter, f in enumerate(ifs.maps):
            child = s.then(f)
            cw = w + (letter,)
            if below(abs(child.r)):
                out[cw] = child
            else:
                stack.append((cw, child))
    return dict(sorted(out.items()))


def attractor_meets(ifs: IFS, a, b, cap: int = 200_000) -> bool:
    """Decide whether the attractor meets the open interval ``(a, b)``.

    Cylinder endpoints lie in the attractor, so any cylinder endpoint inside
    ``(a, b)`` answers yes.  Otherwise only cylinders covering ``[a, b]`` can
    still meet it, and those shrink geometrically.
    """
    if not a < b:
        return False
    if b <= 0 or a >= 1:
        return False
    if ifs.covers_unit_interval():
        return True
    seen = set()
    frontier = [compose(ifs, ())]
    work = 0
    while frontier:
        nxt = []
        for s in frontier:
            for f in ifs.maps:
                c = s.then(f)
                if c in seen:
                    continue
                seen.add(c)
                work += 1
                if work > cap:
                    raise UndecidedError(
                        f"attractor test on ({a}, {b}) undecided after {cap} cylinders"
                    )
                lo, hi = c.image()
                if a < lo < b or a < hi < b:
                    return True
                if lo <= a and b <= hi:
                    nxt.append(c)
        frontier = nxt
    return False
