"""Maximal loop classes of a transition graph and symbolic representations of points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import networkx as nx

from .exactnum import FieldElement
from .mps import MatrixProductSystem, is_irreducible, lyapunov_of_cycle
from .netgraph import Edge, TransitionGraph

__all__ = [
    "LoopClass",
    "SymbolicRep",
    "StructureError",
    "NotInAttractor",
    "maximal_loop_classes",
    "essential_class",
    "point_reps",
    "detect_period",
    "is_degenerate",
    "class_of_path",
]

LAMBDA_TOL = 1e-12


class StructureError(RuntimeError):
    """The graph does not have the structure the theory guarantees."""


class NotInAttractor(ValueError):
    """The requested point is not in the attractor."""


@dataclass
class LoopClass:
    """A maximal strongly connected subgraph with at least one edge."""

    id: int
    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    simple: bool
    essential: bool
    irreducible: bool
    cycle: tuple[int, ...] = ()
    lam: float | None = None
    degenerate: bool | None = None
    degeneracy_witness: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        if self.essential:
            return "essential"
        if self.simple:
            return "simple"
        return "irreducible" if self.irreducible else "reducible"

    def label(self, G: TransitionGraph) -> str:
        vs = ",".join(G.vertex_label(v) for v in self.vertices)
        return "{" + vs + "}"


def _edges_within(G: TransitionGraph, vs) -> list[Edge]:
    return [e for e in G.edges if e.source in vs and e.target in vs]


def _simple_cycle(G: TransitionGraph, vs, edges: Sequence[Edge]) -> tuple[int, ...]:
    out = {e.source: e for e in edges}
    start = min(vs)
    cyc = []
    v = start
    while True:
        e = out[v]
        cyc.append(e.id)
        v = e.target
        if v == start:
            return tuple(cyc)


def maximal_loop_classes(G: TransitionGraph, probs=None) -> list[LoopClass]:
    """Loop classes ordered by least vertex, with structural flags.

    Degeneracy of simple classes depends on the probabilities and is set
    when ``probs`` is given.
    """
    N = G.to_networkx()
    comps = []
    for c in nx.strongly_connected_components(N):
        edges = _edges_within(G, c)
        if edges:
            comps.append((min(c), c, edges))
    comps.sort(key=lambda x: x[0])
    classes = []
    ref = probs if probs is not None else G.ifs.probs
    for k, (_, c, edges) in enumerate(comps):
        vs = tuple(sorted(c))
        simple = len(edges) == len(vs)
        essential = all(e.target in c for v in vs for e in G.out_edges(v))
        mps = MatrixProductSystem.from_graph(G, ref, vs)
        irreducible = is_irreducible(mps).irreducible
        cls = LoopClass(k, vs, tuple(e.id for e in edges), simple, essential, irreducible)
        if simple:
            cls.cycle = _simple_cycle(G, c, edges)
            if probs is not None:
                cls.lam = lyapunov_of_cycle(mps, cls.cycle)
        classes.append(cls)
    if probs is not None:
        for cls in classes:
            if cls.simple:
                cls.degenerate, cls.degeneracy_witness = is_degenerate(cls, G, probs, classes)
    return classes


def essential_class(G: TransitionGraph, classes: Sequence[LoopClass] | None = None) -> LoopClass:
    """The unique essential class, checked to be irreducible."""
    classes = classes if classes is not None else maximal_loop_classes(G)
    ess = [c for c in classes if c.essential]
    if len(ess) != 1:
        raise StructureError(f"expected one essential class, found {len(ess)}")
    if not ess[0].irreducible:
        raise StructureError("essential class is not irreducible")
    return ess[0]


def class_of_path(classes: Sequence[LoopClass], path: Sequence[int], G: TransitionGraph):
    """The loop class containing every edge of ``path``, or None."""
    verts = {G.edges[e].source for e in path} | {G.edges[e].target for e in path}
    for c in classes:
        if verts <= set(c.vertices) and set(path) <= set(c.edges):
            return c
    return None


# --- symbolic representations ---------------------------------------------------------


@dataclass
class SymbolicRep:
    """A path from the root describing a point.

    When the walk repeats a state the representation is eventually periodic
    and ``preperiod`` and ``period`` are set; ``path`` always holds the
    explicit prefix that was walked.
    """

    path: tuple[int, ...]
    preperiod: tuple[int, ...] | None = None
    period: tuple[int, ...] | None = None

    @property
    def periodic(self) -> bool:
        return self.period is not None

    def unrolled(self, n: int) -> tuple[int, ...]:
        """The first ``n`` edges."""
        if not self.periodic:
            if n > len(self.path):
                raise ValueError("representation is not periodic; prefix too short")
            return self.path[:n]
        out = list(self.preperiod)
        while len(out) < n:
            out.extend(self.period)
        return tuple(out[:n])


def _containing(G: TransitionGraph, v: int, y: FieldElement) -> list[Edge]:
    return [e for e in G.out_edges(v) if e.q <= y <= e.q + e.d]


def detect_period(G: TransitionGraph, v: int, y: FieldElement, depth: int):
    """Walk down from state ``(v, y)`` following every containing child.

    Returns one :class:`SymbolicRep` per surviving branch (at most two).  A
    branch is periodic once its state ``(vertex, y)`` repeats.
    """
    branches = [((), {(v, y): 0}, v, y)]
    done = []
    for _ in range(depth):
        nxt = []
        for path, hist, u, yy in branches:
            for e in _containing(G, u, yy):
                y2 = (yy - e.q) / e.d
                p2 = path + (e.id,)
                state = (e.target, y2)
                if state in hist:
                    k = hist[state]
                    done.append(SymbolicRep(p2, p2[:k], p2[k:]))
                    continue
                h2 = dict(hist)
                h2[state] = len(p2)
                nxt.append((p2, h2, e.target, y2))
        branches = nxt
        if not branches:
            break
    done.extend(SymbolicRep(path) for path, _, _, _ in branches)
    return sorted(done, key=lambda r: r.path)


def point_reps(x, G: TransitionGraph, depth: int = 200) -> list[SymbolicRep]:
    """Symbolic representations of ``x`` from the root (one or two)."""
    F = G.ifs.field
    x = F(x) if not isinstance(x, FieldElement) else x
    if not (F.zero <= x <= F.one):
        raise NotInAttractor(f"{x} is outside [0, 1]")
    reps = detect_period(G, G.root, x, depth)
    if not reps:
        raise NotInAttractor(f"{x} is not in the attractor")
    return reps


# --- degeneracy -----------------------------------------------------------------------


def _descent(G: TransitionGraph, v: int, side: str):
    """Leftmost or rightmost descent from ``v`` as ``(prefix, cycle)`` edge tuples."""
    F = G.ifs.field
    seen = {}
    path = []
    while v not in seen:
        seen[v] = len(path)
        if side == "left":
            es = [e for e in G.out_edges(v) if e.q.is_zero()]
        else:
            es = [e for e in G.out_edges(v) if e.q + e.d == F.one]
        if len(es) != 1:
            raise StructureError(f"{side} endpoint of {G.vertex_label(v)} has {len(es)} children")
        path.append(es[0].id)
        v = es[0].target
    k = seen[v]
    return tuple(path[:k]), tuple(path[k:])


def _same_cycle(a: Sequence[int], b: Sequence[int]) -> bool:
    return len(a) == len(b) and set(a) == set(b)


def _cycle_value(G, probs, cyc, cache):
    key = frozenset(cyc)
    if key not in cache:
        verts = {G.edges[e].source for e in cyc}
        mps = MatrixProductSystem.from_graph(G, probs, verts)
        cache[key] = lyapunov_of_cycle(mps, cyc)
    return cache[key]


def _exact_1x1(G, probs, cyc):
    """``(rational spr, exact weight)`` of a cycle through 1x1 matrices, or None."""
    spr = Fraction(1)
    W = G.ifs.field.one
    for eid in cyc:
        e = G.edges[eid]
        if e.shape != (1, 1):
            return None
        spr *= e.matrix_exact(probs)[0][0]
        W = W * e.W
    return spr, W


def _lam_le(G, probs, c1, c2, l1, l2) -> bool:
    """``lambda(c1) <= lambda(c2)`` with an exact tie-break for 1x1 cycles."""
    if abs(l1 - l2) > 1e-9 * max(1.0, abs(l1)):
        return l1 <= l2
    a = _exact_1x1(G, probs, c1)
    b = _exact_1x1(G, probs, c2)
    if a and b:
        (a1, W1), (a2, W2) = a, b
        for k1 in range(1, 13):
            for k2 in range(1, 13):
                if W1**k1 == W2**k2:
                    # log W2 = (k1/k2) log W1 with log W1 < 0
                    return a1**k1 >= a2**k2
    return l1 <= l2 + LAMBDA_TOL


def is_degenerate(cls: LoopClass, G: TransitionGraph, probs, classes=None):
    """Decide degeneracy of a simple class.

    Returns ``(degenerate, witness)``.  The class is non-degenerate when some
    point of its attractor part has a unique representation, or has a second
    representation whose cycle value is not smaller.
    """
    if not cls.simple:
        raise ValueError("degeneracy is defined for simple classes")
    F = G.ifs.field
    cache: dict = {}
    theta = cls.cycle
    lam = _cycle_value(G, probs, theta, cache)
    qs = [G.edges[e].q for e in theta]
    ends = [G.edges[e].q + G.edges[e].d for e in theta]
    if all(q.is_zero() for q in qs):
        side = "left"
    elif all(r == F.one for r in ends):
        side = "right"
    else:
        return False, {"reason": "class contains a point with a unique representation"}

    other = "right" if side == "left" else "left"
    _, root_cyc = _descent(G, G.root, side)
    if _same_cycle(root_cyc, theta):
        x = "0" if side == "left" else "1"
        return False, {"reason": f"x={x} has a unique representation"}

    candidates = []
    for u in range(G.n_vertices):
        out = sorted(G.out_edges(u), key=lambda e: e.q)
        for k, e in enumerate(out):
            if side == "left" and e.q.is_zero():
                continue
            if side == "right" and e.q + e.d == F.one:
                continue
            _, cyc = _descent(G, e.target, side)
            if not _same_cycle(cyc, theta):
                continue
            if side == "left":
                sib = out[k - 1] if k > 0 else None
                adjacent = sib is not None and sib.q + sib.d == e.q
            else:
                sib = out[k + 1] if k + 1 < len(out) else None
                adjacent = sib is not None and sib.q == e.q + e.d
            if not adjacent:
                return False, {"reason": "an endpoint next to a gap has a unique representation",
                               "edge": G.edges[e.id].label}
            _, cyc2 = _descent(G, sib.target, other)
            lam2 = _cycle_value(G, probs, cyc2, cache)
            candidates.append((e.id, sib.id, cyc2, lam2))
            if _lam_le(G, probs, theta, cyc2, lam, lam2):
                return False, {
                    "reason": "boundary point attains the cycle value",
                    "edge": G.edges[e.id].label,
                    "sibling": G.edges[sib.id].label,
                    "other_cycle": [G.edges[i].label for i in cyc2],
                    "other_value": lam2,
                }
    if not candidates:
        raise StructureError("simple class with no point reaching it")
    best = min(candidates, key=lambda c: c[3])
    return True, {
        "reason": "every point has a second representation with a smaller value",
        "other_cycle": [G.edges[i].label for i in best[2]],
        "other_value": best[3],
        "value": lam,
    }
