"""Net intervals, neighbour sets and the finite transition graph.

Everything is computed in coordinates normalised to the current net
interval: a neighbour ``f(x) = R*x + a`` is ``T^{-1} ∘ S_w`` where ``T``
maps ``[0, 1]`` onto the net interval.  Children of a net interval depend
only on its neighbour set, so the graph is built by expanding each distinct
neighbour set once.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key
from typing import Sequence

import numpy as np

from .exactnum import FieldElement
from .ifs import IFS, Similarity, attractor_meets, compose, words_of_generation

__all__ = [
    "GraphError",
    "FNCUndetected",
    "Neighbour",
    "NetInterval",
    "Edge",
    "Child",
    "TransitionGraph",
    "canonical_order",
    "expand",
    "build_transition_graph",
    "net_intervals",
    "neighbour_set",
    "children",
    "transition_matrix",
    "to_dot",
    "to_json",
]


class GraphError(RuntimeError):
    """An internal consistency check of the construction failed."""


class FNCUndetected(RuntimeError):
    """Closure did not terminate within the vertex budget."""

    def __init__(self, message: str, frontier: list | None = None):
        super().__init__(message)
        self.frontier = frontier or []


@dataclass(frozen=True)
class Neighbour:
    """Normalised neighbour ``x -> R*x + a``."""

    R: FieldElement
    a: FieldElement

    def __call__(self, x):
        return self.R * x + self.a

    def as_similarity(self) -> Similarity:
        return Similarity(self.R, self.a)

    def __str__(self):
        R = str(self.R)
        if R == "1":
            head = "x"
        elif R == "-1":
            head = "-x"
        else:
            head = f"({R})*x" if " " in R else f"{R}*x"
        if self.a.is_zero():
            return head
        if self.a.sign() < 0:
            op, a = "-", str(-self.a)
        else:
            op, a = "+", str(self.a)
        return f"{head} {op} {a}" if " " not in a else f"{head} {op} ({a})"


def _cmp_neighbours(f: Neighbour, g: Neighbour) -> int:
    # |R| descending, then positive R before negative, then a ascending
    c = (abs(g.R) - abs(f.R)).sign()
    if c:
        return c
    c = g.R.sign() - f.R.sign()
    if c:
        return 1 if c > 0 else -1
    return (f.a - g.a).sign()


def canonical_order(neighbours) -> tuple[Neighbour, ...]:
    """Distinct neighbours in the canonical total order."""
    return tuple(sorted(set(neighbours), key=cmp_to_key(_cmp_neighbours)))


NeighbourSet = tuple  # canonically ordered tuple of Neighbour


@dataclass(frozen=True)
class Child:
    """One child of a normalised net interval.

    ``q`` and ``d`` are the child's left endpoint and length in parent
    coordinates.  ``entries`` maps ``(i, j)`` to the letter ``l`` with
    ``g_j = f_i ∘ S_l``, or to ``None`` when ``g_j`` is ``f_i`` carried over.
    """

    q: FieldElement
    d: FieldElement
    neighbours: NeighbourSet
    W: FieldElement
    entries: dict


def expand(ifs: IFS, nset: NeighbourSet, check_unique_child: bool = True) -> list[Child]:
    """Children of any net interval whose neighbour set is ``nset``."""
    F = ifs.field
    zero, one = F.zero, F.one
    rmax = max(abs(f.R) for f in nset)
    gens: list[tuple[int, int | None, Similarity]] = []
    for i, f in enumerate(nset):
        if abs(f.R) == rmax:
            for letter, s in enumerate(ifs.maps):
                gens.append((i, letter, Similarity(f.R * s.r, f.R * s.d + f.a)))
        else:
            gens.append((i, None, f.as_similarity()))

    pts = {zero, one}
    for _, _, g in gens:
        for e in (g(zero), g(one)):
            if zero < e < one:
                pts.add(e)
    hs = sorted(pts)

    out = []
    for u, v in zip(hs, hs[1:]):
        members = []
        for i, letter, g in gens:
            lo, hi = g.image()
            if hi <= u or lo >= v:
                continue
            # g(K) meets (u, v) iff K meets g^{-1}((u, v))
            ginv = g.inverse()
            a, b = ginv.image(u, v)
            if attractor_meets(ifs, a, b):
                members.append((i, letter, g))
        if not members:
            continue
        d = v - u
        dinv = d.inverse()
        normed = [
            (i, letter, Neighbour(g.r * dinv, (g.d - u) * dinv)) for i, letter, g in members
        ]
        child_set = canonical_order(n for _, _, n in normed)
        index = {n: j for j, n in enumerate(child_set)}
        entries: dict[tuple[int, int], int | None] = {}
        for i, letter, n in normed:
            key = (i, index[n])
            if key in entries:
                raise GraphError(f"neighbour {n} generated twice from row {i}")
            entries[key] = letter
        W = max(abs(g.r) for _, _, g in members) / rmax
        out.append(Child(u, d, child_set, W, entries))

    if check_unique_child and len(out) == 1 and out[0].neighbours == tuple(nset):
        raise GraphError("a net interval with a single child must change neighbour set")
    for c in out:
        cols = {j for _, j in c.entries}
        if cols != set(range(len(c.neighbours))):
            raise GraphError("transition matrix has an empty column")
        if not (zero < c.W < one):
            raise GraphError(f"edge weight {c.W} outside (0, 1)")
    return out


@dataclass(frozen=True)
class Edge:
    """Transition ``source -> target`` with position index ``q``."""

    id: int
    source: int
    target: int
    q: FieldElement
    d: FieldElement
    W: FieldElement
    entries: dict
    shape: tuple[int, int]

    @property
    def label(self) -> str:
        return f"e{self.id + 1}"

    def matrix_exact(self, probs: Sequence[Fraction]) -> list[list[Fraction]]:
        rows, cols = self.shape
        M = [[Fraction(0)] * cols for _ in range(rows)]
        for (i, j), letter in self.entries.items():
            M[i][j] = Fraction(1) if letter is None else Fraction(probs[letter])
        return M

    def matrix(self, probs: Sequence) -> np.ndarray:
        M = np.zeros(self.shape)
        for (i, j), letter in self.entries.items():
            M[i, j] = 1.0 if letter is None else float(probs[letter])
        return M

    def matrix_text(self) -> list[list[str]]:
        rows, cols = self.shape
        M = [["0"] * cols for _ in range(rows)]
        for (i, j), letter in self.entries.items():
            M[i][j] = "1" if letter is None else f"p{letter + 1}"
        return M


@dataclass
class TransitionGraph:
    """Finite transition graph; vertex 0 is the root neighbour set ``{x}``."""

    ifs: IFS
    vertices: list
    edges: list
    root: int = 0
    _out: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._out = {v: [] for v in range(len(self.vertices))}
        for e in self.edges:
            self._out[e.source].append(e)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def out_edges(self, v: int) -> list[Edge]:
        return self._out[v]

    def dim(self, v: int) -> int:
        return len(self.vertices[v])

    def vertex_label(self, v: int) -> str:
        return f"v{v + 1}"

    def vertex_text(self, v: int) -> str:
        return "{" + ", ".join(str(n) for n in self.vertices[v]) + "}"

    def find_vertex(self, neighbours) -> int | None:
        key = canonical_order(neighbours)
        for v, ns in enumerate(self.vertices):
            if ns == key:
                return v
        return None

    def to_networkx(self):
        import networkx as nx

        G = nx.MultiDiGraph()
        G.add_nodes_from(range(self.n_vertices))
        for e in self.edges:
            G.add_edge(e.source, e.target, key=e.id)
        return G

    def summary(self) -> str:
        return f"{self.n_vertices} vertices, {self.n_edges} edges"


def build_transition_graph(ifs: IFS, max_vertices: int = 20_000) -> TransitionGraph:
    """Breadth-first closure of the neighbour sets reachable from ``[0, 1]``."""
    if max_vertices < 1:
        raise ValueError("max_vertices must be >= 1")
    F = ifs.field
    root = (Neighbour(F.one, F.zero),)
    vertices = [root]
    index = {root: 0}
    edges: list[Edge] = []
    seen_edges = set()
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for c in expand(ifs, vertices[v]):
            w = index.get(c.neighbours)
            if w is None:
                if len(vertices) >= max_vertices:
                    raise FNCUndetected(
                        f"more than {max_vertices} neighbour sets; the finite neighbour "
                        "condition may fail or the bound is too small",
                        frontier=[vertices[u] for u in queue][:20],
                    )
                w = len(vertices)
                vertices.append(c.neighbours)
                index[c.neighbours] = w
                queue.append(w)
            key = (v, w, c.q)
            if key in seen_edges:
                continue
            seen_edges.add(key)
            edges.append(
                Edge(len(edges), v, w, c.q, c.d, c.W, c.entries,
                     (len(vertices[v]), len(c.neighbours)))
            )
    return TransitionGraph(ifs, vertices, edges)


# --- direct construction in absolute coordinates -------------------------------


@dataclass(frozen=True)
class NetInterval:
    """``[lo, hi]`` as a net interval of generation ``t``."""

    lo: FieldElement
    hi: FieldElement
    t: FieldElement

    @property
    def diam(self) -> FieldElement:
        return self.hi - self.lo

    def normalize(self, s: Similarity) -> Neighbour:
        inv = self.diam.inverse()
        return Neighbour(s.r * inv, (s.d - self.lo) * inv)


def _meets(ifs: IFS, s: Similarity, lo, hi) -> bool:
    a, b = s.image()
    if b <= lo or a >= hi:
        return False
    u, v = s.inverse().image(lo, hi)
    return attractor_meets(ifs, u, v)


def net_intervals(ifs: IFS, t) -> list[NetInterval]:
    """Net intervals of generation ``t``, left to right."""
    F = ifs.field
    t = F(t) if not isinstance(t, FieldElement) else t
    if t > 1:
        return [NetInterval(F.zero, F.one, t)]
    words = words_of_generation(ifs, t)
    pts = sorted({e for s in words.values() for e in (s(0), s(1))})
    out = []
    for u, v in zip(pts, pts[1:]):
        if any(_meets(ifs, s, u, v) for s in words.values()):
            out.append(NetInterval(u, v, t))
    return out


def neighbour_set(ifs: IFS, delta: NetInterval) -> tuple[NeighbourSet, dict]:
    """Neighbour set of ``delta`` and the least generating word of each neighbour."""
    F = ifs.field
    if delta.t > 1:
        words = {(): compose(ifs, ())}
    else:
        words = words_of_generation(ifs, delta.t)
    found: dict[Neighbour, tuple] = {}
    for w in sorted(words):
        s = words[w]
        if _meets(ifs, s, delta.lo, delta.hi):
            found.setdefault(delta.normalize(s), w)
    nset = canonical_order(found)
    if not nset:
        raise GraphError("empty neighbour set")
    return nset, {n: found[n] for n in nset}


def _all_words(ifs: IFS, delta: NetInterval) -> dict[Neighbour, list]:
    words = {(): compose(ifs, ())} if delta.t > 1 else words_of_generation(ifs, delta.t)
    out: dict[Neighbour, list] = {}
    for w, s in words.items():
        if _meets(ifs, s, delta.lo, delta.hi):
            out.setdefault(delta.normalize(s), []).append(w)
    return out


def transition_generation(ifs: IFS, delta: NetInterval) -> FieldElement:
    nset, _ = neighbour_set(ifs, delta)
    return max(abs(n.R) for n in nset) * delta.diam


def children(ifs: IFS, delta: NetInterval) -> list[tuple[NetInterval, FieldElement]]:
    """Net intervals of generation ``tg(delta)`` inside ``delta`` with position indices."""
    tg = transition_generation(ifs, delta)
    out = []
    for c in net_intervals(ifs, tg):
        if delta.lo <= c.lo and c.hi <= delta.hi:
            out.append((c, (c.lo - delta.lo) / delta.diam))
    if len(out) == 1 and neighbour_set(ifs, out[0][0])[0] == neighbour_set(ifs, delta)[0]:
        raise GraphError("single child with unchanged neighbour set")
    return out


def transition_matrix(ifs: IFS, parent: NetInterval, child: NetInterval) -> dict:
    """Entries ``(i, j) -> letter or None`` read off generating words."""
    pset, _ = neighbour_set(ifs, parent)
    cset, _ = neighbour_set(ifs, child)
    pw = _all_words(ifs, parent)
    cw = _all_words(ifs, child)
    row_of = {w: pset.index(n) for n, ws in pw.items() for w in ws}
    entries = {}
    for j, g in enumerate(cset):
        for w in cw[g]:
            if w in row_of:
                entries[(row_of[w], j)] = None
            elif w[:-1] in row_of:
                entries[(row_of[w[:-1]], j)] = w[-1]
    cols = {j for _, j in entries}
    if cols != set(range(len(cset))):
        raise GraphError("transition matrix has an empty column")
    return entries


# --- exports -------------------------------------------------------------------

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]


def to_dot(G: TransitionGraph, classes=None) -> str:
    """Graphviz source; ``classes`` is an optional list of loop classes for colouring."""
    colour = {}
    for k, cls in enumerate(classes or []):
        for v in cls.vertices:
            colour[v] = _PALETTE[k % len(_PALETTE)]
    lines = ["digraph transition_graph {", "  rankdir=LR;"]
    for v in range(G.n_vertices):
        attrs = [f'label="{G.vertex_label(v)}"', f'tooltip="{G.vertex_text(v)}"']
        if v in colour:
            attrs.append(f'color="{colour[v]}"')
        lines.append(f"  {G.vertex_label(v)} [{', '.join(attrs)}];")
    for e in G.edges:
        label = f"{e.label}: W={e.W}, q={e.q}"
        attrs = [f'label="{label}"']
        if colour.get(e.source) and colour.get(e.source) == colour.get(e.target):
            attrs.append(f'color="{colour[e.source]}"')
        lines.append(
            f"  {G.vertex_label(e.source)} -> {G.vertex_label(e.target)} [{', '.join(attrs)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def _num(x: FieldElement) -> dict:
    return {"exact": str(x), "float": float(x)}


def graph_dict(G: TransitionGraph) -> dict:
    return {
        "n_vertices": G.n_vertices,
        "n_edges": G.n_edges,
        "root": G.vertex_label(G.root),
        "vertices": [
            {
                "id": G.vertex_label(v),
                "neighbours": [{"R": _num(n.R), "a": _num(n.a)} for n in ns],
                "text": G.vertex_text(v),
            }
            for v, ns in enumerate(G.vertices)
        ],
        "edges": [
            {
                "id": e.label,
                "source": G.vertex_label(e.source),
                "target": G.vertex_label(e.target),
                "q": _num(e.q),
                "length": _num(e.d),
                "W": _num(e.W),
                "T": e.matrix_text(),
            }
            for e in G.edges
        ],
    }


def to_json(G: TransitionGraph) -> str:
    return json.dumps(graph_dict(G), indent=2, sort_keys=True)
