"""Independent reference data and brute-force oracles for the test suite.

The figure tables give each vertex as its list of normalized maps ``(R, a)``
in the printed order, and each edge as ``(source, target, weight, matrix)``
with symbolic probability entries.  Matrices index neighbours in the printed
order, so comparisons reorder the library's matrices accordingly.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

import sympy

from locdim.exactnum import parse_element
from locdim.netgraph import TransitionGraph

# --- figure transcriptions ----------------------------------------------------------

GOLDEN_FIGURE = {
    "vertices": {
        "v1": [("1", "0")],
        "v2": [("1+rho", "0")],
        "v3": [("1+rho", "-rho")],
        "v4": [("2+rho", "0"), ("2+rho", "-(1+rho)")],
        "v5": [("3+2*rho", "-(1+rho)")],
        "v6": [("1+rho", "0"), ("1+rho", "-rho")],
    },
    "edges": {
        "e1": ("v1", "v2", "rho", [["p"]]),
        "e2": ("v1", "v3", "rho", [["1-p"]]),
        "e3": ("v1", "v4", "rho", [["1-p", "p"]]),
        "e4": ("v2", "v2", "rho", [["p"]]),
        "e5": ("v2", "v4", "rho", [["1-p", "p"]]),
        "e6": ("v3", "v3", "rho", [["1-p"]]),
        "e7": ("v3", "v4", "rho", [["1-p", "p"]]),
        "e8": ("v5", "v4", "rho", [["1-p", "p"]]),
        "e9": ("v6", "v5", "rho", [["p"], ["1-p"]]),
        "e10": ("v6", "v4", "rho", [["p", "0"], ["1-p", "p"]]),
        "e11": ("v6", "v4", "rho", [["1-p", "p"], ["0", "1-p"]]),
        "e12": ("v4", "v6", "rho", [["p", "0"], ["0", "1-p"]]),
    },
}

TESTUD_FIGURE = {
    "vertices": {
        "v1": [("1", "0")],
        "v2": [("-1", "1"), ("1", "0")],
    },
    "edges": {
        "e1": ("v1", "v1", "1/4", [["p3"]]),
        "e2": ("v1", "v1", "1/4", [["p4"]]),
        "e3": ("v1", "v2", "1/4", [["p5", "p1"]]),
        "e4": ("v1", "v2", "1/4", [["p6", "p2"]]),
        "e5": ("v2", "v2", "1/4", [["p4", "0"], ["p5", "p1"]]),
        "e6": ("v2", "v2", "1/4", [["p3", "0"], ["p6", "p2"]]),
        "e7": ("v2", "v2", "1/4", [["p2", "p6"], ["0", "p3"]]),
        "e8": ("v2", "v2", "1/4", [["p1", "p5"], ["0", "p4"]]),
    },
}

LAU_WANG_FIGURE = {
    "vertices": {
        "v1": [("1", "0")],
        "v2": [("4/3", "0")],
        "v3": [("3/2", "-1/2")],
        "v4": [("3", "0"), ("4", "-3")],
        "v5": [("1", "0"), ("3", "0")],
    },
    "edges": {
        "e1": ("v1", "v1", "1/4", [["p3"]]),
        "e2": ("v1", "v2", "1/3", [["p1"]]),
        "e3": ("v1", "v3", "1/4", [["p2"]]),
        "e4": ("v1", "v4", "1/3", [["p2", "p1"]]),
        "e5": ("v2", "v2", "1/3", [["p1"]]),
        "e6": ("v2", "v3", "1/4", [["p2"]]),
        "e7": ("v2", "v4", "1/3", [["p2", "p1"]]),
        "e8": ("v3", "v1", "1/4", [["p3"]]),
        "e9": ("v3", "v3", "1/4", [["p2"]]),
        "e10": ("v5", "v2", "1/3", [["1"], ["p1"]]),
        "e11": ("v5", "v4", "1/3", [["0", "1"], ["p2", "p1"]]),
        "e12": ("v4", "v5", "3/4", [["0", "1"], ["p3", "0"]]),
    },
}

FINITE_TYPE_FIGURE = {
    "vertices": {
        "v1": [("1", "0")],
        "v2": [("2+rho", "0")],
        # printed as (1+rho)x-(1+rho), whose image [-(1+rho), 0] misses (0, 1);
        # the neighbour generated by rho*x on [rho^3, rho] is (1+rho)x-rho
        "v3": [("1", "0"), ("1+rho", "-rho")],
        "v4": [("2+rho", "0"), ("3+2*rho", "-(1+rho)")],
        "v5": [("1+rho", "-rho"), ("2+rho", "0"), ("2+rho", "-(1+rho)")],
        "v6": [("1+rho", "0"), ("2+rho", "0"), ("2+rho", "-1")],
        "v7": [("2+rho", "0"), ("2+rho", "-(1+rho)"), ("3+2*rho", "-2*(1+rho)"),
               ("3+2*rho", "-(1+rho)")],
    },
    "edges": {
        "e1": ("v1", "v1", "rho^2", [["p3"]]),
        "e2": ("v1", "v2", "rho", [["p1"]]),
        "e3": ("v1", "v3", "rho", [["p2", "p1"]]),
        "e4": ("v2", "v2", "rho", [["p1"]]),
        "e5": ("v2", "v4", "rho", [["p2", "p1"]]),
        "e6": ("v3", "v3", "rho", [["0", "1"], ["p3", "0"]]),
        "e7": ("v3", "v5", "rho", [["0", "1", "0"], ["p2", "0", "p1"]]),
        "e8": ("v4", "v5", "rho", [["0", "1", "0"], ["p2", "0", "p1"]]),
        "e9": ("v6", "v4", "rho", [["0", "1"], ["p2", "p1"], ["p3", "0"]]),
        "e10": ("v6", "v5", "rho", [["0", "1", "0"], ["0", "p1", "0"], ["p2", "0", "p1"]]),
        "e11": ("v5", "v6", "rho", [["0", "0", "1"], ["0", "p1", "0"], ["p3", "0", "0"]]),
        "e12": ("v5", "v7", "rho",
                [["0", "0", "1", "0"], ["p2", "0", "0", "p1"], ["0", "p3", "0", "0"]]),
        "e13": ("v7", "v5", "rho",
                [["0", "1", "0"], ["0", "0", "1"], ["p3", "0", "0"], ["p2", "0", "p1"]]),
    },
}


def prob_entry(text: str, probs) -> Fraction:
    """Evaluate a symbolic matrix entry such as ``p``, ``1-p``, ``p3`` or ``0``."""
    text = text.replace(" ", "")
    if text in ("0", "1"):
        return Fraction(int(text))
    if text == "p":
        return Fraction(probs[0])
    if text == "1-p":
        return 1 - Fraction(probs[0])
    if text.startswith("p"):
        return Fraction(probs[int(text[1:]) - 1])
    raise ValueError(text)


def vertex_matching(G: TransitionGraph, figure: dict) -> dict[str, int]:
    """Map figure vertex names to graph vertices by neighbour-set equality."""
    F = G.ifs.field
    out = {}
    for name, nbrs in figure["vertices"].items():
        target = {(parse_element(R, F), parse_element(a, F)) for R, a in nbrs}
        hits = [v for v in range(G.n_vertices)
                if {(n.R, n.a) for n in G.vertices[v]} == target]
        assert len(hits) == 1, f"{name}: {len(hits)} matching vertices"
        out[name] = hits[0]
    return out


def _figure_order(G: TransitionGraph, v: int, nbrs, F) -> list[int]:
    """Positions in the graph's neighbour list of the figure's printed order."""
    mine = [(n.R, n.a) for n in G.vertices[v]]
    return [mine.index((parse_element(R, F), parse_element(a, F))) for R, a in nbrs]


def figure_edges(G: TransitionGraph, figure: dict, probs) -> Counter:
    """Multiset of figure edges as ``(source, target, weight, matrix)`` keys."""
    F = G.ifs.field
    out = Counter()
    for src, tgt, w, rows in figure["edges"].values():
        M = tuple(tuple(prob_entry(x, probs) for x in row) for row in rows)
        out[(src, tgt, parse_element(w, F), M)] += 1
    return out


def graph_edges_in_figure_order(G: TransitionGraph, figure: dict, probs) -> Counter:
    """The graph's edges keyed like :func:`figure_edges`, matrices reordered."""
    F = G.ifs.field
    match = vertex_matching(G, figure)
    name = {v: k for k, v in match.items()}
    order = {v: _figure_order(G, v, figure["vertices"][name[v]], F) for v in name}
    out = Counter()
    for e in G.edges:
        T = e.matrix_exact(probs)
        rows, cols = order[e.source], order[e.target]
        M = tuple(tuple(T[i][j] for j in cols) for i in rows)
        out[(name[e.source], name[e.target], e.W, M)] += 1
    return out


def figure_edge_map(G: TransitionGraph, figure: dict, probs) -> dict[str, int]:
    """Figure edge label to graph edge id, where the match is unambiguous."""
    F = G.ifs.field
    match = vertex_matching(G, figure)
    name = {v: k for k, v in match.items()}
    order = {v: _figure_order(G, v, figure["vertices"][name[v]], F) for v in name}
    keyed: dict = {}
    for e in G.edges:
        T = e.matrix_exact(probs)
        M = tuple(tuple(T[i][j] for j in order[e.target]) for i in order[e.source])
        keyed.setdefault((name[e.source], name[e.target], e.W, M), []).append(e.id)
    out = {}
    for label, (src, tgt, w, rows) in figure["edges"].items():
        M = tuple(tuple(prob_entry(x, probs) for x in row) for row in rows)
        ids = keyed.get((src, tgt, parse_element(w, F), M), [])
        if len(ids) == 1:
            out[label] = ids[0]
    return out


# --- exact field oracle via sympy ---------------------------------------------------


class SympyField:
    """Reference arithmetic in Q[x]/(f) using sympy polynomial remainders."""

    def __init__(self, poly_low_to_high, root_interval):
        self.x = sympy.Symbol("x")
        self.f = sympy.Poly(list(reversed(poly_low_to_high)), self.x, domain="QQ")
        roots = [r for r in sympy.Poly(self.f, self.x).real_roots()
                 if root_interval[0] <= r <= root_interval[1]]
        assert len(roots) == 1
        self.root = roots[0]

    def poly(self, coeffs):
        return sympy.Poly(list(reversed([sympy.Rational(c.numerator, c.denominator)
                                         for c in coeffs])), self.x, domain="QQ")

    def coeffs(self, p):
        p = p.rem(self.f)
        c = [Fraction(int(v.p), int(v.q)) for v in reversed(p.all_coeffs())]
        c += [Fraction(0)] * (self.f.degree() - len(c))
        return tuple(c)

    def mul(self, a, b):
        return self.coeffs(self.poly(a) * self.poly(b))

    def inv(self, a):
        s, _, g = sympy.gcdex(self.poly(a).as_expr(), self.f.as_expr(), self.x)
        return self.coeffs(sympy.Poly(s / g, self.x, domain="QQ"))

    def value(self, a, digits=40):
        expr = sympy.Poly(self.poly(a), self.x).as_expr().subs(self.x, self.root)
        return sympy.N(expr, digits)


# --- brute-force words and paths ----------------------------------------------------


def brute_words(ratios_abs, t, max_len):
    """All words w with |r_w| < t <= |r_{w-}| by exhaustive enumeration.

    ``ratios_abs`` and ``t`` are exact values supporting ``*`` and ``<``.
    """
    m = len(ratios_abs)
    out = set()
    for n in range(1, max_len + 1):
        for w in itertools.product(range(m), repeat=n):
            r = 1
            for i in w:
                r = r * ratios_abs[i]
            rm = 1
            for i in w[:-1]:
                rm = rm * ratios_abs[i]
            if r < t <= rm:
                out.add(w)
    return out


def count_paths(G: TransitionGraph, start: int, length: int, vertices=None) -> int:
    """Number of edge paths of a given length from ``start`` by dynamic programming."""
    counts = {start: 1}
    for _ in range(length):
        nxt: dict[int, int] = {}
        for v, c in counts.items():
            for e in G.out_edges(v):
                if vertices is None or e.target in vertices:
                    nxt[e.target] = nxt.get(e.target, 0) + c
        counts = nxt
    return sum(counts.values())


def exact_product(G: TransitionGraph, path, probs):
    """Exact rational matrix product along a path."""
    T = None
    for eid in path:
        E = G.edges[eid].matrix_exact(probs)
        if T is None:
            T = [list(r) for r in E]
        else:
            T = [[sum(T[i][k] * E[k][j] for k in range(len(E))) for j in range(len(E[0]))]
                 for i in range(len(T))]
    return T


def log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def log_norm(T) -> float:
    return log_fraction(sum(sum(r) for r in T))


def exact_spr_float(T) -> float:
    """Spectral radius through sympy's exact characteristic polynomial roots."""
    M = sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in r] for r in T])
    x = sympy.Symbol("x")
    P = sympy.Poly(M.charpoly(x).as_expr(), x)
    best = 0.0
    # square-free factors keep the numerical root finder away from repeated roots
    for f, _ in sympy.factor_list(P)[1]:
        if f.degree() > 0:
            best = max(best, max(abs(complex(r)) for r in f.nroots(n=30, maxsteps=200)))
    return float(best)
