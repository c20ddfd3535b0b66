"""Sets of attainable local dimensions and numerical cross-checks.

The certified output only uses graph and cycle data.  The Monte Carlo
estimators below are a separate validation channel.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exactnum import FieldElement
from .ifs import IFS
from .loops import LoopClass, SymbolicRep, maximal_loop_classes
from .mps import LyapunovEstimate, MatrixProductSystem, alpha_bounds, lyapunov_of_cycle
from .netgraph import TransitionGraph

__all__ = [
    "Params",
    "ClassEntry",
    "DimensionReport",
    "cycle_expression",
    "cycle_expression_text",
    "local_dim_periodic",
    "dimension_set",
    "merge_intervals",
    "sample_points",
    "measure_oracle",
    "local_dim_slope",
]

DEFAULT_SEED = 0x5EED


@dataclass
class Params:
    max_vertices: int = 20_000
    t_min: float = 1e-4
    max_cycle_len: int = 8
    path_cap: int = 2_000_000
    mc_samples: int = 1_000_000
    mc_depth: int = 60
    seed: int = DEFAULT_SEED
    tolerance: float = 0.01
    merge_tol: float = 1e-9


# --- closed forms --------------------------------------------------------------------


def _sym_element(x: FieldElement, sym):
    import sympy

    if x.field.degree == 1:
        c = x.coeffs[0]
        return sympy.Rational(c.numerator, c.denominator)
    return sum(
        sympy.Rational(c.numerator, c.denominator) * sym**k for k, c in enumerate(x.coeffs) if c
    )


def _closed_form(G: TransitionGraph, probs, cycle: Sequence[int]):
    """``(sympy expression, display text)`` of a cycle value, or None.

    The spectral radius is recognised when the characteristic polynomial of
    the exact cycle matrix has a factor ``x^k - c`` whose positive real root
    is the spectral radius; the value is then ``log(c) / (k log W)``.
    """
    import sympy

    sym = sympy.Symbol(G.ifs.field.generator, positive=True)
    M = None
    for eid in cycle:
        E = sympy.Matrix(
            [[sympy.Rational(v.numerator, v.denominator) for v in row]
             for row in G.edges[eid].matrix_exact(probs)]
        )
        M = E if M is None else M * E
    weights = [G.edges[e].W for e in cycle]
    logW = sum(sympy.expand_log(sympy.log(_sym_element(w, sym)), force=True) for w in weights)
    verts = {G.edges[e].source for e in cycle}
    spr = math.exp(
        lyapunov_of_cycle(MatrixProductSystem.from_graph(G, probs, verts), cycle)
        * sum(math.log(float(w)) for w in weights)
    )
    x = sympy.Symbol("x")
    _, factors = sympy.factor_list(M.charpoly(x).as_expr(), x)
    for fac, _ in factors:
        P = sympy.Poly(fac, x)
        k = P.degree()
        coeffs = P.all_coeffs()
        if k < 1 or any(c != 0 for c in coeffs[1:-1]):
            continue
        c = -coeffs[-1] / coeffs[0]
        if c > 0 and abs(float(c) ** (1.0 / k) - spr) <= 1e-9 * max(spr, 1e-300):
            logc = f"log({c})"
            denom = f"log({_weight_text(weights)})"
            text = f"{logc}/{denom}" if k == 1 else f"{logc}/({k}*{denom})"
            return sympy.log(c) / (k * logW), text
    return None


def _weight_text(weights: Sequence[FieldElement]) -> str:
    counts: dict[str, int] = {}
    for w in weights:
        counts[str(w)] = counts.get(str(w), 0) + 1
    parts = []
    for s, n in counts.items():
        base = s if re.fullmatch(r"[A-Za-z_0-9/]+", s) and (n == 1 or "/" not in s) else f"({s})"
        parts.append(base if n == 1 else f"{base}^{n}")
    return "*".join(parts)


def cycle_expression(G: TransitionGraph, probs, cycle: Sequence[int]):
    """Closed form of a cycle value as a sympy expression, or None."""
    cf = _closed_form(G, probs, cycle)
    return None if cf is None else cf[0]


def cycle_expression_text(G: TransitionGraph, probs, cycle: Sequence[int]) -> str | None:
    """Closed form of a cycle value as ``log(c)/log(W)`` text, or None."""
    cf = _closed_form(G, probs, cycle)
    return None if cf is None else cf[1]


# --- periodic points -----------------------------------------------------------------


def local_dim_periodic(reps: Sequence[SymbolicRep], G: TransitionGraph, probs):
    """Local dimension at a point with one or two eventually periodic representations.

    Returns ``(value, expression, period)`` for the minimising representation.
    """
    if not reps or len(reps) > 2:
        raise ValueError("expected one or two representations")
    best = None
    for rep in reps:
        if not rep.periodic:
            raise ValueError("representation is not eventually periodic")
        verts = {G.edges[e].source for e in rep.period}
        lam = lyapunov_of_cycle(MatrixProductSystem.from_graph(G, probs, verts), rep.period)
        if best is None or lam < best[0]:
            best = (lam, rep.period)
    expr = cycle_expression(G, probs, best[1])
    return best[0], expr, best[1]


# --- the dimension set ---------------------------------------------------------------


@dataclass
class ClassEntry:
    class_id: int
    kind: str
    vertices: list
    simple: bool
    irreducible: bool
    essential: bool
    degenerate: bool | None
    lo: float
    hi: float
    lo_expr: str | None = None
    hi_expr: str | None = None
    certified: bool = True
    outer: tuple | None = None
    estimate: LyapunovEstimate | None = field(default=None, repr=False)
    cycle_lo: list = field(default_factory=list)
    cycle_hi: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "estimate"}
        if self.estimate is not None:
            d["estimate"] = {
                "inner": [self.estimate.inner_lo, self.estimate.inner_hi],
                "outer": [self.estimate.outer_lo, self.estimate.outer_hi],
                "t_achieved": self.estimate.t_achieved,
                "max_cycle_len": self.estimate.max_cycle_len,
                "converged": self.estimate.converged,
                "partial": self.estimate.partial,
                "cycles_examined": self.estimate.n_cycles,
            }
        return d


@dataclass
class DimensionReport:
    entries: list
    intervals: list  # merged: dicts with lo, hi, exprs, classes, certified
    isolated_points: list
    params: Params
    hypothesis_violated: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def nontrivial_intervals(self) -> list:
        return [iv for iv in self.intervals if iv["hi"] - iv["lo"] > self.params.merge_tol]

    def to_dict(self) -> dict:
        return {
            "classes": [e.to_dict() for e in self.entries],
            "dimension_set": {
                "intervals": [
                    {
                        "lo_float": iv["lo"],
                        "hi_float": iv["hi"],
                        "lo_expr": iv["lo_expr"],
                        "hi_expr": iv["hi_expr"],
                        "class": iv["classes"],
                        "certified": iv["certified"],
                    }
                    for iv in self.intervals
                ],
                "isolated_points": self.isolated_points,
                "hypothesis_violated": self.hypothesis_violated,
            },
            "parameters": asdict(self.params),
            "diagnostics": self.diagnostics,
        }


def merge_intervals(items: list[dict], tol: float = 1e-9) -> list[dict]:
    """Merge closed intervals that overlap or touch within ``tol``."""
    out: list[dict] = []
    for it in sorted(items, key=lambda d: (d["lo"], -d["hi"])):
        if out and it["lo"] <= out[-1]["hi"] + tol:
            cur = out[-1]
            cur["classes"] = sorted(set(cur["classes"]) | set(it["classes"]))
            cur["certified"] = cur["certified"] and it["certified"]
            if it["hi"] > cur["hi"] + tol:
                cur["hi"], cur["hi_expr"] = it["hi"], it["hi_expr"]
            elif abs(it["hi"] - cur["hi"]) <= tol and cur["hi_expr"] is None:
                cur["hi_expr"] = it["hi_expr"]
            if abs(it["lo"] - cur["lo"]) <= tol and cur["lo_expr"] is None:
                cur["lo_expr"] = it["lo_expr"]
        else:
            out.append(dict(it))
    return out


def dimension_set(G: TransitionGraph, probs=None, params: Params | None = None,
                  classes: list[LoopClass] | None = None) -> DimensionReport:
    """Union of attainable local dimensions over the non-degenerate loop classes."""
    params = params or Params()
    probs = tuple(Fraction(p) for p in (probs if probs is not None else G.ifs.probs))
    classes = classes if classes is not None else maximal_loop_classes(G, probs)
    entries = []
    violated = False
    for cls in classes:
        common = dict(
            class_id=cls.id, kind=cls.kind, vertices=[G.vertex_label(v) for v in cls.vertices],
            simple=cls.simple, irreducible=cls.irreducible, essential=cls.essential,
            degenerate=cls.degenerate,
        )
        if cls.simple:
            expr = cycle_expression_text(G, probs, cls.cycle)
            labels = [G.edges[e].label for e in cls.cycle]
            entries.append(ClassEntry(lo=cls.lam, hi=cls.lam, lo_expr=expr, hi_expr=expr,
                                      cycle_lo=labels, cycle_hi=labels, **common))
            continue
        if not cls.irreducible:
            violated = True
            entries.append(ClassEntry(lo=math.nan, hi=math.nan, certified=False, **common))
            continue
        mps = MatrixProductSystem.from_graph(G, probs, cls.vertices)
        est = alpha_bounds(mps, params.t_min, params.max_cycle_len, params.path_cap,
                           params.tolerance, class_id=cls.id)
        entries.append(ClassEntry(
            lo=est.inner_lo, hi=est.inner_hi,
            lo_expr=cycle_expression_text(G, probs, est.argmin_cycle),
            hi_expr=cycle_expression_text(G, probs, est.argmax_cycle),
            certified=est.converged, outer=(est.outer_lo, est.outer_hi), estimate=est,
            cycle_lo=[G.edges[e].label for e in est.argmin_cycle],
            cycle_hi=[G.edges[e].label for e in est.argmax_cycle],
            **common,
        ))
    items = [
        {"lo": e.lo, "hi": e.hi, "lo_expr": e.lo_expr, "hi_expr": e.hi_expr,
         "classes": [e.class_id], "certified": e.certified}
        for e in entries
        if not e.degenerate and not math.isnan(e.lo)
    ]
    merged = merge_intervals(items, params.merge_tol)
    isolated = [
        {"value": iv["lo"], "expr": iv["lo_expr"], "classes": iv["classes"]}
        for iv in merged
        if iv["hi"] - iv["lo"] <= params.merge_tol
    ]
    diagnostics = {"graph": G.summary()}
    return DimensionReport(entries, merged, isolated, params, violated, diagnostics)


# --- Monte Carlo measure -------------------------------------------------------------


def sample_points(ifs: IFS, probs=None, n_samples: int = 1_000_000, depth: int = 60,
                  seed: int = DEFAULT_SEED, block_size: int = 100_000) -> np.ndarray:
    """Sorted i.i.d. samples of the self-similar measure.

    Each block of ``block_size`` samples draws from its own child of
    ``SeedSequence(seed)``, so the output depends only on
    ``(seed, n_samples, block_size)``.
    """
    p = np.array([float(x) for x in (probs if probs is not None else ifs.probs)])
    p = p / p.sum()
    r = np.array([float(s.r) for s in ifs.maps])
    d = np.array([float(s.d) for s in ifs.maps])
    n_blocks = -(-n_samples // block_size)
    seqs = np.random.SeedSequence(seed).spawn(n_blocks)
    out = []
    for b, ss in enumerate(seqs):
        n = min(block_size, n_samples - b * block_size)
        rng = np.random.default_rng(ss)
        x = rng.random(n)
        for _ in range(depth):
            k = rng.choice(len(p), size=n, p=p)
            x = r[k] * x + d[k]
        out.append(x)
    return np.sort(np.concatenate(out))


def _mass(samples: np.ndarray, lo: float, hi: float) -> float:
    i = np.searchsorted(samples, lo, side="left")
    j = np.searchsorted(samples, hi, side="right")
    return (j - i) / len(samples)


def _unfold(ifs: IFS, probs, lo: float, hi: float, scale: float):
    """Words of generation ``scale`` whose image meets ``(lo, hi)``.

    Returns pairs ``(p_w, S_w^{-1}[lo, hi])`` in floats; by self-similarity
    the measure of ``[lo, hi]`` is the weighted sum of the measures of the
    pulled-back intervals, each of length at least ``(hi - lo) / scale``.
    """
    p = [float(x) for x in probs]
    maps = [(float(s.r), float(s.d)) for s in ifs.maps]
    out = []
    stack = [(1.0, 1.0, 0.0)]  # weight, r, d
    while stack:
        w, r, d = stack.pop()
        for (ri, di), pi in zip(maps, p):
            r2, d2 = r * ri, r * di + d
            a, b = sorted((d2, r2 + d2))
            if b <= lo or a >= hi:
                continue
            if abs(r2) < scale:
                u, v = sorted(((lo - d2) / r2, (hi - d2) / r2))
                out.append((w * pi, u, v))
            else:
                stack.append((w * pi, r2, d2))
    return out


def measure_oracle(ifs: IFS, probs, lo, hi, n_samples: int = 1_000_000, depth: int = 60,
                   seed: int = DEFAULT_SEED, samples: np.ndarray | None = None,
                   method: str = "unfolded"):
    """Monte Carlo estimate of ``mu([lo, hi])`` with a standard error.

    ``method="plain"`` counts samples in the interval.  ``method="unfolded"``
    first applies the self-similarity identity down to the scale of the
    interval and counts samples in the pulled-back intervals, which keeps
    the relative error independent of the size of the interval.
    """
    lo, hi = float(lo), float(hi)
    if samples is None:
        samples = sample_points(ifs, probs, n_samples, depth, seed)
    N = len(samples)
    if lo <= 0.0 and hi >= 1.0:
        return 1.0, 0.0
    if method == "plain":
        m = _mass(samples, lo, hi)
        return m, math.sqrt(m * (1 - m) / N)
    if method != "unfolded":
        raise ValueError(f"unknown method {method!r}")
    probs = probs if probs is not None else ifs.probs
    total, err = 0.0, 0.0
    for w, u, v in _unfold(ifs, probs, lo, hi, hi - lo):
        m = _mass(samples, u, v)
        total += w * m
        err += w * math.sqrt(m * (1 - m) / N)
    return total, err


def local_dim_slope(ifs: IFS, probs, x, scales: Sequence[float], n_samples: int = 1_000_000,
                    depth: int = 60, seed: int = DEFAULT_SEED, samples=None,
                    method: str = "unfolded") -> dict:
    """Least-squares slope of ``log mu(B(x, t))`` against ``log t``."""
    xf = float(x)
    if samples is None:
        samples = sample_points(ifs, probs, n_samples, depth, seed)
    ts, ms, rel = [], [], []
    for t in scales:
        m, se = measure_oracle(ifs, probs, xf - t, xf + t, samples=samples, method=method)
        if m <= 0:
            continue
        ts.append(math.log(t))
        ms.append(math.log(m))
        rel.append(se / m)
    if len(ts) < 2:
        return {"slope": math.nan, "high_variance": True, "points": len(ts)}
    slope = float(np.polyfit(ts, ms, 1)[0])
    return {"slope": slope, "high_variance": max(rel) > 0.1, "points": len(ts)}
