"""Graph-directed matrix product systems.

A system is a finite directed multigraph whose edges carry a weight in
``(0, 1)`` and a nonnegative matrix.  Path matrices are products along the
path; the norm of a matrix is the sum of its entries.  All exponent work is
done on logarithms with per-path rescaling so long products never underflow.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "MPSEdge",
    "MatrixProductSystem",
    "SigmaT",
    "LyapunovEstimate",
    "IrreducibilityCertificate",
    "spectral_radius",
    "iter_sigma_t",
    "sigma_t",
    "lyapunov_of_cycle",
    "path_exponent",
    "closed_walks",
    "sweep",
    "alpha_bounds",
    "is_irreducible",
    "complete_to_cycle",
    "synthesize_path",
]

Path = tuple  # tuple of edge ids


@dataclass(frozen=True)
class MPSEdge:
    id: int
    source: int
    target: int
    logW: float
    T: np.ndarray
    W: object = None  # exact weight when known
    label: str = ""


class MatrixProductSystem:
    """Weighted multigraph with matrix-valued edges.

    Parameters
    ----------
    dims : mapping vertex -> int
        Matrix dimension at each vertex.
    edges : sequence of MPSEdge
        ``T`` of an edge ``v -> w`` has shape ``(dims[v], dims[w])``.
    """

    def __init__(self, dims: dict, edges: Sequence[MPSEdge]):
        self.dims = dict(dims)
        self.edges = {e.id: e for e in edges}
        self._out: dict[int, list[MPSEdge]] = {v: [] for v in self.dims}
        for e in edges:
            if e.source not in self.dims or e.target not in self.dims:
                raise ValueError(f"edge {e.id} leaves the vertex set")
            if e.T.shape != (self.dims[e.source], self.dims[e.target]):
                raise ValueError(f"edge {e.id} has matrix shape {e.T.shape}")
            if not e.logW < 0:
                raise ValueError(f"edge {e.id} weight is not in (0, 1)")
            if np.any(e.T < 0):
                raise ValueError(f"edge {e.id} has a negative entry")
            self._out[e.source].append(e)

    @classmethod
    def from_graph(cls, G, probs, vertices: Iterable[int] | None = None):
        """Restrict a transition graph to ``vertices`` (default: all)."""
        vs = set(range(G.n_vertices)) if vertices is None else set(vertices)
        edges = [
            MPSEdge(e.id, e.source, e.target, math.log(float(e.W)), e.matrix(probs), e.W, e.label)
            for e in G.edges
            if e.source in vs and e.target in vs
        ]
        return cls({v: G.dim(v) for v in sorted(vs)}, edges)

    @property
    def vertices(self) -> list[int]:
        return sorted(self.dims)

    def out_edges(self, v: int) -> list[MPSEdge]:
        return self._out[v]

    @property
    def W_min(self) -> float:
        return math.exp(min(e.logW for e in self.edges.values()))

    @property
    def W_max(self) -> float:
        return math.exp(max(e.logW for e in self.edges.values()))

    @property
    def d_max(self) -> int:
        return max(self.dims.values())

    def check_path(self, path: Sequence[int]) -> None:
        for a, b in zip(path, path[1:]):
            if self.edges[a].target != self.edges[b].source:
                raise ValueError(f"edges {a} and {b} do not compose")

    def path_logW(self, path: Sequence[int]) -> float:
        return sum(self.edges[e].logW for e in path)

    def path_matrix(self, path: Sequence[int]) -> tuple[np.ndarray, float]:
        """``(M, s)`` with ``T(path) = exp(s) * M`` and ``M`` summing to 1."""
        if not path:
            raise ValueError("empty path")
        self.check_path(path)
        M = self.edges[path[0]].T.copy()
        s = 0.0
        for e in path[1:]:
            M = M @ self.edges[e].T
            tot = M.sum()
            if tot <= 0:
                return M, -math.inf
            s += math.log(tot)
            M /= tot
        tot = M.sum()
        if tot <= 0:
            return M, -math.inf
        return M / tot, s + math.log(tot)

    def path_log_norm(self, path: Sequence[int]) -> float:
        return self.path_matrix(path)[1]

    def is_cycle(self, path: Sequence[int]) -> bool:
        return bool(path) and self.edges[path[-1]].target == self.edges[path[0]].source


def spectral_radius(M: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Spectral radius of a nonnegative square matrix.

    Dense eigenvalues are used up to size 64.  Larger matrices use power
    iteration on ``M + I``, which is primitive on each irreducible block so the
    iteration also converges for periodic matrices.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix must be square")
    if n <= 64:
        return float(np.max(np.abs(np.linalg.eigvals(M))))
    scale = M.sum(axis=1).max()
    if scale == 0:
        return 0.0
    A = M / scale + np.eye(n)
    x = np.ones(n) / n
    lam = 0.0
    for _ in range(max_iter):
        y = A @ x
        new = y.sum() / x.sum()
        x = y / y.sum()
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    return float((lam - 1.0) * scale)


def _log_spr(mps: MatrixProductSystem, cycle: Sequence[int]) -> float:
    M, s = mps.path_matrix(cycle)
    rho = spectral_radius(M)
    return -math.inf if rho <= 0 else s + math.log(rho)


def lyapunov_of_cycle(mps: MatrixProductSystem, cycle: Sequence[int]) -> float:
    """``log spr T(cycle) / log W(cycle)``; ``inf`` for a nilpotent cycle."""
    if not mps.is_cycle(cycle):
        raise ValueError("path is not a cycle")
    ls = _log_spr(mps, cycle)
    if ls == -math.inf:
        return math.inf
    return ls / mps.path_logW(cycle)


def path_exponent(mps: MatrixProductSystem, path: Sequence[int]) -> float:
    """``log ||T(path)|| / log W(path)``."""
    return mps.path_log_norm(path) / mps.path_logW(path)


# --- Sigma_t ------------------------------------------------------------------------


@dataclass
class SigmaT:
    paths: list
    partial: bool


def iter_sigma_t(mps: MatrixProductSystem, t: float, start_vertices=None) -> Iterator[Path]:
    """Paths ``p`` with ``W(p) < t <= W(p^-)`` and ``||T(p)|| > 0``, depth first."""
    if t >= 1:
        return
    if t <= 0:
        raise ValueError("t must be positive")
    lt = math.log(t)
    starts = mps.vertices if start_vertices is None else sorted(start_vertices)
    for v in starts:
        n = mps.dims[v]
        stack = [((), 0.0, np.eye(n), v)]
        while stack:
            path, lw, M, end = stack.pop()
            for e in reversed(mps.out_edges(end)):
                M2 = M @ e.T
                tot = M2.sum()
                if tot <= 0:
                    continue
                lw2 = lw + e.logW
                p2 = path + (e.id,)
                if lw2 < lt - 1e-12:
                    yield p2
                else:
                    stack.append((p2, lw2, M2 / tot, e.target))


def sigma_t(mps, t: float, start_vertices=None, cap: int = 1_000_000) -> SigmaT:
    out = []
    for p in iter_sigma_t(mps, t, start_vertices):
        if len(out) >= cap:
            return SigmaT(out, True)
        out.append(p)
    return SigmaT(out, False)


# --- cycles -------------------------------------------------------------------------


def closed_walks(mps: MatrixProductSystem, max_len: int, cap: int = 500_000):
    """Closed walks of length ``<= max_len`` that start at their least vertex.

    Every cycle and every concatenation of cycles through a shared vertex
    appears, up to rotation.  Returns ``(walks, truncated)``.
    """
    out = []
    for v in mps.vertices:
        stack = [((), v)]
        while stack:
            path, end = stack.pop()
            for e in mps.out_edges(end):
                if e.target < v:
                    continue
                p2 = path + (e.id,)
                if e.target == v:
                    out.append(p2)
                    if len(out) >= cap:
                        return out, True
                if len(p2) < max_len:
                    stack.append((p2, e.target))
    return out, False


def _simple_cycles(mps: MatrixProductSystem, cap: int = 20_000) -> list[Path]:
    """Edge-level simple cycles (one edge per step between distinct vertices)."""
    import networkx as nx
    from itertools import islice, product

    D = nx.DiGraph()
    D.add_nodes_from(mps.vertices)
    parallel: dict[tuple[int, int], list[int]] = {}
    for e in mps.edges.values():
        parallel.setdefault((e.source, e.target), []).append(e.id)
        D.add_edge(e.source, e.target)
    out = []
    for cyc in islice(nx.simple_cycles(D), cap):
        hops = [parallel[(a, b)] for a, b in zip(cyc, cyc[1:] + cyc[:1])]
        for choice in product(*hops):
            out.append(tuple(choice))
            if len(out) >= cap:
                return out
    return out


# --- outer bracket via a scale sweep -------------------------------------------------


@dataclass
class SweepLevel:
    t: float
    lo: float  # min log||T|| / log W over Sigma_t
    hi: float  # max log c(T) / log W, c = least column sum
    hi_norm: float  # max log||T|| / log W over Sigma_t
    n_paths: int
    outer_lo: float = -math.inf  # best lower bound over scales >= t
    outer_hi: float = math.inf  # best upper bound over scales >= t


def _snap(x: np.ndarray) -> np.ndarray:
    r = np.round(x)
    return np.where(np.abs(x - r) < 1e-9, r, x)


def sweep(
    mps: MatrixProductSystem,
    t_min: float,
    cap: int = 2_000_000,
    start_vertices=None,
) -> tuple[list[SweepLevel], bool]:
    """Scan ``Sigma_t`` for ``t_k = W_max^k`` down to ``t_min``.

    At every scale ``lo_k`` is a lower bound for every cycle exponent, by
    submultiplicativity of the norm.  The least column sum is
    supermultiplicative on nonnegative matrices and positive on path
    matrices, so ``hi_k`` is an upper bound for every cycle exponent.

    Each level also carries the intersection of the brackets of all coarser
    scales, which is again a valid enclosure and is what the estimate reports.

    Returns the completed levels and a flag that is true when the path cap
    stopped the sweep before ``t_min``.
    """
    Lmax = math.log(mps.W_max)
    K = max(1, math.ceil(math.log(t_min) / Lmax - 1e-9))
    lo = np.full(K + 1, np.inf)
    hi = np.full(K + 1, -np.inf)
    hi_norm = np.full(K + 1, -np.inf)
    counts = np.zeros(K + 1, dtype=np.int64)
    span = int(math.ceil(math.log(mps.W_min) / Lmax)) + 2
    starts = mps.vertices if start_vertices is None else sorted(start_vertices)
    done = K
    total = 0
    partial = False

    def record(k0, k1, r_lo, r_hi, r_hn):
        for j in range(span):
            k = k0 + j
            m = k < k1
            if not m.any():
                break
            kk = k[m]
            np.minimum.at(lo, kk, r_lo[m])
            np.maximum.at(hi, kk, r_hi[m])
            np.maximum.at(hi_norm, kk, r_hn[m])
            np.add.at(counts, kk, 1)

    for v in starts:
        # pool[end] = (M normalised to sum 1, log scale, log W)
        pool: dict[int, tuple] = {v: (np.eye(mps.dims[v])[None], np.zeros(1), np.zeros(1))}
        for k in range(1, K + 1):
            lt = k * Lmax
            while True:
                new: dict[int, list] = {}
                expanded = False
                for end, (M, s, lw) in list(pool.items()):
                    m = lw >= lt - 1e-9 * max(1.0, abs(lt))
                    if not m.any():
                        new.setdefault(end, []).append((M, s, lw))
                        continue
                    expanded = True
                    keep = ~m
                    if keep.any():
                        new.setdefault(end, []).append((M[keep], s[keep], lw[keep]))
                    Mx, sx, lwx = M[m], s[m], lw[m]
                    for e in mps.out_edges(end):
                        M2 = Mx @ e.T
                        tot = M2.sum(axis=(1, 2))
                        ok = tot > 0
                        if not ok.all():
                            M2, tot, s1, lw1, lwp = M2[ok], tot[ok], sx[ok], lwx[ok], lwx[ok]
                        else:
                            s1, lwp = sx, lwx
                        M2 = M2 / tot[:, None, None]
                        s2 = s1 + np.log(tot)
                        lw2 = lwp + e.logW
                        colmin = M2.sum(axis=1).min(axis=1)
                        a = _snap(lwp / Lmax)
                        b = _snap(lw2 / Lmax)
                        k0 = np.ceil(a).astype(np.int64)
                        k0 = np.maximum(k0, 1)
                        k1 = np.minimum(np.ceil(b).astype(np.int64), K + 1)
                        record(k0, k1, s2 / lw2, (s2 + np.log(colmin)) / lw2, s2 / lw2)
                        total += len(s2)
                        new.setdefault(e.target, []).append((M2, s2, lw2))
                if not expanded:
                    break
                pool = {
                    end: (
                        np.concatenate([x[0] for x in parts]),
                        np.concatenate([x[1] for x in parts]),
                        np.concatenate([x[2] for x in parts]),
                    )
                    for end, parts in new.items()
                }
                size = sum(len(x[1]) for x in pool.values())
                if total > cap or size > cap:
                    partial = True
                    break
            if partial:
                done = min(done, k - 1)
                break
        if partial:
            break
    levels = []
    best_lo, best_hi = -math.inf, math.inf
    for k in range(1, done + 1):
        best_lo = max(best_lo, float(lo[k]))
        best_hi = min(best_hi, float(hi[k]))
        levels.append(
            SweepLevel(math.exp(k * Lmax), float(lo[k]), float(hi[k]), float(hi_norm[k]),
                       int(counts[k]), best_lo, best_hi)
        )
    return levels, partial


# --- the bracket ---------------------------------------------------------------------


@dataclass
class LyapunovEstimate:
    """Bracket for the range of Lyapunov exponents of one class.

    ``inner`` values are exponents of actual cycles, hence attained.
    ``outer`` bounds every exponent and comes from the finest completed scale.
    """

    class_id: object
    outer_lo: float
    outer_hi: float
    inner_lo: float
    inner_hi: float
    t_achieved: float
    max_cycle_len: int
    converged: bool
    partial: bool = False
    argmin_cycle: Path = ()
    argmax_cycle: Path = ()
    levels: list = field(default_factory=list)
    n_cycles: int = 0

    @property
    def gap(self) -> float:
        return max(self.inner_lo - self.outer_lo, self.outer_hi - self.inner_hi)


def inner_bracket(mps: MatrixProductSystem, max_cycle_len: int, cap: int = 500_000):
    walks, _ = closed_walks(mps, max_cycle_len, cap)
    seen = set(walks)
    for c in _simple_cycles(mps):
        if c not in seen:
            walks.append(c)
    vals = [(lyapunov_of_cycle(mps, w), w) for w in walks]
    vals = [(lam, w) for lam, w in vals if math.isfinite(lam)]
    if not vals:
        return (math.inf, ()), (-math.inf, ()), len(walks)
    lo = min(lam for lam, _ in vals)
    hi = max(lam for lam, _ in vals)
    # among near-ties prefer the shortest cycle, so closed forms stay small
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    clo = min((w for lam, w in vals if lam <= lo + tol), key=lambda w: (len(w), w))
    chi = min((w for lam, w in vals if lam >= hi - tol), key=lambda w: (len(w), w))
    return (lo, clo), (hi, chi), len(walks)


def alpha_bounds(
    mps: MatrixProductSystem,
    t_min: float = 1e-4,
    max_cycle_len: int = 8,
    cap: int = 2_000_000,
    tolerance: float = 0.01,
    class_id=None,
) -> LyapunovEstimate:
    """Inner and outer brackets for ``[alpha_min, alpha_max]`` of a strongly connected system."""
    if not 0 < t_min < 1:
        raise ValueError("t_min must lie in (0, 1)")
    if max_cycle_len < 1:
        raise ValueError("max_cycle_len must be >= 1")
    (ilo, clo), (ihi, chi), ncyc = inner_bracket(mps, max_cycle_len)
    if not clo:
        raise ValueError("class has no cycle with a positive spectral radius")
    levels, partial = sweep(mps, t_min, cap)
    if levels:
        last = levels[-1]
        olo, ohi, t_done = last.outer_lo, last.outer_hi, last.t
    else:
        olo, ohi, t_done = -math.inf, math.inf, 1.0
    converged = max(ilo - olo, ohi - ihi) <= tolerance
    return LyapunovEstimate(
        class_id, olo, ohi, ilo, ihi, t_done, max_cycle_len, converged, partial,
        clo, chi, levels, ncyc,
    )


# --- irreducibility ------------------------------------------------------------------


@dataclass
class IrreducibilityCertificate:
    """Shortest positive paths between every pair of states ``(vertex, index)``.

    ``paths[(v, i, w, j)]`` is a nonempty path from ``v`` to ``w`` whose
    matrix has a positive ``(i, j)`` entry; present for every pair exactly
    when the system is irreducible.
    """

    irreducible: bool
    D: int
    parents: dict
    missing: tuple = ()

    def path(self, v, i, w, j) -> Path:
        return _witness(self, v, i, w, j)

    def family(self) -> dict:
        return {
            (v, i, w, j): self.path(v, i, w, j)
            for (v, i), par in self.parents.items()
            for (w, j) in par
        }


def is_irreducible(mps: MatrixProductSystem) -> IrreducibilityCertificate:
    """Decide irreducibility on the expanded state graph.

    The state graph has a node per ``(vertex, index)`` and an arc for every
    positive matrix entry.  The system is irreducible iff every state reaches
    every state by a nonempty path; breadth-first search gives witnesses of
    length at most the number of states.
    """
    states = [(v, i) for v in mps.vertices for i in range(mps.dims[v])]
    arcs: dict[tuple, list] = {s: [] for s in states}
    for e in mps.edges.values():
        rows, cols = np.nonzero(e.T > 0)
        for i, j in zip(rows, cols):
            arcs[(e.source, int(i))].append(((e.target, int(j)), e.id))
    parents = {}
    missing = []
    for s in states:
        par: dict = {}
        q = deque()
        for nxt, e in arcs[s]:
            if nxt not in par:
                par[nxt] = (s, e)
                q.append(nxt)
        while q:
            u = q.popleft()
            for nxt, e in arcs[u]:
                if nxt not in par:
                    par[nxt] = (u, e)
                    q.append(nxt)
        parents[s] = par
        for t in states:
            if t not in par:
                missing.append(s + t)
    return IrreducibilityCertificate(not missing, len(states), parents, tuple(missing[:10]))


def _witness(cert: IrreducibilityCertificate, v, i, w, j) -> Path:
    """Nonempty positive path from state (v, i) to (w, j) from BFS parents."""
    par = cert.parents[(v, i)]
    out = []
    state = (w, j)
    while True:
        prev, e = par[state]
        out.append(e)
        if prev == (v, i):
            return tuple(reversed(out))
        state = prev


def complete_to_cycle(mps: MatrixProductSystem, path: Sequence[int], cert=None) -> Path:
    """Extend ``path`` to a cycle whose matrix is positive on the diagonal.

    The positive diagonal entry sits at the row of the largest entry of
    ``T(path)``.  A path that already qualifies is returned unchanged.
    """
    path = tuple(path)
    M, s = mps.path_matrix(path)
    if s == -math.inf:
        raise ValueError("path matrix is zero")
    i, l = np.unravel_index(int(np.argmax(M)), M.shape)
    v = mps.edges[path[0]].source
    w = mps.edges[path[-1]].target
    if v == w and M[i, i] > 0:
        return path
    cert = cert or is_irreducible(mps)
    if not cert.irreducible:
        raise ValueError("system is not irreducible")
    return path + _witness(cert, w, int(l), v, int(i))


def _power_below(mps, cycle: Path, logW_target: float) -> Path:
    """Shortest power of ``cycle`` with log weight below ``logW_target``."""
    lw = mps.path_logW(cycle)
    k = max(1, math.ceil(logW_target / lw + 1e-12))
    return cycle * k


def synthesize_path(
    mps: MatrixProductSystem,
    alpha: float,
    estimate: LyapunovEstimate,
    xi: Sequence[int],
    n_blocks: int,
    cert: IrreducibilityCertificate | None = None,
) -> dict:
    """Interleave extremal cycle blocks so the running exponent tends to ``alpha``.

    Block ``n`` repeats ``phi_n`` (low exponent) ``[s*n]`` times and ``psi_n``
    (high exponent) ``[(1-s)*n]`` times, joined by witness connectors and a
    copy of ``xi``.  ``s`` solves the weighted mean condition for ``alpha``.
    Returns the path and the running estimates at block boundaries.
    """
    lo, hi = estimate.inner_lo, estimate.inner_hi
    if not lo - 1e-12 <= alpha <= hi + 1e-12:
        raise ValueError(f"alpha={alpha} outside the inner bracket [{lo}, {hi}]")
    cert = cert or is_irreducible(mps)
    if not cert.irreducible:
        raise ValueError("system is not irreducible")
    phi0, psi0 = estimate.argmin_cycle, estimate.argmax_cycle
    xi = tuple(xi)

    mats = {}

    def piece_matrix(piece: Path) -> tuple[np.ndarray, float]:
        if piece not in mats:
            mats[piece] = mps.path_matrix(piece)
        return mats[piece]

    path: list[int] = []
    R = None  # T(path) = exp(logR) * R with R summing to 1
    logR = 0.0
    logW = 0.0

    def append(piece: Path) -> None:
        nonlocal R, logR, logW
        M, s = piece_matrix(piece)
        R2 = M if R is None else R @ M
        tot = R2.sum()
        if tot <= 0:
            raise ValueError("synthesized path has zero matrix")
        R, logR = R2 / tot, logR + s + math.log(tot)
        logW += mps.path_logW(piece)
        path.extend(piece)

    def joins_directly(piece: Path) -> bool:
        # direct concatenation keeps the heaviest column through a positive diagonal entry
        if mps.edges[path[-1]].target != mps.edges[piece[0]].source:
            return False
        j = int(np.argmax(R.sum(axis=0)))
        return piece_matrix(piece)[0][j, j] > 0

    def connector(piece: Path) -> Path:
        w = mps.edges[path[-1]].target
        v = mps.edges[piece[0]].source
        j = int(np.argmax(R.sum(axis=0)))
        i = int(np.argmax(piece_matrix(piece)[0].sum(axis=1)))
        return _witness(cert, w, j, v, i)

    estimates = []
    for n in range(1, n_blocks + 1):
        phi = _power_below(mps, phi0, n * math.log(0.5))
        psi = _power_below(mps, psi0, n * math.log(0.5))
        if hi - lo < 1e-12:
            s = 1.0
        else:
            # A*|log W(phi)|*(alpha - lo) = B*|log W(psi)|*(hi - alpha)
            u = (alpha - lo) * abs(mps.path_logW(phi))
            v = (hi - alpha) * abs(mps.path_logW(psi))
            s = v / (u + v)
        A = int(math.floor(s * n + 0.5))
        B = int(math.floor((1 - s) * n + 0.5))
        for piece in [xi] + [phi] * A + [psi] * B:
            if not piece:
                continue
            if path and not joins_directly(piece):
                append(connector(piece))
            append(piece)
        estimates.append(logR / logW)
    path = tuple(path)
    return {"path": path, "estimates": estimates, "alpha": alpha}
