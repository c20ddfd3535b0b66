import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import classes, config, graph
from locdim.config import load_config
from locdim.mps import (
    MatrixProductSystem,
    MPSEdge,
    alpha_bounds,
    closed_walks,
    complete_to_cycle,
    is_irreducible,
    iter_sigma_t,
    lyapunov_of_cycle,
    path_exponent,
    sigma_t,
    spectral_radius,
    synthesize_path,
)
from locdim.netgraph import build_transition_graph
from oracles import (
    GOLDEN_FIGURE,
    LAU_WANG_FIGURE,
    TESTUD_FIGURE,
    count_paths,
    exact_product,
    exact_spr_float,
    figure_edge_map,
    log_norm,
)

RHO = (math.sqrt(5) - 1) / 2
TESTUD_P = [Fraction(1, 5), Fraction(3, 10), Fraction(1, 10), Fraction(3, 20),
            Fraction(1, 20), Fraction(1, 5)]


def class_mps(name, kind, probs=None):
    G = graph(name)
    probs = probs or G.ifs.probs
    cls = next(c for c in classes(name) if c.kind == kind)
    return G, cls, MatrixProductSystem.from_graph(G, probs, cls.vertices)


def labels(G, fig, probs):
    return figure_edge_map(G, fig, probs)


# --- spectral radius ------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 6), min_size=n, max_size=n),
                       min_size=n, max_size=n)))
def test_spectral_radius_matches_exact_roots(rows):
    T = [[Fraction(v, 7) for v in r] for r in rows]
    expected = exact_spr_float(T)
    got = spectral_radius(np.array(rows, dtype=float) / 7)
    assert abs(got - expected) <= 1e-9 * max(1.0, expected)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_spectral_radius_power_iteration_large(seed):
    rng = np.random.default_rng(seed)
    M = rng.random((90, 90)) * (rng.random((90, 90)) < 0.1)
    M += np.roll(np.eye(90), 1, axis=1)  # a Hamiltonian cycle keeps it irreducible
    expected = float(np.max(np.abs(np.linalg.eigvals(M))))
    assert abs(spectral_radius(M) - expected) <= 1e-8 * expected


def test_spectral_radius_periodic_large():
    P = np.roll(np.eye(80), 1, axis=1) * 0.5  # every eigenvalue has modulus 1/2
    assert abs(spectral_radius(P) - 0.5) < 1e-9


def test_spectral_radius_rejects_non_square():
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


# --- cycle exponents ------------------------------------------------------------------


def test_cycle_values_golden():
    probs = [Fraction(3, 10), Fraction(7, 10)]
    cfg = load_config("golden-bc").with_probs(probs)
    G = build_transition_graph(cfg.ifs)
    e = labels(G, GOLDEN_FIGURE, probs)
    mps = MatrixProductSystem.from_graph(G, probs)
    assert lyapunov_of_cycle(mps, (e["e4"],)) == pytest.approx(math.log(0.3) / math.log(RHO),
                                                               abs=1e-12)
    lam = lyapunov_of_cycle(mps, (e["e11"], e["e12"]))
    assert lam == pytest.approx(math.log(0.7) / math.log(RHO), abs=1e-12)
    M, s = mps.path_matrix((e["e11"], e["e12"]))
    assert math.exp(s) * spectral_radius(M) == pytest.approx(0.49, abs=1e-12)


def test_cycle_value_testud_loop():
    G = graph("testud")
    e = labels(G, TESTUD_FIGURE, TESTUD_P)
    mps = MatrixProductSystem.from_graph(G, TESTUD_P)
    assert lyapunov_of_cycle(mps, (e["e1"],)) == pytest.approx(math.log(0.1) / math.log(0.25),
                                                               abs=1e-12)


def test_nilpotent_cycle_is_infinite():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    mps = MatrixProductSystem({0: 2}, [MPSEdge(0, 0, 0, math.log(0.5), N)])
    assert lyapunov_of_cycle(mps, (0,)) == math.inf
    with pytest.raises(ValueError):
        lyapunov_of_cycle(MatrixProductSystem.from_graph(graph("golden-bc"), [0.5, 0.5]), (0,))


def test_system_validation():
    with pytest.raises(ValueError):
        MatrixProductSystem({0: 1}, [MPSEdge(0, 0, 0, 0.0, np.ones((1, 1)))])
    with pytest.raises(ValueError):
        MatrixProductSystem({0: 1}, [MPSEdge(0, 0, 0, -1.0, np.ones((2, 1)))])
    with pytest.raises(ValueError):
        MatrixProductSystem({0: 1}, [MPSEdge(0, 0, 0, -1.0, -np.ones((1, 1)))])


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["golden-bc", "lau-wang", "finite-type", "di12"]),
       st.integers(0, 2**32), st.integers(1, 40))
def test_log_norm_matches_exact_products(name, seed, n):
    G = graph(name)
    rng = random.Random(seed)
    v, path = G.root, []
    for _ in range(n):
        e = rng.choice(G.out_edges(v))
        path.append(e.id)
        v = e.target
    mps = MatrixProductSystem.from_graph(G, G.ifs.probs)
    expected = log_norm(exact_product(G, path, G.ifs.probs))
    assert mps.path_log_norm(path) == pytest.approx(expected, rel=1e-12, abs=1e-12)


# --- Sigma_t ------------------------------------------------------------------------


def test_sigma_t_golden_uniform_weights():
    G = graph("golden-bc")
    mps = MatrixProductSystem.from_graph(G, G.ifs.probs)
    # all weights are rho: t just below rho^2 needs three edges, just above needs two
    below = sigma_t(mps, 0.99 * RHO**2, [G.root])
    above = sigma_t(mps, 1.01 * RHO**2, [G.root])
    assert {len(p) for p in below.paths} == {3}
    assert len(below.paths) == count_paths(G, G.root, 3)
    assert {len(p) for p in above.paths} == {2}
    assert len(above.paths) == count_paths(G, G.root, 2)
    assert not below.partial


def test_sigma_t_above_one_is_empty():
    mps = MatrixProductSystem.from_graph(graph("golden-bc"), [0.5, 0.5])
    assert list(iter_sigma_t(mps, 1.0)) == []
    assert list(iter_sigma_t(mps, 3.0)) == []
    with pytest.raises(ValueError):
        list(iter_sigma_t(mps, 0.0))


def _brute_sigma(G, vertices, probs, t: Fraction, max_len):
    out = set()
    frontier = [((), Fraction(1), v) for v in vertices]
    for _ in range(max_len):
        nxt = []
        for path, w, v in frontier:
            for e in G.out_edges(v):
                if e.target not in vertices:
                    continue
                w2 = w * e.W.as_rational()
                p2 = path + (e.id,)
                if w2 < t:
                    T = exact_product(G, p2, probs)
                    if sum(sum(r) for r in T) > 0:
                        out.add(p2)
                else:
                    nxt.append((p2, w2, e.target))
        frontier = nxt
    assert not frontier
    return out


@pytest.mark.parametrize("t", [Fraction(1, 4), Fraction(1, 20), Fraction(2, 77)])
def test_sigma_t_lau_wang_matches_brute_force(t):
    G, cls, mps = class_mps("lau-wang", "essential")
    got = set(sigma_t(mps, float(t)).paths)
    assert got == _brute_sigma(G, set(cls.vertices), G.ifs.probs, t, 12)
    w_min = min(e.W.as_rational() for e in G.edges)
    for p in got:
        W = [G.edges[e].W.as_rational() for e in p]
        full = math.prod(W)
        assert w_min * t <= full < t <= full / W[-1]


def test_sigma_t_cap_sets_partial():
    G, _, mps = class_mps("testud", "essential", TESTUD_P)
    res = sigma_t(mps, 1e-3, cap=10)
    assert res.partial and len(res.paths) == 10


# --- cycles and brackets --------------------------------------------------------------


def _closed_walk_counts(mps, max_len):
    """Sum over v of closed walks at v inside the vertices >= v, by DP."""
    counts = [0] * (max_len + 1)
    for v in mps.vertices:
        cur = {v: 1}
        for n in range(1, max_len + 1):
            nxt: dict = {}
            for u, c in cur.items():
                for e in mps.out_edges(u):
                    if e.target >= v:
                        nxt[e.target] = nxt.get(e.target, 0) + c
            counts[n] += nxt.get(v, 0)
            cur = nxt
    return counts


@pytest.mark.parametrize("name", ["golden-bc", "lau-wang", "finite-type", "di12"])
def test_closed_walks_match_transfer_counts(name):
    G = graph(name)
    mps = MatrixProductSystem.from_graph(G, G.ifs.probs)
    walks, truncated = closed_walks(mps, 6)
    assert not truncated
    by_len = [0] * 7
    for w in walks:
        assert mps.is_cycle(w)
        by_len[len(w)] += 1
    assert by_len == _closed_walk_counts(mps, 6)


def test_testud_loop_class_brackets_are_exact():
    G, cls, mps = class_mps("testud", "irreducible", TESTUD_P)
    est = alpha_bounds(mps, t_min=1e-3, max_cycle_len=1)
    lo = math.log(max(TESTUD_P[2], TESTUD_P[3])) / -math.log(4)
    hi = math.log(min(TESTUD_P[2], TESTUD_P[3])) / -math.log(4)
    assert est.inner_lo == pytest.approx(lo, abs=1e-9)
    assert est.inner_hi == pytest.approx(hi, abs=1e-9)
    assert est.outer_lo == pytest.approx(lo, abs=1e-9)
    assert est.outer_hi == pytest.approx(hi, abs=1e-9)
    assert est.converged and est.gap <= 1e-9


def test_testud_essential_inner_bracket():
    G, cls, mps = class_mps("testud", "essential", TESTUD_P)
    est = alpha_bounds(mps, t_min=1e-3, max_cycle_len=4)
    p1, p2 = TESTUD_P[0], TESTUD_P[1]
    assert est.inner_lo == pytest.approx(math.log(max(p1, p2)) / -math.log(4), abs=1e-9)
    assert est.inner_hi == pytest.approx(math.log(min(p1, p2)) / -math.log(4), abs=1e-9)
    assert est.outer_lo <= est.inner_lo + 1e-9 and est.inner_hi <= est.outer_hi + 1e-9


def test_simple_class_bracket_is_a_point():
    G, cls, mps = class_mps("golden-bc", "simple")
    est = alpha_bounds(mps, t_min=1e-3)
    lam = lyapunov_of_cycle(mps, cls.cycle)
    assert est.inner_lo == pytest.approx(lam, abs=1e-12)
    assert est.inner_hi == pytest.approx(lam, abs=1e-12)
    assert est.outer_lo == pytest.approx(est.inner_lo) and est.converged


def test_alpha_bounds_validation():
    _, _, mps = class_mps("golden-bc", "essential")
    with pytest.raises(ValueError):
        alpha_bounds(mps, t_min=1.5)
    with pytest.raises(ValueError):
        alpha_bounds(mps, max_cycle_len=0)


@pytest.mark.parametrize("name", ["golden-bc", "testud", "lau-wang", "finite-type"])
def test_inner_within_outer_at_every_scale(name):
    G = graph(name)
    for cls in classes(name):
        if cls.simple or not cls.irreducible:
            continue
        mps = MatrixProductSystem.from_graph(G, G.ifs.probs, cls.vertices)
        est = alpha_bounds(mps, t_min=1e-3, max_cycle_len=6)
        for lv in est.levels:
            assert lv.lo <= est.inner_lo + 1e-9 and est.inner_hi <= lv.hi + 1e-9
            assert lv.outer_lo <= est.inner_lo + 1e-9 and est.inner_hi <= lv.outer_hi + 1e-9


@pytest.mark.parametrize("name", ["golden-bc", "lau-wang", "finite-type"])
def test_running_exponents_stay_in_outer_bracket(name):
    G = graph(name)
    ess = next(c for c in classes(name) if c.essential)
    mps = MatrixProductSystem.from_graph(G, G.ifs.probs, ess.vertices)
    est = alpha_bounds(mps, t_min=1e-4, max_cycle_len=6)
    rng = random.Random(5)
    for _ in range(20):
        v = rng.choice(mps.vertices)
        path = []
        for _ in range(300):
            e = rng.choice(mps.out_edges(v))
            path.append(e.id)
            v = e.target
        x = path_exponent(mps, path)
        assert est.outer_lo - 0.1 <= x <= est.outer_hi + 0.1


# --- irreducibility, connectors, synthesis -------------------------------------------


@pytest.mark.parametrize("name", ["golden-bc", "testud", "lau-wang", "finite-type", "di12",
                                  "cantor-like"])
def test_essential_classes_irreducible_with_short_witnesses(name):
    G = graph(name)
    ess = next(c for c in classes(name) if c.essential)
    mps = MatrixProductSystem.from_graph(G, G.ifs.probs, ess.vertices)
    cert = is_irreducible(mps)
    assert cert.irreducible and not cert.missing
    assert cert.D == sum(G.dim(v) for v in ess.vertices)
    for (v, i, w, j), path in cert.family().items():
        assert 1 <= len(path) <= cert.D
        T = exact_product(G, path, G.ifs.probs)
        assert mps.edges[path[0]].source == v and mps.edges[path[-1]].target == w
        assert T[i][j] > 0


def test_di12_three_vertex_class_irreducible():
    G = graph("di12")
    (cls,) = [c for c in classes("di12") if len(c.vertices) == 3]
    assert is_irreducible(MatrixProductSystem.from_graph(G, G.ifs.probs, cls.vertices)).irreducible


def test_reducible_system_detected():
    G = graph("testud")
    cert = is_irreducible(MatrixProductSystem.from_graph(G, TESTUD_P))
    assert not cert.irreducible and cert.missing
    U = np.array([[1.0, 1.0], [0.0, 1.0]]) / 2
    mps = MatrixProductSystem({0: 2}, [MPSEdge(0, 0, 0, math.log(0.5), U)])
    assert not is_irreducible(mps).irreducible


def test_complete_to_cycle_examples():
    G = graph("golden-bc")
    probs = G.ifs.probs
    e = labels(G, GOLDEN_FIGURE, [Fraction(3, 10), Fraction(7, 10)])
    _, _, mps = class_mps("golden-bc", "essential")
    assert complete_to_cycle(mps, (e["e10"],)) == (e["e10"], e["e12"])
    G = graph("lau-wang")
    e = labels(G, LAU_WANG_FIGURE, [Fraction(2, 5), Fraction(1, 4), Fraction(7, 20)])
    _, _, mps = class_mps("lau-wang", "essential")
    assert complete_to_cycle(mps, (e["e11"],)) == (e["e11"], e["e12"])
    del probs


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["golden-bc", "lau-wang", "finite-type", "di12"]),
       st.integers(0, 2**32), st.integers(1, 8))
def test_complete_to_cycle_property(name, seed, n):
    G = graph(name)
    ess = next(c for c in classes(name) if c.essential)
    mps = MatrixProductSystem.from_graph(G, G.ifs.probs, ess.vertices)
    rng = random.Random(seed)
    v = rng.choice(mps.vertices)
    path = []
    for _ in range(n):
        e = rng.choice(mps.out_edges(v))
        path.append(e.id)
        v = e.target
    cyc = complete_to_cycle(mps, path)
    assert cyc[: len(path)] == tuple(path) and mps.is_cycle(cyc)
    M, _ = mps.path_matrix(path)
    i, _ = np.unravel_index(int(np.argmax(M)), M.shape)
    assert exact_product(G, cyc, G.ifs.probs)[i][i] > 0


def test_synthesize_path_midpoint_testud():
    G, cls, mps = class_mps("testud", "essential", TESTUD_P)
    est = alpha_bounds(mps, t_min=1e-2, max_cycle_len=3)
    alpha = (est.inner_lo + est.inner_hi) / 2
    res = synthesize_path(mps, alpha, est, est.argmin_cycle, 60)
    assert mps.edges[res["path"][0]].source in cls.vertices
    assert abs(res["estimates"][-1] - alpha) < 0.05
    mps.check_path(res["path"])


def test_synthesize_path_endpoints_golden():
    _, _, mps = class_mps("golden-bc", "essential")
    est = alpha_bounds(mps, t_min=1e-2, max_cycle_len=4)
    for alpha in (est.inner_lo, est.inner_hi):
        res = synthesize_path(mps, alpha, est, est.argmax_cycle, 60)
        assert abs(res["estimates"][-1] - alpha) < 0.05
    with pytest.raises(ValueError):
        synthesize_path(mps, est.inner_hi + 1, est, est.argmax_cycle, 3)
