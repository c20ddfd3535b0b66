"""Command line interface: ``analyze graph|classes|dims|point|check``."""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .config import AnalysisConfig, ConfigError, load_config, parse_probs
from .dims import (
    DimensionReport,
    cycle_expression_text,
    dimension_set,
    local_dim_periodic,
    local_dim_slope,
    sample_points,
)
from .exactnum import ParseError, parse_element, sign, to_float
from .ifs import IFSError, UndecidedError, compose, words_of_generation
from .loops import (
    LoopClass,
    NotInAttractor,
    StructureError,
    essential_class,
    maximal_loop_classes,
    point_reps,
)
from .mps import MatrixProductSystem, alpha_bounds
from .netgraph import (
    FNCUndetected,
    GraphError,
    NetInterval,
    build_transition_graph,
    children,
    expand,
    neighbour_set,
    to_dot,
    to_json,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FNC = 3
EXIT_HYPOTHESIS = 4
EXIT_INVARIANT = 5


def _class_names(classes: list[LoopClass]) -> dict[int, str]:
    names, k = {}, 0
    for c in classes:
        if c.essential:
            names[c.id] = "ess"
        else:
            k += 1
            names[c.id] = f"L{k}"
    return names


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _ifs_dict(cfg: AnalysisConfig) -> dict:
    F = cfg.ifs.field
    return {
        "name": cfg.name,
        "field": {"generator": F.generator, "minimal_polynomial": F.polynomial_text(),
                  "root_interval": [str(x) for x in F.root_interval]},
        "maps": [{"r": str(s.r), "d": str(s.d)} for s in cfg.ifs.maps],
    }


def class_summary(G, classes) -> list[dict]:
    names = _class_names(classes)
    out = []
    for c in classes:
        entry = {
            "name": names[c.id],
            "vertices": [G.vertex_label(v) for v in c.vertices],
            "edges": [G.edges[e].label for e in c.edges],
            "simple": c.simple,
            "irreducible": c.irreducible,
            "essential": c.essential,
        }
        if c.simple:
            entry["period"] = [G.edges[e].label for e in c.cycle]
            entry["lambda"] = c.lam
            entry["degenerate"] = c.degenerate
        out.append(entry)
    return out


def cmd_graph(cfg: AnalysisConfig, args) -> int:
    G = build_transition_graph(cfg.ifs, cfg.params.max_vertices)
    fmt = args.format
    if fmt is None and args.out:
        fmt = "dot" if args.out.endswith(".dot") else "json"
    summary = G.summary()
    if fmt is None:
        print(summary)
        return EXIT_OK
    classes = maximal_loop_classes(G) if fmt == "dot" else None
    text = to_dot(G, classes) if fmt == "dot" else to_json(G)
    _emit(text, args.out)
    print(summary, file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def cmd_classes(cfg: AnalysisConfig, args) -> int:
    G = build_transition_graph(cfg.ifs, cfg.params.max_vertices)
    classes = maximal_loop_classes(G, cfg.ifs.probs)
    if args.format == "json":
        _emit(json.dumps(class_summary(G, classes), indent=2, sort_keys=True), args.out)
    else:
        names = _class_names(classes)
        lines = []
        for c in classes:
            flags = [c.kind]
            if c.essential:
                flags.append("irreducible" if c.irreducible else "reducible")
            if c.simple:
                flags.append("degenerate" if c.degenerate else "non-degenerate")
            extra = f" lambda={c.lam:.10g}" if c.simple else ""
            lines.append(f"{names[c.id]} {' '.join(flags)} {c.label(G)}{extra}")
        _emit("\n".join(lines), args.out)
    bad = [c for c in classes if not (c.simple or c.irreducible)]
    return EXIT_HYPOTHESIS if bad else EXIT_OK


def build_report(cfg: AnalysisConfig, params=None) -> tuple[dict, DimensionReport]:
    params = params or cfg.params
    G = build_transition_graph(cfg.ifs, params.max_vertices)
    classes = maximal_loop_classes(G, cfg.ifs.probs)
    report = dimension_set(G, cfg.ifs.probs, params, classes)
    names = _class_names(classes)
    body = report.to_dict()
    for entry in body["classes"]:
        entry["name"] = names[entry["class_id"]]
    for iv in body["dimension_set"]["intervals"]:
        iv["class"] = [names[i] for i in iv["class"]]
    for pt in body["dimension_set"]["isolated_points"]:
        pt["classes"] = [names[i] for i in pt["classes"]]
    doc = {
        "ifs": _ifs_dict(cfg),
        "probs": [str(p) for p in cfg.ifs.probs],
        "graph": {"vertices": G.n_vertices, "edges": G.n_edges},
        **body,
    }
    return doc, report


def cmd_dims(cfg: AnalysisConfig, args) -> int:
    doc, report = build_report(cfg)
    if args.format == "json" or args.out:
        _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    if not args.out and args.format != "json":
        for iv in doc["dimension_set"]["intervals"]:
            kind = "point" if iv["hi_float"] - iv["lo_float"] <= report.params.merge_tol else "interval"
            status = "certified" if iv["certified"] else "estimated"
            lo = iv["lo_expr"] or f"{iv['lo_float']:.10g}"
            hi = iv["hi_expr"] or f"{iv['hi_float']:.10g}"
            if kind == "point":
                print(f"point {iv['lo_float']:.10g} = {lo}  [{', '.join(iv['class'])}]")
            else:
                print(f"interval [{iv['lo_float']:.10g}, {iv['hi_float']:.10g}] = [{lo}, {hi}]"
                      f"  {status}  [{', '.join(iv['class'])}]")
    if report.hypothesis_violated:
        print("hypothesis violated: a loop class is neither simple nor irreducible; "
              "the set is not certified", file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_point(cfg: AnalysisConfig, args) -> int:
    if args.x is None:
        raise ConfigError("point: --x is required")
    F = cfg.ifs.field
    try:
        x = parse_element(args.x, F)
    except ParseError as exc:
        raise ConfigError(f"--x: {exc}") from None
    G = build_transition_graph(cfg.ifs, cfg.params.max_vertices)
    reps = point_reps(x, G, depth=args.depth)
    doc = {"x": str(x), "x_float": to_float(x, 1e-15), "representations": []}
    for r in reps:
        doc["representations"].append({
            "preperiod": None if r.preperiod is None else [G.edges[e].label for e in r.preperiod],
            "period": None if r.period is None else [G.edges[e].label for e in r.period],
            "prefix": [G.edges[e].label for e in r.path[:20]],
        })
    if all(r.periodic for r in reps):
        val, _, period = local_dim_periodic(reps, G, cfg.ifs.probs)
        doc["local_dimension"] = val
        doc["expression"] = cycle_expression_text(G, cfg.ifs.probs, period)
    else:
        doc["local_dimension"] = None
        doc["note"] = "aperiodic within depth"
    if args.mc:
        samples = sample_points(cfg.ifs, cfg.ifs.probs, cfg.params.mc_samples,
                                cfg.params.mc_depth, args.seed if args.seed is not None
                                else cfg.params.seed)
        scales = [10 ** (-k / 4) for k in range(8, 25)]
        doc["slope"] = local_dim_slope(cfg.ifs, cfg.ifs.probs, x, scales, samples=samples)
        doc["slope"]["high_variance"] = bool(doc["slope"]["high_variance"])
    if args.format == "json" or args.out:
        _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    else:
        for r in doc["representations"]:
            if r["period"] is not None:
                print(f"rep: ({', '.join(r['preperiod'])}) ({', '.join(r['period'])})^inf")
            else:
                print(f"rep: ({', '.join(r['prefix'])}, ...)")
        if doc["local_dimension"] is not None:
            print(f"dim = {doc['local_dimension']:.10g}"
                  + (f" = {doc['expression']}" if doc["expression"] else ""))
        else:
            print("dim: aperiodic within depth")
        if "slope" in doc:
            print(f"slope estimate = {doc['slope']['slope']:.4f}")
    return EXIT_OK


# --- invariant suite -----------------------------------------------------------------


def run_checks(cfg: AnalysisConfig, slow: bool = False, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Structural and numerical invariants of one configuration."""
    results: list[tuple[str, bool, str]] = []

    def check(name, fn):
        try:
            detail = fn()
            results.append((name, True, detail or ""))
        except Exception as exc:  # each check reports its own failure
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    ifs = cfg.ifs
    F = ifs.field
    rng = random.Random(seed)

    def field_axioms():
        def rand():
            return F.element([Fraction(rng.randint(-20, 20), rng.randint(1, 9))
                              for _ in range(F.degree)])
        for _ in range(300):
            a, b, c = rand(), rand(), rand()
            assert (a + b) + c == a + (b + c) and a * b == b * a
            assert (a * b) * c == a * (b * c) and a * (b + c) == a * b + a * c
            if not a.is_zero():
                assert a * a.inverse() == F.one
            fa, fb = to_float(a, 1e-12), to_float(b, 1e-12)
            if abs(fa - fb) > 1e-9:
                assert sign(a - b) == (1 if fa > fb else -1)
        return "300 samples"

    check("field axioms and order", field_axioms)
    G = None

    def graph():
        nonlocal G
        G = build_transition_graph(ifs, cfg.params.max_vertices)
        return G.summary()

    check("transition graph closes", graph)
    if G is None:
        return results

    def columns():
        for e in G.edges:
            M = e.matrix(ifs.probs)
            assert (M.sum(axis=0) > 0).all(), e.label
            assert 0 < float(e.W) < 1, e.label

    check("column positivity and weights", columns)

    def generation_words():
        for t in (F(Fraction(1, 2)), ifs.max_abs_r() ** 2):
            for w, s in words_of_generation(ifs, t).items():
                assert abs(s.r) < t <= abs(compose(ifs, w[:-1]).r)

    check("words of generation", generation_words)

    def locality():
        # expand concrete net intervals directly and compare with the vertex data
        root = NetInterval(F.zero, F.one, F(2))
        frontier = [(root, G.root)]
        n = 0
        for _ in range(3):
            nxt = []
            for delta, v in frontier:
                kids = children(ifs, delta)
                local = expand(ifs, G.vertices[v])
                assert len(kids) == len(local), "child count"
                for (c, q), lc in zip(kids, local):
                    ns, _ = neighbour_set(ifs, c)
                    assert ns == lc.neighbours and q == lc.q, "child data"
                    w = G.find_vertex(ns)
                    nxt.append((c, w))
                    n += 1
            frontier = nxt[:12]
        return f"{n} net intervals"

    check("locality of children", locality)
    classes = []

    def loop_classes():
        nonlocal classes
        classes = maximal_loop_classes(G, ifs.probs)
        seen = set()
        for c in classes:
            assert not (seen & set(c.vertices)), "classes overlap"
            seen |= set(c.vertices)
        return f"{len(classes)} classes"

    check("loop classes partition", loop_classes)

    def essential():
        ess = essential_class(G, classes)
        return f"{len(ess.vertices)} vertices"

    check("essential class irreducible", essential)

    def hypothesis():
        bad = [c.id for c in classes if not (c.simple or c.irreducible)]
        assert not bad, f"classes {bad} are neither simple nor irreducible"

    check("classes simple or irreducible", hypothesis)

    def brackets():
        for c in classes:
            if c.simple or not c.irreducible:
                continue
            mps = MatrixProductSystem.from_graph(G, ifs.probs, c.vertices)
            est = alpha_bounds(mps, t_min=1e-3 if not slow else 1e-4,
                               max_cycle_len=min(cfg.params.max_cycle_len, 6))
            for lvl in est.levels:
                assert lvl.outer_lo <= est.inner_lo + 1e-9, "lower bound"
                assert est.inner_hi <= lvl.outer_hi + 1e-9, "upper bound"

    check("inner bracket inside outer bracket", brackets)
    if slow:
        def comparability():
            import numpy as np

            from .dims import measure_oracle

            samples = sample_points(ifs, ifs.probs, cfg.params.mc_samples, cfg.params.mc_depth,
                                    cfg.params.seed)
            ratios = []
            stack = [(G.root, 0.0, 1.0, np.ones((1, 1)), 0)]
            while stack:
                v, lo, hi, T, n = stack.pop()
                if n >= 6:
                    continue
                for e in G.out_edges(v):
                    T2 = T @ e.matrix(ifs.probs)
                    lo2 = lo + (hi - lo) * float(e.q)
                    hi2 = lo2 + (hi - lo) * float(e.d)
                    m, _ = measure_oracle(ifs, ifs.probs, lo2, hi2, samples=samples)
                    ratios.append(m / T2.sum())
                    stack.append((e.target, lo2, hi2, T2, n + 1))
            spread = max(ratios) / min(ratios)
            assert spread < 1e3, f"spread {spread:.3g}"
            return f"spread {spread:.3g}"

        check("measure comparability", comparability)
    return results


def cmd_check(cfg: AnalysisConfig, args) -> int:
    results = run_checks(cfg, slow=args.slow, seed=args.seed or 0)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_INVARIANT


COMMANDS = {
    "graph": cmd_graph,
    "classes": cmd_classes,
    "dims": cmd_dims,
    "point": cmd_point,
    "check": cmd_check,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="analyze",
        description="Transition graphs and local dimensions of self-similar measures.",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="config file or bundled fixture name")
    p.add_argument("--out", help="write the export or report to this file")
    p.add_argument("--format", choices=["dot", "json"])
    p.add_argument("--t-min", type=float, dest="t_min")
    p.add_argument("--max-cycle-len", type=int, dest="max_cycle_len")
    p.add_argument("--seed", type=int)
    p.add_argument("--slow", action="store_true", help="include expensive checks")
    p.add_argument("--probs", help="comma separated probabilities overriding the config")
    p.add_argument("--x", help="point for the point command, in the element grammar")
    p.add_argument("--depth", type=int, default=200, help="walk depth for the point command")
    p.add_argument("--mc", action="store_true", help="point: add a Monte Carlo slope estimate")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.probs:
            try:
                cfg = cfg.with_probs(parse_probs(args.probs, "--probs"))
            except IFSError as exc:
                raise ConfigError(f"--probs: {exc}") from None
        params = cfg.params
        if args.t_min is not None:
            if not 0 < args.t_min < 1:
                raise ConfigError("--t-min must lie in (0, 1)")
            params = replace(params, t_min=args.t_min)
        if args.max_cycle_len is not None:
            if args.max_cycle_len < 1:
                raise ConfigError("--max-cycle-len must be >= 1")
            params = replace(params, max_cycle_len=args.max_cycle_len)
        if args.seed is not None:
            params = replace(params, seed=args.seed)
        cfg = replace(cfg, params=params)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FNCUndetected as exc:
        print(f"finite neighbour condition not detected: {exc}", file=sys.stderr)
        for ns in exc.frontier[:5]:
            print("  frontier: {" + ", ".join(str(n) for n in ns) + "}", file=sys.stderr)
        return EXIT_FNC
    except NotInAttractor as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphError, StructureError, UndecidedError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
