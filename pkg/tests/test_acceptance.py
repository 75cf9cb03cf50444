"""Acceptance suite: the eleven exactness and size criteria at their stated scales.

Every criterion records one PASS/FAIL line (shown in pytest's terminal
summary, or printed when this file is run directly).  Tolerances are exact:
all weights are rationals and every comparison is equality.  The stated
runtime budget is part of each criterion.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Tuple

import pytest

from artifact.graph_core import check_minor_witness, trivial_pair_set
from artifact.instances import (
    distinguishing_pair,
    gen_incompressibility_family,
    gen_lb_grid,
    gen_os_instance,
    gen_random_digraph,
    verify_incompressibility_claims,
    verify_lb_grid,
)
from artifact.oracles import (
    bipartitions,
    random_demand,
    sparsest_cut_bruteforce,
    terminal_distance_matrix,
    terminal_mincut,
    terminal_mincut_exhaustive,
    terminal_mincut_table,
    terminal_reach_matrix,
    terminal_reach_matrix_closure,
)
from artifact.os_pipeline import build_sparsifier_os
from artifact.planar_reach import is_planar, sparsify_planar_reach
from artifact.reach_minor import count_branching_events, minor_sparsify, minor_sparsify_dag, minor_sparsify_dag2
from artifact.wye_delta import apply_composite, apply_rule

from _support import ACCEPTANCE_LINES, random_weighted_graph, rule_sites

pytestmark = pytest.mark.slow


@dataclass
class Outcome:
    ok: bool
    detail: str


def _record(number: int, title: str, budget: float, body: Callable[[], Outcome]) -> Outcome:
    start = time.perf_counter()
    out = body()
    elapsed = time.perf_counter() - start
    in_time = elapsed <= budget
    ok = out.ok and in_time
    timing = f"{elapsed:.1f}s of {budget:.0f}s"
    if not in_time:
        timing += " (over budget)"
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {out.detail}; {timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return Outcome(ok, out.detail)


# -- 1, 2: single-rule exactness -------------------------------------------


def _rule_instance(i: int, graph_mode: str):
    rng = random.Random(10_000 + i)
    n = rng.randint(3, 12)
    k = rng.randint(2, min(4, n))
    g = random_weighted_graph(rng, n, k, graph_mode, density=rng.uniform(0.2, 0.6)).thaw()
    edges = g.edge_list()
    for u, v, _ in rng.sample(edges, min(2, len(edges))):
        g.add_edge(u, v, Fraction(rng.randint(1, 9), rng.randint(1, 3)))
    return g.freeze()


def _rule_exactness(graph_mode: str, count: int = 1000) -> Outcome:
    oracle = terminal_mincut_table if graph_mode == "cut" else terminal_distance_matrix
    applied: Dict[str, int] = {}
    bad: List[Tuple[int, str, Tuple[int, ...]]] = []
    for i in range(count):
        g = _rule_instance(i, graph_mode)
        base = oracle(g)
        for rule, site in rule_sites(g):
            if rule in ("edge-deletion", "edge-replacement", "edge-subdivision"):
                h, _ = apply_composite(g, rule, site)
            else:
                h, _ = apply_rule(g, rule, site)
            applied[rule] = applied.get(rule, 0) + 1
            if oracle(h) != base:
                bad.append((i, rule, site))
    every_rule = len(set(applied) - {"edge-subdivision"}) == 7
    counts = ", ".join(f"{r}={c}" for r, c in sorted(applied.items()))
    return Outcome(not bad and every_rule, f"{count} instances, {sum(applied.values())} applications ({counts}), {len(bad)} mismatches")


def test_criterion_01_cut_rules():
    assert _record(1, "cut-rule exactness", 120, lambda: _rule_exactness("cut")).ok


def test_criterion_02_distance_rules():
    assert _record(2, "distance-rule exactness", 120, lambda: _rule_exactness("length")).ok


# -- 3, 4, 5: pipeline for terminals on one face ------------------------------


def _os_params(i: int) -> Tuple[int, int, int]:
    rng = random.Random(1000 + i)
    n = rng.randint(2, 36)
    k = rng.randint(2, min(5, n))
    return n, k, 1000 + i


def _os_pipeline(mode: str, count: int = 200) -> Outcome:
    oracle = terminal_mincut_table if mode == "cut" else terminal_distance_matrix
    problems: List[str] = []
    worst = 0.0
    for i in range(count):
        n, k, seed = _os_params(i)
        g = gen_os_instance(n, k, mode=mode, seed=seed)
        h, _ = build_sparsifier_os(g, mode)
        bound = (k + 4) * (k + 5) // 2
        worst = max(worst, h.n / bound)
        if oracle(h) != oracle(g):
            problems.append(f"seed {seed}: table differs")
        if h.n > bound:
            problems.append(f"seed {seed}: {h.n} > {bound} vertices")
        if not is_planar(h):
            problems.append(f"seed {seed}: output not planar")
    detail = f"{count} instances (n<=36, k<=5), {len(problems)} failures, largest output at {worst:.0%} of the size bound"
    if problems:
        detail += " [" + "; ".join(problems[:3]) + "]"
    return Outcome(not problems, detail)


def test_criterion_03_os_cut():
    assert _record(3, "cut pipeline", 600, lambda: _os_pipeline("cut")).ok


def test_criterion_04_os_distance():
    assert _record(4, "distance pipeline", 600, lambda: _os_pipeline("distance")).ok


def _os_flow(count: int = 50, demands: int = 5) -> Outcome:
    bad: List[str] = []
    checked = 0
    for i in range(count):
        rng = random.Random(5000 + i)
        n = rng.randint(2, 16)
        k = rng.randint(2, min(5, n))
        g = gen_os_instance(n, k, mode="cut", seed=5000 + i)
        h, plog = build_sparsifier_os(g, "flow")
        if plog.scaling != 1:
            bad.append(f"instance {i}: scaling {plog.scaling}")
        for _ in range(demands):
            d = random_demand(sorted(g.terminals), rng)
            checked += 1
            if sparsest_cut_bruteforce(g, d)[0] != sparsest_cut_bruteforce(h, d)[0]:
                bad.append(f"instance {i}: sparsest cut differs")
    return Outcome(not bad, f"{count} instances (n<=16) x {demands} demands = {checked} comparisons, {len(bad)} mismatches")


def test_criterion_05_os_flow():
    assert _record(5, "flow pipeline", 600, _os_flow).ok


# -- 6, 7: reachability-preserving minors -----------------------------------


def _rpm(count: int = 500) -> Outcome:
    bad: List[str] = []
    for i in range(count):
        rng = random.Random(20_000 + i)
        n = rng.randint(1, 120)
        k = rng.randint(1, min(6, n))
        m = min(rng.randint(0, 3 * n), n * (n - 1))
        g = gen_random_digraph(n, m, k, seed=20_000 + i)
        h, trace = minor_sparsify(g)
        p = len(trivial_pair_set(g.terminals))
        if not check_minor_witness(g, h, trace).ok:
            bad.append(f"{i}: witness")
        if terminal_reach_matrix(h) != terminal_reach_matrix(g):
            bad.append(f"{i}: reachability")
        if h.n - h.k > p * (p - 1) // 2:
            bad.append(f"{i}: {h.n - h.k} non-terminals")
    return Outcome(not bad, f"{count} digraphs (n<=120, k<=6), {len(bad)} failures")


def test_criterion_06_rpm():
    assert _record(6, "reachability minors", 300, _rpm).ok


def _branching(big: int = 500, tiny: int = 100) -> Outcome:
    bad: List[str] = []
    worst1 = worst3 = 0.0
    for i in range(big):
        rng = random.Random(30_000 + i)
        n = rng.randint(1, 120)
        k = rng.randint(1, min(6, n))
        m = min(rng.randint(0, 3 * n), n * (n - 1) // 2)
        g = gen_random_digraph(n, m, k, acyclic=True, seed=30_000 + i)
        P = sorted(trivial_pair_set(g.terminals))
        h, _ = minor_sparsify_dag(g, P)
        bound = len(P) * (len(P) - 1) // 2
        events = count_branching_events(h)
        if events > bound:
            bad.append(f"dag {i}: {events} > {bound}")
        if bound:
            worst1 = max(worst1, events / bound)
    for i in range(tiny):
        rng = random.Random(40_000 + i)
        n = rng.randint(2, 12)
        k = rng.randint(2, min(4, n))
        m = min(rng.randint(n, 2 * n), n * (n - 1) // 2)
        g = gen_random_digraph(n, m, k, acyclic=True, seed=40_000 + i)
        pairs = sorted(trivial_pair_set(g.terminals))
        P = sorted(rng.sample(pairs, min(len(pairs), rng.randint(1, 6))))
        h, _ = minor_sparsify_dag2(g, P)
        bound = g.k * len(P)
        events = count_branching_events(h)
        if events > bound:
            bad.append(f"tiny {i}: {events} > {bound}")
        worst3 = max(worst3, events / bound)
    return Outcome(
        not bad,
        f"{big} DAGs under |P|(|P|-1)/2 (max {worst1:.0%} of bound), {tiny} tiny DAGs under k|P| (max {worst3:.0%}), {len(bad)} violations",
    )


def test_criterion_07_branching():
    assert _record(7, "branching bounds", 300, _branching).ok


# -- 8: planar pipeline ------------------------------------------------------------


def _planar(count: int = 100) -> Outcome:
    bad: List[str] = []
    ratios: List[float] = []
    for i in range(count):
        rng = random.Random(50_000 + i)
        n = rng.randint(10, 300)
        k = rng.randint(1, min(8, n))
        g = gen_random_digraph(n, rng.randint(n, int(1.5 * n)), k, planar=True, seed=50_000 + i)
        h, _, report = sparsify_planar_reach(g)
        if terminal_reach_matrix(h) != terminal_reach_matrix(g):
            bad.append(f"{i}: reachability")
        if k >= 2:
            ratios.append(report.pairs_total / (k * math.log2(k)))
    c = max(ratios) if ratios else 0.0
    return Outcome(not bad, f"{count} planar digraphs (n<=300, k<=8), {len(bad)} mismatches; |P'| <= C*k*log2(k) with fitted C = {c:.2f}")


def test_criterion_08_planar():
    assert _record(8, "planar reachability", 600, _planar).ok


# -- 9, 10: lower bounds -----------------------------------------------------------


def _lower_bound() -> Outcome:
    bad: List[str] = []
    counts = []
    for k in (8, 16, 24):
        g = gen_lb_grid(k)
        if not verify_lb_grid(g).ok:
            bad.append(f"k={k}: generator checks")
        h, trace = minor_sparsify(g)
        need = (k // 4 - 1) ** 2
        counts.append(f"k={k}: {h.n - h.k}>={need}")
        if h.n - h.k < need:
            bad.append(f"k={k}: only {h.n - h.k} non-terminals")
        if not verify_lb_grid(g, h, trace).ok:
            bad.append(f"k={k}: path claims")
    return Outcome(not bad, ", ".join(counts) + f"; {len(bad)} failures")


def test_criterion_09_lower_bound_grid():
    assert _record(9, "lower-bound grid", 300, _lower_bound).ok


def _incompressibility(subsets: int = 50, pairs: int = 100) -> Outcome:
    k, t = 9, 3
    _, s_prime = gen_incompressibility_family(k, t, seed=0)
    rng = random.Random(60_000)
    bad: List[str] = []
    for i in range(subsets):
        R = [j for j in s_prime if rng.random() < 0.5]
        g, _ = gen_incompressibility_family(k, t, R=R, subset=s_prime)
        if not verify_incompressibility_claims(g, k, s_prime, R, t).ok:
            bad.append(f"subset {i}: claims")
    seen = 0
    while seen < pairs:
        r1 = frozenset(j for j in s_prime if rng.random() < 0.5)
        r2 = frozenset(j for j in s_prime if rng.random() < 0.5)
        if r1 == r2:
            continue
        seen += 1
        g1, _ = gen_incompressibility_family(k, t, R=r1, subset=s_prime)
        g2, _ = gen_incompressibility_family(k, t, R=r2, subset=s_prime)
        if distinguishing_pair(k, g1, g2) is None:
            bad.append(f"pair {seen}: indistinguishable")
    return Outcome(not bad, f"|S'|={len(s_prime)}, {subsets} subsets checked, {pairs} distinct pairs distinguished, {len(bad)} failures")


def test_criterion_10_incompressibility():
    assert _record(10, "incompressibility family", 120, _incompressibility).ok


# -- 11: oracle self-consistency ---------------------------------------------------


def _oracles(cuts: int = 200, closures: int = 500) -> Outcome:
    bad: List[str] = []
    entries = 0
    for i in range(cuts):
        rng = random.Random(70_000 + i)
        n = rng.randint(2, 10)
        g = random_weighted_graph(rng, n, rng.randint(2, min(4, n)), "cut", density=rng.uniform(0.2, 0.7))
        for S in bipartitions(g.terminals):
            entries += 1
            if terminal_mincut(g, S) != terminal_mincut_exhaustive(g, S):
                bad.append(f"cut {i}")
    for i in range(closures):
        rng = random.Random(80_000 + i)
        n = rng.randint(1, 60)
        g = gen_random_digraph(n, min(rng.randint(0, 3 * n), n * (n - 1)), rng.randint(1, min(6, n)), seed=80_000 + i)
        if terminal_reach_matrix(g) != terminal_reach_matrix_closure(g):
            bad.append(f"closure {i}")
    return Outcome(not bad, f"{cuts} graphs ({entries} cut entries) and {closures} digraphs, {len(bad)} disagreements")


def test_criterion_11_oracles():
    assert _record(11, "oracle self-consistency", 120, _oracles).ok


if __name__ == "__main__":
    tests = [v for name, v in sorted(globals().items()) if name.startswith("test_criterion_")]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    print(f"{len(tests) - failed}/{len(tests)} criteria passed")
