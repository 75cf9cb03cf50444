"""Brute-force ground truth: reachability, cuts, distances, sparsest cut."""

from __future__ import annotations

import random
from fractions import Fraction as F

import pytest

from artifact.graph_core import GraphError, TerminalGraph
from artifact.instances import gen_os_instance, gen_random_digraph
from artifact.oracles import (
    INF,
    bipartitions,
    distance_bruteforce,
    equivalence_report,
    random_demand,
    sparsest_cut_bruteforce,
    sparsest_cut_via_terminal_cuts,
    terminal_distance_matrix,
    terminal_mincut,
    terminal_mincut_exhaustive,
    terminal_mincut_table,
    terminal_reach_matrix,
    terminal_reach_matrix_closure,
)
from artifact.os_pipeline import build_sparsifier_os

from _support import random_weighted_graph


def _scaled(g: TerminalGraph, factor) -> TerminalGraph:
    return TerminalGraph.build(g.vertices, [(u, v, w * factor) for u, v, w in g.edge_list()], g.terminals, directed=False, mode=g.mode)


# -- reachability --------------------------------------------------------------


def test_single_arc_matrix():
    g = TerminalGraph.build(2, [(0, 1)], [0, 1])
    assert terminal_reach_matrix(g) == {(0, 1): True, (1, 0): False}


def test_strongly_connected_all_true():
    g = TerminalGraph.build(4, [(i, (i + 1) % 4) for i in range(4)], [0, 1, 2, 3])
    assert all(terminal_reach_matrix(g).values())


@pytest.mark.parametrize("seed", range(30))
def test_two_closures_agree(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 40)
    g = gen_random_digraph(n, min(rng.randint(0, 3 * n), n * (n - 1)), rng.randint(1, min(6, n)), seed=seed)
    assert terminal_reach_matrix(g) == terminal_reach_matrix_closure(g)


# -- minimum cuts -------------------------------------------------------------


def test_single_edge_cut():
    g = TerminalGraph.build(2, [(0, 1, 3)], [0, 1], directed=False, mode="cut")
    assert terminal_mincut(g, {0}) == 3


def test_disconnected_terminals_cut_zero():
    g = TerminalGraph.build(3, [(0, 2, 3)], [0, 1], directed=False, mode="cut")
    assert terminal_mincut(g, {0}) == 0


def test_cut_side_must_be_proper():
    g = TerminalGraph.build(2, [(0, 1, 3)], [0, 1], directed=False, mode="cut")
    with pytest.raises(GraphError):
        terminal_mincut(g, set())
    with pytest.raises(GraphError):
        terminal_mincut(g, {0, 1})


@pytest.mark.parametrize("k,entries", [(2, 1), (3, 3), (4, 7), (5, 15)])
def test_table_sizes(k, entries):
    assert len(bipartitions(range(k))) == entries


def test_table_cap():
    g = TerminalGraph.build(5, [], range(5), directed=False, mode="cut")
    with pytest.raises(GraphError):
        terminal_mincut_table(g, cap=4)


@pytest.mark.parametrize("seed", range(40))
def test_max_flow_matches_exhaustive(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 10)
    g = random_weighted_graph(rng, n, rng.randint(2, min(4, n)), "cut")
    for S in bipartitions(g.terminals):
        assert terminal_mincut(g, S) == terminal_mincut_exhaustive(g, S)


# -- distances ---------------------------------------------------------------


def test_single_edge_distance():
    g = TerminalGraph.build(2, [(0, 1, 7)], [0, 1], directed=False, mode="length")
    assert terminal_distance_matrix(g)[(0, 1)] == 7


def test_unreachable_is_infinite_marker():
    g = TerminalGraph.build(3, [(0, 2, 1)], [0, 1], directed=False, mode="length")
    d = terminal_distance_matrix(g)[(0, 1)]
    assert d is INF and d > 10**9 and str(d) == "INF"


@pytest.mark.parametrize("seed", range(30))
def test_dijkstra_matches_path_enumeration(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 9)
    g = random_weighted_graph(rng, n, rng.randint(2, min(4, n)), "length")
    d = terminal_distance_matrix(g)
    for (s, t), value in d.items():
        assert distance_bruteforce(g, s, t) == value


# -- sparsest cut --------------------------------------------------------------


def test_one_edge_unit_demand():
    g = TerminalGraph.build(2, [(0, 1, 4)], [0, 1], directed=False, mode="cut")
    phi, U = sparsest_cut_bruteforce(g, {(0, 1): F(1)})
    assert phi == 4


def test_demand_is_symmetric_and_zero_on_diagonal():
    # stored once per unordered pair, so d(x,x') = d(x',x) by construction
    d = random_demand([8, 3, 5], random.Random(0))
    assert sorted(d) == [(3, 5), (3, 8), (5, 8)]
    assert all(v >= 0 for v in d.values()) and any(d.values())


@pytest.mark.parametrize("seed", range(15))
def test_homogeneity(seed):
    rng = random.Random(seed)
    g = random_weighted_graph(rng, 7, 3, "cut", density=0.6)
    d = random_demand(sorted(g.terminals), rng)
    if not any(d.values()):
        return
    phi, U = sparsest_cut_bruteforce(g, d)
    phi2, U2 = sparsest_cut_bruteforce(_scaled(g, 2), d)
    phi3, U3 = sparsest_cut_bruteforce(g, {p: 3 * v for p, v in d.items()})
    assert (phi2, U2) == (2 * phi, U)
    assert (phi3, U3) == (phi / 3, U)


@pytest.mark.parametrize("seed", range(15))
def test_terminal_cut_route_agrees_with_bruteforce(seed):
    rng = random.Random(seed)
    g = random_weighted_graph(rng, rng.randint(3, 9), 3, "cut", density=0.5)
    d = random_demand(sorted(g.terminals), rng)
    if not any(d.values()):
        return
    assert sparsest_cut_via_terminal_cuts(g, d)[0] == sparsest_cut_bruteforce(g, d)[0]


def test_all_zero_demand_is_rejected():
    g = TerminalGraph.build(2, [(0, 1, 4)], [0, 1], directed=False, mode="cut")
    with pytest.raises(GraphError):
        sparsest_cut_bruteforce(g, {(0, 1): F(0), (1, 0): F(0)})


@pytest.mark.parametrize("seed", range(4))
def test_flow_equality_on_pipeline_output(seed):
    g = gen_os_instance(12, 3, mode="cut", seed=seed)
    h, _ = build_sparsifier_os(g, "flow")
    assert equivalence_report(g, h, "flow", seed=seed).ok


# -- reports --------------------------------------------------------------


def test_self_comparison_passes():
    g = gen_os_instance(10, 3, mode="cut", seed=1)
    for mode in ("cut", "flow"):
        report = equivalence_report(g, g, mode)
        assert report.ok and report.mismatches == []


def test_perturbed_unique_min_cut_reports_witness():
    g = TerminalGraph.build(3, [(0, 2, 1), (2, 1, 5)], [0, 1], directed=False, mode="cut")
    h = TerminalGraph.build(3, [(0, 2, 2), (2, 1, 5)], [0, 1], directed=False, mode="cut")
    report = equivalence_report(g, h, "cut")
    assert not report.ok
    assert report.mismatches[0]["input"] == "1" and report.mismatches[0]["output"] == "2"


def test_reports_are_deterministic():
    g = gen_os_instance(10, 3, mode="cut", seed=2)
    h = _scaled(g, 2)
    assert equivalence_report(g, h, "flow", seed=3).to_json() == equivalence_report(g, h, "flow", seed=3).to_json()


def test_terminal_label_mismatch_is_rejected():
    g = TerminalGraph.build(2, [(0, 1, 4)], [0, 1], directed=False, mode="cut")
    h = TerminalGraph.build(3, [(0, 2, 4)], [0, 2], directed=False, mode="cut")
    with pytest.raises(GraphError):
        equivalence_report(g, h, "cut")
