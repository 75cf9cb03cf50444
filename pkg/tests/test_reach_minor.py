"""Reachability-preserving minors on digraphs."""

from __future__ import annotations

import itertools
import random

import pytest

from artifact.graph_core import TerminalGraph, check_minor_witness, trivial_pair_set
from artifact.instances import gen_random_digraph
from artifact.oracles import terminal_reach_matrix
from artifact.reach_minor import (
    consistent_tie_break,
    count_branching_events,
    minor_sparsify,
    minor_sparsify_dag,
    minor_sparsify_dag2,
    scc_decompose,
    shortest_path_union,
    sparsest_reachability_preserver,
)


def _dag_edges(rng: random.Random, n: int, lo: int, hi: int) -> int:
    return min(rng.randint(lo, hi), n * (n - 1) // 2)


def _brute_branching(g: TerminalGraph) -> int:
    heads = [e.head for _, e in g.edges()]
    return sum(1 for a, b in itertools.combinations(heads, 2) if a == b)


# -- tie-breaking -----------------------------------------------------------


def test_unique_shortest_path_is_returned():
    g = TerminalGraph.build(4, [(0, 1), (1, 2), (2, 3)], [0, 3])
    assert consistent_tie_break(g).path(0, 3) == [0, 1, 2, 3]


def test_diamond_choice_is_stable():
    g = TerminalGraph.build(4, [(0, 1), (1, 3), (0, 2), (2, 3)], [0, 3])
    tb = consistent_tie_break(g)
    first = tb.path(0, 3)
    assert first in ([0, 1, 3], [0, 2, 3])
    assert all(consistent_tie_break(g).path(0, 3) == first for _ in range(5))


@pytest.mark.parametrize("seed", range(40))
def test_subpath_consistency(seed):
    rng = random.Random(seed)
    n = rng.randint(4, 20)
    g = gen_random_digraph(n, _dag_edges(rng, n, n, 3 * n), 2, acyclic=True, seed=seed)
    tb = consistent_tie_break(g)
    for _ in range(30):
        y, y2 = rng.sample(g.vertices, 2)
        p = tb.path(y, y2)
        if p is None or len(p) < 2:
            continue
        i, j = sorted(rng.sample(range(len(p)), 2))
        assert tb.path(p[i], p[j]) == p[i : j + 1]


# -- strongly connected components -----------------------------------------


def test_dag_components_are_singletons():
    g = gen_random_digraph(12, 20, 3, acyclic=True, seed=3)
    assert all(len(c) == 1 for c in scc_decompose(g).components)


def test_cycle_is_one_component():
    g = TerminalGraph.build(5, [(i, (i + 1) % 5) for i in range(5)], [0])
    assert len(scc_decompose(g)) == 1


@pytest.mark.parametrize("seed", range(20))
def test_components_match_mutual_reachability(seed):
    g = gen_random_digraph(14, 24, 2, seed=seed)
    dec = scc_decompose(g)
    every = TerminalGraph.build(g.vertices, [(e.tail, e.head) for _, e in g.edges()], g.vertices)
    reach = terminal_reach_matrix(every)
    for u, v in itertools.combinations(g.vertices, 2):
        same = dec.comp_of[u] == dec.comp_of[v]
        assert same == (reach[(u, v)] and reach[(v, u)])


# -- Algorithm-1 style sparsifier ------------------------------------------


def test_empty_pair_set_leaves_isolated_terminals():
    g = gen_random_digraph(10, 18, 3, acyclic=True, seed=1)
    h, _ = minor_sparsify_dag(g, [])
    assert h.n == h.k == 3 and h.m == 0


def test_path_contracts_to_single_edge():
    g = TerminalGraph.build(4, [(0, 1), (1, 2), (2, 3)], [0, 3])
    h, trace = minor_sparsify_dag(g)
    assert h.n == 2 and h.edge_list() == [(0, 3, h.edge(h.edge_ids()[0]).weight)]
    assert check_minor_witness(g, h, trace).ok


def test_random_dag_reachability_preserved():
    g = gen_random_digraph(50, 110, 5, acyclic=True, seed=7)
    h, trace = minor_sparsify_dag(g)
    assert terminal_reach_matrix(h) == terminal_reach_matrix(g)
    assert check_minor_witness(g, h, trace).ok


def test_strongly_connected_input_keeps_only_terminals():
    g = TerminalGraph.build(6, [(i, (i + 1) % 6) for i in range(6)] + [(0, 3)], [0, 2, 4])
    h, trace = minor_sparsify(g)
    assert sorted(h.vertices) == [0, 2, 4]
    assert all(terminal_reach_matrix(h).values())


def test_dag_input_matches_dag_routine():
    g = gen_random_digraph(30, 60, 4, acyclic=True, seed=11)
    h1, _ = minor_sparsify(g)
    h2, _ = minor_sparsify_dag(g)
    assert (h1.n, h1.m, h1.k) == (h2.n, h2.m, h2.k)
    assert terminal_reach_matrix(h1) == terminal_reach_matrix(h2)


@pytest.mark.parametrize("seed", range(40))
def test_minor_sparsify_exact_and_small(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 60)
    k = rng.randint(1, min(6, n))
    g = gen_random_digraph(n, min(rng.randint(0, 3 * n), n * (n - 1)), k, seed=seed)
    h, trace = minor_sparsify(g)
    P = trivial_pair_set(g.terminals)
    assert terminal_reach_matrix(h) == terminal_reach_matrix(g)
    assert check_minor_witness(g, h, trace).ok
    assert h.n - h.k <= len(P) * (len(P) - 1) // 2


# -- Algorithm-3 style sparsifier ------------------------------------------


def test_sparsest_preserver_empty_pairs():
    g = gen_random_digraph(8, 12, 2, acyclic=True, seed=2)
    assert sparsest_reachability_preserver(g, []) == []


def test_sparsest_preserver_on_unique_path():
    g = TerminalGraph.build(5, [(0, 1), (1, 2), (2, 3), (3, 4)], [0, 4])
    assert sorted(sparsest_reachability_preserver(g, [(0, 4)])) == sorted(g.edge_ids())


@pytest.mark.parametrize("seed", range(30))
def test_sparsest_preserver_not_larger_than_path_union(seed):
    rng = random.Random(seed)
    n = rng.randint(4, 10)
    g = gen_random_digraph(n, _dag_edges(rng, n, 4, 16), 3, acyclic=True, seed=seed)
    P = sorted(trivial_pair_set(g.terminals))
    assert len(sparsest_reachability_preserver(g, P)) <= len(shortest_path_union(g, P))


def test_dag2_with_no_pairs_keeps_terminals_only():
    g = gen_random_digraph(8, 12, 3, acyclic=True, seed=4)
    h, _ = minor_sparsify_dag2(g, [])
    assert h.n == h.k


@pytest.mark.parametrize("seed", range(30))
def test_dag2_branching_bound_and_comparison(seed):
    rng = random.Random(seed)
    n = rng.randint(3, 12)
    k = rng.randint(2, min(3, n))
    g = gen_random_digraph(n, _dag_edges(rng, n, n, 2 * n), k, acyclic=True, seed=seed)
    P = sorted(trivial_pair_set(g.terminals))
    h1, _ = minor_sparsify_dag(g, P)
    h3, tr3 = minor_sparsify_dag2(g, P)
    assert terminal_reach_matrix(h3) == terminal_reach_matrix(g)
    assert check_minor_witness(g, h3, tr3).ok
    assert count_branching_events(h3) <= g.k * len(P)
    assert count_branching_events(h3) <= count_branching_events(h1)


# -- branching events ---------------------------------------------------------


def test_path_has_no_branching():
    assert count_branching_events(TerminalGraph.build(4, [(0, 1), (1, 2), (2, 3)], [0])) == 0


def test_in_star_of_three():
    assert count_branching_events(TerminalGraph.build(4, [(1, 0), (2, 0), (3, 0)], [0])) == 3


@pytest.mark.parametrize("seed", range(20))
def test_branching_matches_brute_force(seed):
    g = gen_random_digraph(15, 30, 2, acyclic=True, seed=seed)
    assert count_branching_events(g) == _brute_branching(g)
