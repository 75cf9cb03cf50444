"""Planar reachability: decomposition, separators, pair sets, full pipeline."""

from __future__ import annotations

import random
from collections import deque

import pytest

from artifact.graph_core import GraphError, TerminalGraph, check_minor_witness
from artifact.instances import gen_lb_grid, gen_random_digraph
from artifact.oracles import terminal_reach_matrix
from artifact.planar_reach import (
    is_planar,
    path_separator,
    reach_endpoints_on_path,
    reduce_pair_set,
    sparsify_planar_reach,
    thorup_decompose,
)


def _dipath(n: int, terminals=(0,)) -> TerminalGraph:
    return TerminalGraph.build(n, [(i, i + 1) for i in range(n - 1)], list(terminals))


def _bfs_path(g: TerminalGraph, s: int, t: int):
    succ = g.successor_map()
    prev = {s: None}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        for y in succ[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    if t not in prev:
        return None
    path = [t]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def _reaches(g: TerminalGraph, s: int):
    succ = g.successor_map()
    seen = {s}
    queue = deque([s])
    while queue:
        for y in succ[queue.popleft()]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


# -- decomposition ---------------------------------------------------------------


def test_non_planar_input_is_rejected():
    k33 = TerminalGraph.build(6, [(a, b) for a in range(3) for b in range(3, 6)], [0])
    assert not is_planar(k33)
    with pytest.raises(GraphError):
        thorup_decompose(k33)


def test_single_reachable_layer_is_one_member():
    dec = thorup_decompose(_dipath(6))
    assert len(dec) == 1 and dec.members[0].same_as(_dipath(6))


def test_dipath_is_kept_whole():
    g = _dipath(10)
    dec = thorup_decompose(g)
    assert any(m.n == 10 and m.m == 9 for m in dec.members)


@pytest.mark.parametrize("seed", range(12))
def test_decomposition_properties(seed):
    rng = random.Random(seed)
    n = rng.randint(10, 120)
    g = gen_random_digraph(n, rng.randint(n, int(1.6 * n)), 3, planar=True, seed=seed)
    dec = thorup_decompose(g)
    count = {v: 0 for v in g.vertices}
    for mem in dec.members:
        assert is_planar(mem)
        for v in mem.vertices:
            count[v] += 1
    assert max(count.values()) <= 2
    vsets = [set(m.vertices) for m in dec.members]
    for _ in range(200):
        u, v = rng.sample(g.vertices, 2)
        p = _bfs_path(g, u, v)
        if p is not None:
            assert any(set(p) <= vs for vs in vsets)


# -- separators ----------------------------------------------------------------


def test_single_vertex_separator_is_empty():
    sep = path_separator(_dipath(1))
    assert sep.paths == [] and sep.components == []


def test_dipath_separator_splits_in_half():
    sep = path_separator(_dipath(11))
    assert len(sep.paths) == 1
    assert all(len(c) <= 11 // 2 for c in sep.components)


@pytest.mark.parametrize("seed", range(12))
def test_separator_properties(seed):
    rng = random.Random(seed)
    n = rng.randint(5, 100)
    g = gen_random_digraph(n, rng.randint(n, int(1.5 * n)), 2, planar=True, seed=seed)
    for mem in thorup_decompose(g).members:
        sep = path_separator(mem)
        assert len(sep.paths) <= 6
        for path in sep.paths:
            assert all(mem.has_edge(a, b) for a, b in zip(path, path[1:]))
        assert all(2 * len(c) <= mem.n for c in sep.components)
        if mem.n > 1:
            assert set().union(*map(set, sep.components), sep.vertices) == set(mem.vertices)


# -- reach endpoints on a path ---------------------------------------------------


def test_terminal_on_path():
    g = _dipath(5)
    assert reach_endpoints_on_path(g, [0, 1, 2, 3, 4], 2) == (2, 2)


def test_isolated_terminal():
    g = TerminalGraph.build(4, [(0, 1), (1, 2)], [3])
    assert reach_endpoints_on_path(g, [0, 1, 2], 3) == (None, None)


def test_non_path_is_rejected():
    g = _dipath(4)
    with pytest.raises(GraphError):
        reach_endpoints_on_path(g, [0, 2], 0)


@pytest.mark.parametrize("seed", range(20))
def test_endpoints_match_bruteforce(seed):
    rng = random.Random(seed)
    n = rng.randint(6, 60)
    g = gen_random_digraph(n, rng.randint(n, 2 * n), 3, planar=True, seed=seed)
    sep = path_separator(g)
    for Q in sep.paths:
        for x in g.terminals:
            to_x, from_x = reach_endpoints_on_path(g, Q, x)
            fwd = _reaches(g, x)
            hits = [q for q in Q if q in fwd]
            assert to_x == (hits[0] if hits else None)
            back = [q for q in Q if x in _reaches(g, q)]
            assert from_x == (back[-1] if back else None)


# -- pair sets -------------------------------------------------------------------


def test_no_terminals_no_pairs():
    assert reduce_pair_set(_dipath(8), []) == (set(), [])


def test_single_terminal_on_path_needs_no_pairs():
    assert reduce_pair_set(_dipath(5), [2]) == (set(), [])


def test_two_terminals_on_path_give_one_pair():
    g = TerminalGraph.build(6, [(i, i + 1) for i in range(5)], [1, 4])
    assert reduce_pair_set(g, [1, 4]) == ({(1, 4)}, [])


def test_terminals_beside_the_separator_path():
    # path 0..5; terminal 6 enters it at 2, terminal 7 leaves it from 3
    g = TerminalGraph.build(8, [(i, i + 1) for i in range(5)] + [(6, 2), (3, 7)], [6, 7])
    assert path_separator(g).paths == [[1, 2, 3, 4, 5]]
    pairs, new = reduce_pair_set(g, [6, 7])
    assert pairs == {(6, 2), (3, 7), (2, 3)}
    assert new == [2, 3]


# -- full pipeline -------------------------------------------------------------


def test_two_terminal_dipath_has_no_nonterminals():
    g = _dipath(7, terminals=(0, 6))
    h, trace, _ = sparsify_planar_reach(g)
    assert h.n == h.k == 2 and h.has_edge(0, 6)
    assert check_minor_witness(g, h, trace).ok


def test_lower_bound_grid_keeps_many_nonterminals():
    g = gen_lb_grid(16)
    h, trace, _ = sparsify_planar_reach(g)
    assert terminal_reach_matrix(h) == terminal_reach_matrix(g)
    assert h.n - h.k >= (16 // 4 - 1) ** 2


@pytest.mark.parametrize("seed", range(15))
def test_pipeline_exact(seed):
    rng = random.Random(seed)
    n = rng.randint(8, 150)
    k = rng.randint(1, min(8, n))
    g = gen_random_digraph(n, rng.randint(n, int(1.5 * n)), k, planar=True, seed=seed)
    h, trace, report = sparsify_planar_reach(g)
    assert terminal_reach_matrix(h) == terminal_reach_matrix(g)
    assert check_minor_witness(g, h, trace).ok
    assert report.pairs_total >= 0 and report.members >= 1
