"""Generators, the directed-grid lower bound and the Steiner-triple family."""

from __future__ import annotations

import itertools
import random

import pytest

from artifact.graph_core import GraphError, TerminalGraph
from artifact.instances import (
    detouring_cycles,
    detouring_graph,
    detouring_subset,
    distinguishing_pair,
    gen_incompressibility_family,
    gen_lb_grid,
    gen_os_instance,
    gen_random_digraph,
    gen_sts,
    is_acyclic,
    lb_grid_labels,
    verify_incompressibility_claims,
    verify_lb_grid,
)
from artifact.oracles import terminal_reach_matrix
from artifact.reach_minor import minor_sparsify

# -- random digraphs ---------------------------------------------------------


def test_isolated_terminals():
    g = gen_random_digraph(5, 0, 5, seed=1)
    assert g.n == g.k == 5 and g.m == 0


def test_same_seed_same_graph():
    assert gen_random_digraph(30, 70, 4, seed=9).same_as(gen_random_digraph(30, 70, 4, seed=9))
    assert not gen_random_digraph(30, 70, 4, seed=9).same_as(gen_random_digraph(30, 70, 4, seed=10))


@pytest.mark.parametrize("seed", range(200))
def test_acyclic_flag(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 30)
    assert is_acyclic(gen_random_digraph(n, min(2 * n, n * (n - 1) // 2), 1, acyclic=True, seed=seed))


def test_is_acyclic_detects_cycle():
    assert not is_acyclic(TerminalGraph.build(3, [(0, 1), (1, 2), (2, 0)], [0]))


@pytest.mark.parametrize("n,m,k", [(3, 4, 1), (3, 7, 1), (4, 1, 5)])
def test_infeasible_parameters(n, m, k):
    with pytest.raises(GraphError):
        gen_random_digraph(n, m, k, acyclic=(m == 4), seed=0)


def test_planar_flag_gives_planar_graph():
    from artifact.planar_reach import is_planar

    g = gen_random_digraph(40, 60, 5, planar=True, seed=3)
    assert is_planar(g) and g.k == 5


# -- instances with terminals on one face ------------------------------------


def test_two_vertex_instance_is_one_edge():
    g = gen_os_instance(2, 2, mode="cut", seed=0)
    assert (g.n, g.m, g.k) == (2, 1, 2)


@pytest.mark.parametrize("seed", range(20))
def test_terminals_on_coordinate_boundary(seed):
    rng = random.Random(seed)
    n = rng.randint(4, 36)
    g = gen_os_instance(n, rng.randint(2, 5), mode=rng.choice(["cut", "distance"]), seed=seed)
    coords = g.coords()
    assert all(_outer(coords, coords[t]) for t in g.terminals)
    assert all(w > 0 for *_, w in g.edge_list())


def _outer(coords, p) -> bool:
    """p is visible from outside along some axis ray (outer-face check on a grid subgraph)."""
    pts = set(coords.values())
    r, c = p
    return any(
        all((r + dr * s, c + dc * s) not in pts for s in range(1, 64)) for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0))
    )


# -- directed-grid lower bound -----------------------------------------------


@pytest.mark.parametrize("k", [8, 16, 24])
def test_lb_grid_structure(k):
    g = gen_lb_grid(k)
    r = k // 4
    assert is_acyclic(g)
    assert g.k == 4 * r - 4
    rep = verify_lb_grid(g)
    assert rep.ok and rep.intersections >= rep.required


def test_lb_grid_reachability_pattern():
    g = gen_lb_grid(16)
    lab = lb_grid_labels(g)
    reach = terminal_reach_matrix(g)
    for j, x in enumerate(lab["x"]):
        for i, y in enumerate(lab["y"]):
            assert reach[(x, y)] == (i >= j)


@pytest.mark.parametrize("k", [3, 6, 10])
def test_lb_grid_rejects_bad_k(k):
    with pytest.raises(GraphError):
        gen_lb_grid(k)


@pytest.mark.parametrize("k", [8, 16])
def test_sparsifier_output_satisfies_claims(k):
    g = gen_lb_grid(k)
    h, trace = minor_sparsify(g)
    rep = verify_lb_grid(g, h, trace)
    assert rep.ok
    assert rep.nonterminals >= (k // 4 - 1) ** 2


def test_shared_horizontal_vertex_is_reported():
    g = gen_lb_grid(16)
    lab = lb_grid_labels(g)
    h = g.thaw()
    # route the second horizontal path into the first one's row
    x0, x1 = lab["x"][0], lab["x"][1]
    (n0,) = g.successors(x0)
    (n1,) = g.successors(x1)
    h.add_edge(x1, n0)
    h.remove_edge(g.edges_between(x1, n1)[0])
    rep = verify_lb_grid(g, h.freeze())
    assert not rep.ok and rep.problems


# -- Steiner triple systems and detouring cycles -----------------------------


@pytest.mark.parametrize("k,triples", [(7, 7), (9, 12), (13, 26), (15, 35)])
def test_sts_sizes(k, triples):
    assert len(gen_sts(k).triples) == triples


@pytest.mark.parametrize("k", [v for v in range(7, 34) if v % 6 in (1, 3)])
def test_every_pair_covered_once(k):
    sts = gen_sts(k)
    count = {p: 0 for p in itertools.combinations(range(k), 2)}
    for tri in sts.triples:
        for p in itertools.combinations(sorted(tri), 2):
            count[p] += 1
    assert set(count.values()) == {1}


@pytest.mark.parametrize("k", [8, 11, 12])
def test_sts_rejects_bad_residue(k):
    with pytest.raises(GraphError):
        gen_sts(k)


def test_detouring_graph_labels():
    sts = gen_sts(7)
    dg = detouring_graph(sts.triples)
    for (a, b), label in dg.items():
        assert set(sts.triples[a]) & set(sts.triples[b]) == {label}


def test_single_triple_has_no_cycle():
    assert detouring_cycles(gen_sts(9).triples, 3, indices=[0]) == []


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("k,t", [(9, 3), (13, 3), (15, 4)])
def test_detouring_subset_has_no_short_cycles(seed, k, t):
    sts = gen_sts(k)
    sub = detouring_subset(sts, t, seed=seed)
    assert sub and detouring_cycles(sts.triples, t, indices=sub) == []


# -- incompressibility family ------------------------------------------------


def test_family_counts():
    g, s_prime = gen_incompressibility_family(9, 3, seed=0)
    assert g.n == 9 + len(s_prime) and g.m == 3 * len(s_prime)
    g0, _ = gen_incompressibility_family(9, 3, R=[], seed=0, subset=s_prime)
    assert g0.m == 2 * len(s_prime)
    assert all(g0.degree(9 + i) == 2 for i in range(len(s_prime)))


def test_r_outside_subset_is_rejected():
    _, s_prime = gen_incompressibility_family(9, 3, seed=0)
    outside = next(i for i in range(12) if i not in s_prime)
    with pytest.raises(GraphError):
        gen_incompressibility_family(9, 3, R=[outside], seed=0, subset=s_prime)


@pytest.mark.parametrize("seed", range(10))
def test_claims_hold(seed):
    rng = random.Random(seed)
    _, s_prime = gen_incompressibility_family(9, 3, seed=0)
    R = [i for i in s_prime if rng.random() < 0.5]
    g, _ = gen_incompressibility_family(9, 3, R=R, subset=s_prime)
    rep = verify_incompressibility_claims(g, 9, s_prime, R, 3)
    assert rep.ok
    assert all(d == 2 for d in rep.covered.values())
    assert all(d >= 6 for d in rep.uncovered_respecting.values())


def test_distinct_subsets_are_distinguished():
    _, s_prime = gen_incompressibility_family(9, 3, seed=0)
    g1, _ = gen_incompressibility_family(9, 3, R=s_prime[:1], subset=s_prime)
    g2, _ = gen_incompressibility_family(9, 3, R=s_prime[:2], subset=s_prime) if len(s_prime) > 1 else (g1, None)
    if len(s_prime) > 1:
        assert distinguishing_pair(9, g1, g2) is not None
    assert distinguishing_pair(9, g1, g1) is None
