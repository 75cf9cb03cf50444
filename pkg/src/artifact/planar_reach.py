"""Reachability-preserving minors for planar digraphs via path separators.

Pipeline: shrink the input with :func:`~artifact.reach_minor.minor_sparsify`,
split it into layered members in which every dipath of the graph lives
entirely inside one member, recursively separate every member by a few
dipaths and replace the full terminal pair set by connections to and along
those dipaths, then build the minor for the reduced pair set.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .graph_core import (
    GraphError,
    MinorOp,
    MinorTrace,
    PairSet,
    TerminalGraph,
    replay_trace,
    trivial_pair_set,
    undirected_components,
)
from .reach_minor import TieBreaker, minor_sparsify

__all__ = [
    "Decomposition",
    "PathSeparator",
    "PlanarReport",
    "SeparatorError",
    "is_planar",
    "path_separator",
    "reach_endpoints_on_path",
    "reduce_pair_set",
    "sparsify_planar_reach",
    "thorup_decompose",
]

log = logging.getLogger(__name__)


class SeparatorError(GraphError):
    """No balanced separator with the allowed number of dipaths was found."""


def is_planar(g: TerminalGraph) -> bool:
    G = nx.Graph()
    G.add_nodes_from(g.vertices)
    G.add_edges_from((e.tail, e.head) for _, e in g.edges())
    ok, _ = nx.check_planarity(G)
    return bool(ok)


# ---------------------------------------------------------------------------
# layered decomposition


@dataclass
class Decomposition:
    """Members G_0..G_b (induced subgraphs keeping the ids of the host graph)."""

    members: List[TerminalGraph]
    layers: List[List[int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)


def _closure(start: Iterable[int], adj: Dict[int, List[int]], allowed: Set[int]) -> Set[int]:
    seen = set(start)
    queue = deque(seen)
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y in allowed and y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def thorup_decompose(g: TerminalGraph, check_planar: bool = True) -> Decomposition:
    """Alternating reachability layers per weakly connected component.

    L_0 is everything reachable from the component's smallest vertex; then
    layers alternate between "reaches the vertices seen so far" and "is
    reachable from them".  Every dipath lies inside two consecutive layers,
    so the members induced on L_i ∪ L_{i+1} contain every dipath, and every
    vertex and edge lies in at most two members.
    """
    if not g.directed:
        raise GraphError("decomposition expects a directed graph")
    if check_planar and not is_planar(g):
        raise GraphError("input graph is not planar")
    succ, pred = g.successor_map(), g.predecessor_map()
    members: List[TerminalGraph] = []
    all_layers: List[List[int]] = []
    for comp in undirected_components(g.undirected_adjacency()):
        allowed = set(comp)
        root = comp[0]
        layers = [sorted(_closure([root], succ, allowed))]
        seen = set(layers[0])
        backward = True
        stalled = 0
        while len(seen) < len(comp):
            adj = pred if backward else succ
            grown = _closure(seen, adj, allowed)
            new = sorted(grown - seen)
            backward = not backward
            if not new:
                stalled += 1
                if stalled > 1:
                    raise AssertionError("layering stalled on a weakly connected component")
                continue
            stalled = 0
            layers.append(new)
            seen |= set(new)
        all_layers.extend(layers)
        if len(layers) == 1:
            members.append(g.subgraph(layers[0]))
        else:
            for a, b in zip(layers, layers[1:]):
                members.append(g.subgraph(a + b))
    return Decomposition(members, all_layers)


# ---------------------------------------------------------------------------
# path separators


@dataclass
class PathSeparator:
    paths: List[List[int]]
    components: List[List[int]]

    @property
    def vertices(self) -> Set[int]:
        return {v for p in self.paths for v in p}


def _components_without(adj: Dict[int, Set[int]], alive: Set[int]) -> List[List[int]]:
    return undirected_components({v: adj[v] for v in alive}, alive)


def path_separator(g: TerminalGraph, r: int = 6, alpha: Fraction = Fraction(1, 2), max_sources: int = 48) -> PathSeparator:
    """Greedy search for ≤ r dipaths whose removal leaves components of size ≤ α|V|.

    Each round looks at the largest remaining component, tries the
    tie-broken shortest dipath from several sources to their farthest
    reachable vertex, and keeps the one minimizing the largest leftover
    component.  Raises :class:`SeparatorError` when r rounds do not suffice.
    """
    if r > 6:
        log.warning("using %d separator paths (more than 6 only affects constants)", r)
    n = g.n
    if n <= 1:
        return PathSeparator([], [])
    adj = g.undirected_adjacency()
    succ = g.successor_map()
    limit = alpha * n
    alive = set(g.vertices)
    paths: List[List[int]] = []
    comps = _components_without(adj, alive)
    while comps and max(len(c) for c in comps) > limit:
        if len(paths) >= r:
            raise SeparatorError(f"no separator with {r} dipaths (largest component {max(map(len, comps))} of {n})")
        big = max(comps, key=lambda c: (len(c), -c[0]))
        bigset = set(big)
        sub = {v: [w for w in succ[v] if w in bigset] for v in big}
        tb = TieBreaker(sub)
        step = max(1, len(big) // max_sources)
        best: Optional[Tuple[int, int, List[int]]] = None
        for s in big[::step]:
            dist, _ = tb._search(s)
            far = max(dist.items(), key=lambda kv: (kv[1], -kv[0]))[0]
            p = tb.path(s, far)
            assert p is not None
            rest = alive - set(p)
            worst = max((len(c) for c in _components_without(adj, rest)), default=0)
            key = (worst, len(p), p)
            if best is None or key < best:
                best = key
        assert best is not None
        paths.append(best[2])
        alive -= set(best[2])
        comps = _components_without(adj, alive)
    return PathSeparator(paths, comps)


def _check_dipath(g: TerminalGraph, Q: Sequence[int]) -> None:
    if not Q:
        raise GraphError("empty path")
    for v in Q:
        if not g.has_vertex(v):
            raise GraphError(f"path vertex {v} not in graph")
    for a, b in zip(Q, Q[1:]):
        if not g.has_edge(a, b):
            raise GraphError(f"path edge {a}->{b} missing")
    if len(set(Q)) != len(Q):
        raise GraphError("path repeats a vertex")


def reach_endpoints_on_path(g: TerminalGraph, Q: Sequence[int], x: int) -> Tuple[Optional[int], Optional[int]]:
    """(first Q-vertex reachable from x, last Q-vertex reaching x); ``None`` when absent."""
    _check_dipath(g, Q)
    allowed = set(g.vertices)
    fwd = _closure([x], g.successor_map(), allowed)
    bwd = _closure([x], g.predecessor_map(), allowed)
    to = next((q for q in Q if q in fwd), None)
    fr = next((q for q in reversed(Q) if q in bwd), None)
    return to, fr


# ---------------------------------------------------------------------------
# pair-set reduction


def reduce_pair_set(
    g: TerminalGraph,
    terminals: Iterable[int],
    r: int = 6,
) -> Tuple[Set[Tuple[int, int]], List[int]]:
    """Recursive pair-set reduction on one member.

    Returns the pair set and the vertices newly declared terminals (in the
    order they were first declared, without duplicates).  Raises
    :class:`SeparatorError` if some recursive call finds no separator.
    """
    pairs: Set[Tuple[int, int]] = set()
    declared: Dict[int, None] = {}
    base = set(terminals)
    work: List[Tuple[FrozenSet[int], FrozenSet[int]]] = [(frozenset(g.vertices), frozenset(base & set(g.vertices)))]
    while work:
        verts, K = work.pop()
        if len(verts) <= 1 or not K:
            continue
        sub = g.subgraph(verts)
        sep = path_separator(sub, r=r)
        succ, pred = sub.successor_map(), sub.predecessor_map()
        fwd = {x: _closure([x], succ, set(verts)) for x in sorted(K)}
        bwd = {x: _closure([x], pred, set(verts)) for x in sorted(K)}
        for Q in sep.paths:
            on_q = [q for q in Q if q in base or q in declared]
            marked = set(on_q)
            for x in sorted(K):
                to = next((q for q in Q if q in fwd[x]), None)
                fr = next((q for q in reversed(Q) if q in bwd[x]), None)
                if to is not None:
                    marked.add(to)
                    if to != x:
                        pairs.add((x, to))
                if fr is not None:
                    marked.add(fr)
                    if fr != x:
                        pairs.add((fr, x))
            for q in Q:
                if q in marked and q not in base:
                    declared.setdefault(q, None)
            seq = [q for q in Q if q in marked]
            pairs.update(zip(seq, seq[1:]))
        S = sep.vertices
        for comp in sep.components:
            cs = frozenset(comp)
            work.append((cs, frozenset(K & cs)))
        del S
    return pairs, list(declared)


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class PlanarReport:
    members: int = 0
    pairs_total: int = 0
    new_terminals: int = 0
    degraded_members: int = 0
    preprocessed_n: int = 0

    def to_dict(self) -> Dict[str, int]:
        return {
            "members": self.members,
            "pairs_total": self.pairs_total,
            "new_terminals": self.new_terminals,
            "degraded_members": self.degraded_members,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _with_terminals(g: TerminalGraph, extra: Iterable[int]) -> TerminalGraph:
    h = g.thaw()
    for v in extra:
        h.set_terminal(v)
    return h.freeze()


def sparsify_planar_reach(
    g: TerminalGraph,
    r: int = 6,
    check_planar: bool = True,
) -> Tuple[TerminalGraph, MinorTrace, PlanarReport]:
    """Reachability-preserving minor of a planar digraph for all terminal pairs."""
    if not g.directed:
        raise GraphError("expects a directed graph")
    if check_planar and not is_planar(g):
        raise GraphError("input graph is not planar")
    report = PlanarReport()
    g1, tr1 = minor_sparsify(g)
    report.preprocessed_n = g1.n
    dec = thorup_decompose(g1, check_planar=False)
    report.members = len(dec)
    pairs: Set[Tuple[int, int]] = set()
    declared: Dict[int, None] = {}
    for member in dec.members:
        K_i = sorted(member.terminals)
        try:
            p_i, new_i = reduce_pair_set(member, K_i, r=r)
        except SeparatorError as exc:
            log.info("member with %d vertices degraded: %s", member.n, exc)
            report.degraded_members += 1
            p_i, new_i = set(trivial_pair_set(K_i)), []
        pairs |= p_i
        for v in new_i:
            declared.setdefault(v, None)
    report.pairs_total = len(pairs)
    report.new_terminals = len(declared)
    g2 = _with_terminals(g1, declared)
    h2, tr2 = minor_sparsify(g2, pairs)
    # the declared vertices go back to being ordinary vertices
    h3 = h2.thaw()
    for v in declared:
        if h3.has_vertex(v):
            h3.set_terminal(v, False)
    h3.freeze()
    # a final pass over the original terminal pairs can only shrink the result
    h4, tr3 = minor_sparsify(h3)
    trace = MinorTrace(ops=tr1.ops + tr2.ops + tr3.ops)
    _, branches = replay_trace(g, trace)
    trace.branch_sets = branches
    return h4, trace, report
