"""Reachability-preserving minors of directed graphs.

Three constructions share one contraction engine:

* :func:`minor_sparsify_dag` keeps the union of tie-broken shortest paths
  between the requested pairs and contracts every non-terminal of in-degree
  one (at most |P|(|P|−1)/2 branching events survive).
* :func:`minor_sparsify` handles cyclic inputs by shrinking strongly
  connected components first.
* :func:`minor_sparsify_dag2` starts from a sparsest reachability preserver
  found by exhaustive search (at most k·|P| branching events).

Every result comes with a :class:`~artifact.graph_core.MinorTrace`.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from math import comb
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .graph_core import (
    GraphError,
    MinorRecorder,
    MinorTrace,
    PairSet,
    TerminalGraph,
    trivial_pair_set,
    validate_pair_set,
)

__all__ = [
    "SCCDecomposition",
    "TieBreaker",
    "consistent_tie_break",
    "count_branching_events",
    "minor_sparsify",
    "minor_sparsify_dag",
    "minor_sparsify_dag2",
    "result_record",
    "scc_decompose",
    "shortest_path_union",
    "sparsest_reachability_preserver",
]

DEFAULT_EDGE_GUARD = 25


# ---------------------------------------------------------------------------
# tie-breaking


class TieBreaker:
    """Deterministic unique shortest paths under unit lengths.

    A BFS from each queried source records, for every reached vertex, the
    smallest-id in-neighbour one layer closer to the source; π(s, t) follows
    these predecessors back from t.  If x, x′ lie on π(y, y′) then every
    candidate predecessor in the BFS from x is also a candidate in the BFS from
    y, so both searches pick the same one and π(x, x′) is a subpath of
    π(y, y′).
    """

    def __init__(self, succ: Dict[int, List[int]]) -> None:
        self._succ = succ
        self._pred: Dict[int, List[int]] = {v: [] for v in succ}
        for u, vs in succ.items():
            for v in vs:
                self._pred[v].append(u)
        for v in self._pred:
            self._pred[v].sort()
        self._cache: Dict[int, Tuple[Dict[int, int], Dict[int, int]]] = {}

    def _search(self, s: int) -> Tuple[Dict[int, int], Dict[int, int]]:
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        dist = {s: 0}
        order = [s]
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in self._succ[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    order.append(y)
                    queue.append(y)
        pred: Dict[int, int] = {}
        for v in order[1:]:
            d = dist[v] - 1
            pred[v] = next(u for u in self._pred[v] if dist.get(u) == d)
        self._cache[s] = (dist, pred)
        return dist, pred

    def distance(self, s: int, t: int) -> Optional[int]:
        return self._search(s)[0].get(t)

    def path(self, s: int, t: int) -> Optional[List[int]]:
        """Vertex sequence of π(s, t), or ``None`` if t is unreachable."""
        dist, pred = self._search(s)
        if t not in dist:
            return None
        out = [t]
        while out[-1] != s:
            out.append(pred[out[-1]])
        return out[::-1]


def consistent_tie_break(g: TerminalGraph) -> TieBreaker:
    if not g.directed:
        raise GraphError("tie-breaking is defined here for directed graphs")
    return TieBreaker(g.successor_map())


# ---------------------------------------------------------------------------
# strongly connected components


@dataclass(frozen=True)
class SCCDecomposition:
    """Components in reverse topological order (sinks first) plus the condensation."""

    components: Tuple[Tuple[int, ...], ...]
    comp_of: Dict[int, int]
    dag: Dict[int, FrozenSet[int]]

    def __len__(self) -> int:
        return len(self.components)


def scc_decompose(g: TerminalGraph) -> SCCDecomposition:
    """Iterative Tarjan; roots and successors are visited in ascending id order."""
    succ = g.successor_map()
    index: Dict[int, int] = {}
    low: Dict[int, int] = {}
    on_stack: Set[int] = set()
    stack: List[int] = []
    comps: List[Tuple[int, ...]] = []
    counter = 0
    for root in sorted(succ):
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, i = work[-1]
            nbrs = succ[v]
            if i < len(nbrs):
                work[-1] = (v, i + 1)
                w = nbrs[i]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(tuple(sorted(comp)))
    comp_of = {v: i for i, c in enumerate(comps) for v in c}
    dag: Dict[int, Set[int]] = {i: set() for i in range(len(comps))}
    for v, ws in succ.items():
        for w in ws:
            if comp_of[v] != comp_of[w]:
                dag[comp_of[v]].add(comp_of[w])
    return SCCDecomposition(tuple(comps), comp_of, {i: frozenset(s) for i, s in dag.items()})


# ---------------------------------------------------------------------------
# branching events


def count_branching_events(g: TerminalGraph) -> int:
    """Σ_v C(indeg(v), 2)."""
    if not g.directed:
        raise GraphError("branching events are defined for directed graphs")
    return sum(comb(g.in_degree(v), 2) for v in g.vertices)


def branching_events(g: TerminalGraph) -> List[Tuple[int, int]]:
    """Explicit list of edge-id pairs sharing a head (independent counter)."""
    out = []
    ids = g.edge_ids()
    for a, b in itertools.combinations(ids, 2):
        if g.edge(a).head == g.edge(b).head:
            out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# shared engine over a quotient view


def _is_acyclic(succ: Dict[int, List[int]]) -> bool:
    indeg = {v: 0 for v in succ}
    for vs in succ.values():
        for w in vs:
            indeg[w] += 1
    queue = deque(v for v, d in indeg.items() if d == 0)
    seen = 0
    while queue:
        x = queue.popleft()
        seen += 1
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                queue.append(y)
    return seen == len(succ)


class _QuotientEngine:
    """Minor construction on a graph whose terminal blocks act as single nodes.

    ``node_of`` maps each real vertex to its node id in the quotient DAG.
    Terminal blocks (several terminals sharing one node) stay expanded in the
    real graph; every other node is a single real vertex.  Between two
    distinct nodes at most one real edge is kept.
    """

    def __init__(self, rec: MinorRecorder, node_of: Dict[int, int]) -> None:
        self.rec = rec
        self.node_of = dict(node_of)

    @property
    def g(self) -> TerminalGraph:
        return self.rec.graph

    def node(self, v: int) -> int:
        return self.node_of[v]

    def dedupe(self) -> None:
        """Drop real edges inside a block and keep one edge per node pair."""
        seen: Set[Tuple[int, int]] = set()
        for eid, e in list(self.g.edges()):
            a, b = self.node(e.tail), self.node(e.head)
            if a == b:
                continue
            if (a, b) in seen:
                self.rec.delete_edge(eid)
            else:
                seen.add((a, b))

    def quotient_succ(self) -> Tuple[Dict[int, List[int]], Dict[Tuple[int, int], int]]:
        succ: Dict[int, Set[int]] = {self.node(v): set() for v in self.g.vertices}
        rep: Dict[Tuple[int, int], int] = {}
        for eid, e in self.g.edges():
            a, b = self.node(e.tail), self.node(e.head)
            if a != b:
                succ[a].add(b)
                rep.setdefault((a, b), eid)
        return {v: sorted(s) for v, s in succ.items()}, rep

    def keep_only(self, keep_edges: Set[int], keep_nodes: Set[int]) -> None:
        """Delete every cross-node edge not in ``keep_edges`` and nodes outside ``keep_nodes``."""
        for eid, e in list(self.g.edges()):
            if self.node(e.tail) != self.node(e.head) and eid not in keep_edges:
                self.rec.delete_edge(eid)
        for v in list(self.g.vertices):
            if not self.g.is_terminal(v) and self.node(v) not in keep_nodes:
                self.rec.delete_vertex(v)
                del self.node_of[v]

    def _in_edges_cross(self, v: int) -> List[int]:
        return [eid for eid in self.g.in_edges(v) if self.node(self.g.edge(eid).tail) != self.node(v)]

    def contract_indegree_one(self) -> None:
        """Contract (u, v) while some non-terminal v has quotient in-degree 1 (ascending ids)."""
        changed = True
        while changed:
            changed = False
            for v in sorted(self.g.vertices):
                if not self.g.has_vertex(v) or self.g.is_terminal(v):
                    continue
                ins = self._in_edges_cross(v)
                if len(ins) != 1:
                    continue
                eid = ins[0]
                u = self.g.edge(eid).tail
                node_u = self.node(u)
                survivor = self.rec.contract(eid)
                absorbed = v if survivor == u else u
                # the merged vertex belongs to u's node (v was a singleton node)
                self.node_of[survivor] = node_u
                self.node_of.pop(absorbed, None)
                self.dedupe()
                changed = True

    def remove_isolated_nonterminals(self) -> None:
        for v in list(self.g.vertices):
            if not self.g.is_terminal(v) and self.g.degree(v) == 0:
                self.rec.delete_vertex(v)
                del self.node_of[v]


def shortest_path_union(g: TerminalGraph, pairs: Iterable[Tuple[int, int]], tb: Optional[TieBreaker] = None) -> Set[Tuple[int, int]]:
    """Edges (as vertex pairs) of π(P) in ``g``."""
    tb = tb or consistent_tie_break(g)
    out: Set[Tuple[int, int]] = set()
    for s, t in sorted(pairs):
        p = tb.path(s, t)
        if p is not None:
            out.update(zip(p, p[1:]))
    return out


def _run_dag_engine(eng: _QuotientEngine, pairs: PairSet) -> None:
    succ, rep = eng.quotient_succ()
    if not _is_acyclic(succ):
        raise GraphError("input contains a directed cycle")
    tb = TieBreaker(succ)
    union: Set[Tuple[int, int]] = set()
    nodes: Set[int] = set()
    for s, t in sorted(pairs):
        p = tb.path(s, t)
        if p is None:
            continue
        union.update(zip(p, p[1:]))
        nodes.update(p)
    eng.keep_only({rep[e] for e in union}, nodes)
    eng.contract_indegree_one()


# ---------------------------------------------------------------------------
# public constructions


def _prepare(g: TerminalGraph, P: Optional[Iterable[Tuple[int, int]]]) -> PairSet:
    if not g.directed:
        raise GraphError("reachability minors need a directed graph")
    return trivial_pair_set(g.terminals) if P is None else validate_pair_set(g, P)


def minor_sparsify_dag(g: TerminalGraph, P: Optional[Iterable[Tuple[int, int]]] = None) -> Tuple[TerminalGraph, MinorTrace]:
    """Shortest-path union followed by in-degree-one contractions (acyclic input)."""
    pairs = _prepare(g, P)
    rec = MinorRecorder(g)
    rec.dedupe_parallel()
    eng = _QuotientEngine(rec, {v: v for v in g.vertices})
    _run_dag_engine(eng, pairs)
    return rec.finish()


def minor_sparsify(g: TerminalGraph, P: Optional[Iterable[Tuple[int, int]]] = None) -> Tuple[TerminalGraph, MinorTrace]:
    """Reachability-preserving minor of an arbitrary digraph w.r.t. ``P`` (default: all pairs)."""
    pairs = _prepare(g, P)
    dec = scc_decompose(g)
    rec = MinorRecorder(g)
    rec.dedupe_parallel()
    f: Dict[int, int] = {}
    terminal_comps: List[Tuple[int, ...]] = []
    plain_comps: List[Tuple[int, ...]] = []
    for comp in dec.components:
        ts = [v for v in comp if g.is_terminal(v)]
        label = min(ts) if ts else min(comp)
        for v in comp:
            f[v] = label
        (terminal_comps if ts else plain_comps).append(comp)

    wg = rec.graph
    # shrink terminal components onto their terminals
    for comp in terminal_comps:
        members = set(comp)
        while True:
            nts = sorted(v for v in members if not wg.is_terminal(v))
            if not nts:
                break
            v = nts[0]
            cands = [(wg.edge(e).head, e) for e in wg.out_edges(v) if wg.edge(e).head in members]
            _, eid = min(cands)
            rec.contract(eid)
            members = {x for x in members if wg.has_vertex(x)}
    # collapse non-terminal components to a single vertex (the minimum id)
    for comp in plain_comps:
        members = set(comp)
        while len(members) > 1:
            eid = min(
                e for x in sorted(members) for e in wg.out_edges(x) if wg.edge(e).head in members
            )
            rec.contract(eid)
            members = {x for x in members if wg.has_vertex(x)}
    rec.dedupe_parallel()
    node_of = {v: f[v] for v in wg.vertices}
    eng = _QuotientEngine(rec, node_of)
    eng.dedupe()
    qpairs = frozenset((f[s], f[t]) for s, t in pairs if f[s] != f[t])
    _run_dag_engine(eng, qpairs)
    return rec.finish()


def _relevant_edges(g: TerminalGraph, pairs: PairSet) -> List[int]:
    succ = g.successor_map()
    pred = g.predecessor_map()

    def closure(start: int, adj: Dict[int, List[int]]) -> Set[int]:
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return seen

    fwd = {s: closure(s, succ) for s in {s for s, _ in pairs}}
    bwd = {t: closure(t, pred) for t in {t for _, t in pairs}}
    rel = set()
    for s, t in pairs:
        if t not in fwd[s]:
            continue
        for eid, e in g.edges():
            if e.tail in fwd[s] and e.head in bwd[t]:
                rel.add(eid)
    return sorted(rel)


def sparsest_reachability_preserver(
    g: TerminalGraph,
    P: Optional[Iterable[Tuple[int, int]]] = None,
    guard: int = DEFAULT_EDGE_GUARD,
) -> List[int]:
    """Minimum edge set preserving reachability of every pair in ``P`` (exhaustive search).

    Only edges on some s→t path of a requested pair are candidates; more than
    ``guard`` of them is rejected.  Among minimum solutions the one with the
    lexicographically smallest sorted edge-id sequence is returned.
    """
    pairs = _prepare(g, P)
    if not _is_acyclic(g.successor_map()):
        raise GraphError("input contains a directed cycle")
    rel = _relevant_edges(g, pairs)
    if len(rel) > guard:
        raise GraphError(f"{len(rel)} relevant edges exceed the exhaustive-search guard {guard}")
    vs = g.vertices
    idx = {v: i for i, v in enumerate(vs)}
    topo = _topo_order(g)
    topo_idx = [idx[v] for v in topo]
    wanted = [(idx[s], idx[t]) for s, t in sorted(pairs)]
    ends = {eid: (idx[g.edge(eid).tail], idx[g.edge(eid).head]) for eid in rel}
    targets = {}
    for s, t in wanted:
        targets[s] = targets.get(s, 0) | (1 << t)
    reach_needed = {}
    full_reach = _reach_bits(len(vs), topo_idx, [ends[e] for e in rel])
    for s, tmask in targets.items():
        reach_needed[s] = tmask & full_reach[s]

    def ok(edge_ids: Sequence[int]) -> bool:
        rb = _reach_bits(len(vs), topo_idx, [ends[e] for e in edge_ids])
        return all(rb[s] & need == need for s, need in reach_needed.items())

    mandatory = [e for e in rel if not ok([x for x in rel if x != e])]
    optional = [e for e in rel if e not in mandatory]
    for r in range(len(optional) + 1):
        for combo in itertools.combinations(optional, r):
            chosen = sorted(mandatory + list(combo))
            if ok(chosen):
                return chosen
    raise AssertionError("unreachable: the full relevant set preserves reachability")


def _topo_order(g: TerminalGraph) -> List[int]:
    indeg = {v: 0 for v in g.vertices}
    succ = g.successor_map()
    for v in succ:
        for w in succ[v]:
            indeg[w] += 1
    ready = sorted(v for v, d in indeg.items() if d == 0)
    out = []
    queue = deque(ready)
    while queue:
        x = queue.popleft()
        out.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                queue.append(y)
    return out


def _reach_bits(n: int, topo: Sequence[int], edges: Sequence[Tuple[int, int]]) -> List[int]:
    adj: List[List[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
    rb = [1 << i for i in range(n)]
    for v in reversed(topo):
        for w in adj[v]:
            rb[v] |= rb[w]
    return rb


def minor_sparsify_dag2(
    g: TerminalGraph,
    P: Optional[Iterable[Tuple[int, int]]] = None,
    guard: int = DEFAULT_EDGE_GUARD,
) -> Tuple[TerminalGraph, MinorTrace]:
    """Sparsest preserver, drop isolated non-terminals, contract in-degree-one vertices."""
    pairs = _prepare(g, P)
    keep = set(sparsest_reachability_preserver(g, pairs, guard=guard))
    rec = MinorRecorder(g)
    for eid in g.edge_ids():
        if eid not in keep:
            rec.delete_edge(eid)
    eng = _QuotientEngine(rec, {v: v for v in g.vertices})
    eng.remove_isolated_nonterminals()
    eng.contract_indegree_one()
    return rec.finish()


def result_record(h: TerminalGraph, trace: MinorTrace, pairs: Iterable[Tuple[int, int]]) -> Dict[str, int]:
    """JSON-ready summary ``{pairs, nonterminals, branching_events, trace_len}``."""
    return {
        "pairs": len(list(pairs)),
        "nonterminals": h.n - h.k,
        "branching_events": count_branching_events(h),
        "trace_len": len(trace),
    }


def result_json(h: TerminalGraph, trace: MinorTrace, pairs: Iterable[Tuple[int, int]]) -> str:
    return json.dumps(result_record(h, trace, pairs), sort_keys=True)
