"""Brute-force ground truth for reachability, cuts, distances and sparsest cuts.

These routines are deliberately simple and exact: rational max-flow by
shortest augmenting paths, exhaustive enumeration for the cross-checks, and a
numpy bitmask sweep for sparsest cuts (exact rationals re-checked at the end).
"""

from __future__ import annotations

import itertools
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .graph_core import GraphError, TerminalGraph

__all__ = [
    "INF",
    "Demand",
    "EquivalenceReport",
    "all_pairs_reach_closure",
    "bipartitions",
    "distance_bruteforce",
    "equivalence_report",
    "max_flow",
    "random_demand",
    "sparsest_cut_bruteforce",
    "sparsest_cut_via_terminal_cuts",
    "terminal_distance_matrix",
    "terminal_mincut",
    "terminal_mincut_exhaustive",
    "terminal_mincut_table",
    "terminal_reach_matrix",
    "terminal_reach_matrix_closure",
]


class _Infinity:
    """Dedicated marker for unreachable distances (compares above every number)."""

    _inst: Optional["_Infinity"] = None

    def __new__(cls) -> "_Infinity":
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "INF"

    __str__ = __repr__

    def __lt__(self, other: object) -> bool:
        return False

    def __le__(self, other: object) -> bool:
        return other is self

    def __gt__(self, other: object) -> bool:
        return other is not self

    def __ge__(self, other: object) -> bool:
        return True

    def __reduce__(self):  # keep the singleton through pickling
        return (_Infinity, ())


INF = _Infinity()

Demand = Dict[Tuple[int, int], Fraction]


# ---------------------------------------------------------------------------
# reachability


def _reach_from(succ: Mapping[int, Sequence[int]], s: int) -> set:
    seen = {s}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        for y in succ[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def terminal_reach_matrix(g: TerminalGraph, terminals: Optional[Iterable[int]] = None) -> Dict[Tuple[int, int], bool]:
    """``{(x, y): reachable}`` for ordered distinct terminal pairs, one BFS per terminal."""
    ts = sorted(g.terminals if terminals is None else terminals)
    succ = g.successor_map()
    out: Dict[Tuple[int, int], bool] = {}
    for s in ts:
        seen = _reach_from(succ, s)
        for t in ts:
            if t != s:
                out[(s, t)] = t in seen
    return out


def all_pairs_reach_closure(g: TerminalGraph) -> Tuple[List[int], np.ndarray]:
    """Warshall transitive closure (reflexive) as a boolean matrix over sorted vertices."""
    vs = g.vertices
    index = {v: i for i, v in enumerate(vs)}
    n = len(vs)
    R = np.eye(n, dtype=bool)
    for _, e in g.edges():
        R[index[e.tail], index[e.head]] = True
        if not g.directed:
            R[index[e.head], index[e.tail]] = True
    for k in range(n):
        R |= np.outer(R[:, k], R[k, :])
    return vs, R


def terminal_reach_matrix_closure(g: TerminalGraph, terminals: Optional[Iterable[int]] = None) -> Dict[Tuple[int, int], bool]:
    """Same result as :func:`terminal_reach_matrix` via the Warshall closure."""
    ts = sorted(g.terminals if terminals is None else terminals)
    vs, R = all_pairs_reach_closure(g)
    index = {v: i for i, v in enumerate(vs)}
    return {(s, t): bool(R[index[s], index[t]]) for s in ts for t in ts if s != t}


# ---------------------------------------------------------------------------
# max-flow / min-cut


def max_flow(
    n_nodes: int,
    arcs: Sequence[Tuple[int, int, Optional[Fraction]]],
    source: int,
    sink: int,
) -> Tuple[Fraction, FrozenSet[int]]:
    """Exact max-flow by shortest augmenting paths.

    ``arcs`` are ``(u, v, capacity)`` with ``None`` meaning unbounded.
    Returns the flow value and the source side of a minimum cut.
    """
    head: List[int] = []
    cap: List[Optional[Fraction]] = []
    adj: List[List[int]] = [[] for _ in range(n_nodes)]
    for u, v, c in arcs:
        adj[u].append(len(head))
        head.append(v)
        cap.append(None if c is None else Fraction(c))
        adj[v].append(len(head))
        head.append(u)
        cap.append(Fraction(0))
    total = Fraction(0)
    while True:
        parent = [-1] * n_nodes
        parent[source] = -2
        queue = deque([source])
        while queue and parent[sink] == -1:
            x = queue.popleft()
            for a in adj[x]:
                c = cap[a]
                y = head[a]
                if parent[y] == -1 and (c is None or c > 0):
                    parent[y] = a
                    queue.append(y)
        if parent[sink] == -1:
            break
        bottleneck: Optional[Fraction] = None
        y = sink
        while y != source:
            a = parent[y]
            c = cap[a]
            if c is not None and (bottleneck is None or c < bottleneck):
                bottleneck = c
            y = head[a ^ 1]
        if bottleneck is None:
            raise GraphError("unbounded flow: path of infinite-capacity arcs")
        y = sink
        while y != source:
            a = parent[y]
            if cap[a] is not None:
                cap[a] -= bottleneck  # type: ignore[operator]
            if cap[a ^ 1] is not None:
                cap[a ^ 1] += bottleneck  # type: ignore[operator]
            y = head[a ^ 1]
        total += bottleneck
    side = frozenset(i for i, p in enumerate(parent) if p != -1)
    return total, side


def _check_side(g: TerminalGraph, S: Iterable[int], terminals: Optional[Iterable[int]] = None) -> Tuple[FrozenSet[int], FrozenSet[int]]:
    S = frozenset(S)
    K = g.terminals if terminals is None else frozenset(terminals)
    if not S or not S <= K or S == K:
        raise GraphError("S must be a non-empty proper subset of the terminals")
    return S, K - S


def terminal_mincut(g: TerminalGraph, S: Iterable[int], terminals: Optional[Iterable[int]] = None) -> Fraction:
    """mincut(S, K∖S) via super-source/super-sink exact max-flow.

    ``terminals`` overrides K (other terminal flags are then ignored).
    """
    S, T = _check_side(g, S, terminals)
    vs = g.vertices
    index = {v: i for i, v in enumerate(vs)}
    src, snk = len(vs), len(vs) + 1
    arcs: List[Tuple[int, int, Optional[Fraction]]] = []
    for _, e in g.edges():
        arcs.append((index[e.tail], index[e.head], e.weight))
        if not g.directed:
            arcs.append((index[e.head], index[e.tail], e.weight))
    for s in S:
        arcs.append((src, index[s], None))
    for t in T:
        arcs.append((index[t], snk, None))
    value, _ = max_flow(len(vs) + 2, arcs, src, snk)
    return value


def terminal_mincut_exhaustive(g: TerminalGraph, S: Iterable[int]) -> Fraction:
    """Minimum over all placements of the non-terminals (2^(n−k) cuts)."""
    S, T = _check_side(g, S)
    free = g.nonterminals()
    edges = [e for _, e in g.edges()]
    best: Optional[Fraction] = None
    for bits in itertools.product((False, True), repeat=len(free)):
        side = set(S) | {v for v, b in zip(free, bits) if b}
        c = sum((e.weight for e in edges if (e.tail in side) != (e.head in side) and (not g.directed or e.tail in side)), Fraction(0))
        if best is None or c < best:
            best = c
    assert best is not None
    return best


def bipartitions(terminals: Iterable[int]) -> List[FrozenSet[int]]:
    """One side of every unordered bipartition of ``terminals``: the side holding the largest id."""
    ts = sorted(terminals)
    if len(ts) < 2:
        return []
    anchor, rest = ts[-1], ts[:-1]
    out: List[FrozenSet[int]] = []
    for r in range(0, len(rest)):
        for combo in itertools.combinations(rest, r):
            out.append(frozenset((anchor, *combo)))
    return out


def terminal_mincut_table(g: TerminalGraph, terminals: Optional[Iterable[int]] = None, cap: int = 12) -> Dict[FrozenSet[int], Fraction]:
    """All 2^(k−1)−1 terminal min-cut values, keyed by the side holding the largest terminal."""
    ts = sorted(g.terminals if terminals is None else terminals)
    if len(ts) > cap:
        raise GraphError(f"k={len(ts)} exceeds the table cap {cap}")
    return {S: terminal_mincut(g, S, ts) for S in bipartitions(ts)}


# ---------------------------------------------------------------------------
# distances


def _dijkstra(g: TerminalGraph, s: int) -> Dict[int, Fraction]:
    import heapq

    dist: Dict[int, Fraction] = {s: Fraction(0)}
    heap: List[Tuple[Fraction, int]] = [(Fraction(0), s)]
    done = set()
    while heap:
        d, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        for eid in g.out_edges(x):
            e = g.edge(eid)
            y = e.other(x)
            nd = d + e.weight
            if y not in dist or nd < dist[y]:
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    return dist


def terminal_distance_matrix(g: TerminalGraph, terminals: Optional[Iterable[int]] = None) -> Dict[Tuple[int, int], object]:
    """Exact shortest-path distances between ordered terminal pairs; ``INF`` if unreachable."""
    ts = sorted(g.terminals if terminals is None else terminals)
    out: Dict[Tuple[int, int], object] = {}
    for s in ts:
        dist = _dijkstra(g, s)
        for t in ts:
            if t != s:
                out[(s, t)] = dist.get(t, INF)
    return out


def distance_bruteforce(g: TerminalGraph, s: int, t: int) -> object:
    """Shortest s–t length by enumerating all simple paths (tiny graphs only)."""
    best: object = INF
    stack = [(s, Fraction(0), frozenset([s]))]
    while stack:
        x, d, seen = stack.pop()
        if x == t:
            if best is INF or d < best:  # type: ignore[operator]
                best = d
            continue
        for eid in g.out_edges(x):
            e = g.edge(eid)
            y = e.other(x)
            if y not in seen:
                stack.append((y, d + e.weight, seen | {y}))
    return best


# ---------------------------------------------------------------------------
# sparsest cut


def random_demand(terminals: Sequence[int], rng: random.Random, max_value: int = 5) -> Demand:
    """Symmetric random demand on unordered terminal pairs (at least one positive entry)."""
    ts = sorted(terminals)
    d: Demand = {}
    for a, b in itertools.combinations(ts, 2):
        d[(a, b)] = Fraction(rng.randint(0, max_value), rng.randint(1, 3))
    if d and all(v == 0 for v in d.values()):
        d[next(iter(d))] = Fraction(1)
    return d


def _demand_items(d: Mapping[Tuple[int, int], Fraction]) -> List[Tuple[int, int, Fraction]]:
    merged: Dict[Tuple[int, int], Fraction] = {}
    for (a, b), w in d.items():
        if a == b:
            if w != 0:
                raise GraphError("demand must vanish on the diagonal")
            continue
        key = (min(a, b), max(a, b))
        if key in merged and merged[key] != Fraction(w):
            raise GraphError("demand is not symmetric")
        if Fraction(w) < 0:
            raise GraphError("negative demand")
        merged[key] = Fraction(w)
    return [(a, b, w) for (a, b), w in sorted(merged.items()) if w != 0]


def _to_int_scale(values: Sequence[Fraction]) -> Tuple[List[int], int]:
    den = 1
    for v in values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    return [int(v * den) for v in values], den


def _lex_key(U: Iterable[int]) -> Tuple[int, ...]:
    return tuple(sorted(U))


def sparsest_cut_bruteforce(g: TerminalGraph, d: Mapping[Tuple[int, int], Fraction], max_n: int = 20) -> Tuple[Fraction, FrozenSet[int]]:
    """Φ_G(d) = min_U cap(δ(U)) / dem(U) over all vertex subsets with dem(U) > 0.

    Returns the exact ratio and the lexicographically least minimizing U.
    """
    vs = g.vertices
    n = len(vs)
    if n > max_n:
        raise GraphError(f"|V|={n} exceeds the sparsest-cut cap {max_n}")
    index = {v: i for i, v in enumerate(vs)}
    demands = _demand_items(d)
    if not demands:
        raise GraphError("every subset has zero demand")
    edges = [e for _, e in g.edges()]
    caps_i, cden = _to_int_scale([e.weight for e in edges])
    dems_i, dden = _to_int_scale([w for _, _, w in demands])
    big = sum(caps_i) >= 2**62 or sum(dems_i) >= 2**62
    dtype = object if big else np.int64
    masks = np.arange(1 << n, dtype=np.int64)
    cap = np.zeros(1 << n, dtype=dtype)
    for e, c in zip(edges, caps_i):
        cut = ((masks >> index[e.tail]) ^ (masks >> index[e.head])) & 1
        cap = cap + cut.astype(dtype) * c
    dem = np.zeros(1 << n, dtype=dtype)
    for (a, b, _), w in zip(demands, dems_i):
        cut = ((masks >> index[a]) ^ (masks >> index[b])) & 1
        dem = dem + cut.astype(dtype) * w
    valid = np.nonzero(dem > 0)[0]
    if len(valid) == 0:
        raise GraphError("every subset has zero demand")
    ratio = cap[valid].astype(float) / dem[valid].astype(float)
    lo = ratio.min()
    cand = valid[ratio <= lo * (1 + 1e-9) + 1e-12]
    best: Optional[Fraction] = None
    witnesses: List[Tuple[int, ...]] = []
    for mask in cand.tolist():
        r = Fraction(int(cap[mask]), int(dem[mask]))
        U = _lex_key(vs[i] for i in range(n) if mask >> i & 1)
        if best is None or r < best:
            best, witnesses = r, [U]
        elif r == best:
            witnesses.append(U)
    assert best is not None
    return best * Fraction(dden, cden), frozenset(min(witnesses))


def sparsest_cut_via_terminal_cuts(g: TerminalGraph, d: Mapping[Tuple[int, int], Fraction]) -> Tuple[Fraction, FrozenSet[int]]:
    """Φ_G(d) as min over terminal bipartitions of mincut(S, K∖S) / dem(S).

    dem(U) only depends on U ∩ K and the cheapest U with a given trace on K is
    a terminal min cut, so this equals the brute-force value on any graph.
    The witness returned is the terminal side S.
    """
    demands = _demand_items(d)
    if not demands:
        raise GraphError("every subset has zero demand")
    best: Optional[Fraction] = None
    arg: FrozenSet[int] = frozenset()
    for S in sorted(bipartitions(g.terminals), key=_lex_key):
        dem = sum((w for a, b, w in demands if (a in S) != (b in S)), Fraction(0))
        if dem == 0:
            continue
        r = terminal_mincut(g, S) / dem
        if best is None or r < best:
            best, arg = r, S
    if best is None:
        raise GraphError("every subset has zero demand")
    return best, arg


# ---------------------------------------------------------------------------
# equivalence report


@dataclass
class EquivalenceReport:
    mode: str
    ok: bool
    checked: int
    mismatches: List[Dict[str, object]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"mode": self.mode, "ok": self.ok, "checked": self.checked, "mismatches": self.mismatches},
            sort_keys=True,
            default=str,
        )


def _fmt(x: object) -> object:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, frozenset):
        return sorted(x)
    return x if isinstance(x, (bool, int)) else str(x)


def equivalence_report(
    g: TerminalGraph,
    h: TerminalGraph,
    mode: str,
    *,
    demands: Optional[Sequence[Mapping[Tuple[int, int], Fraction]]] = None,
    seed: int = 0,
    n_demands: int = 5,
    cap: int = 12,
) -> EquivalenceReport:
    """Compare ``g`` and ``h`` on their common terminals for the given mode."""
    if g.terminals != h.terminals:
        raise GraphError("terminal labels differ between the two graphs")
    mismatches: List[Dict[str, object]] = []
    if mode in ("reach", "reach-planar"):
        a, b = terminal_reach_matrix(g), terminal_reach_matrix(h)
        for key in sorted(a):
            if a[key] != b[key]:
                mismatches.append({"pair": list(key), "input": a[key], "output": b[key]})
        checked = len(a)
    elif mode == "cut":
        a2, b2 = terminal_mincut_table(g, cap=cap), terminal_mincut_table(h, cap=cap)
        for S in sorted(a2, key=_lex_key):
            if a2[S] != b2[S]:
                mismatches.append({"side": sorted(S), "input": _fmt(a2[S]), "output": _fmt(b2[S])})
        checked = len(a2)
    elif mode == "distance":
        a3, b3 = terminal_distance_matrix(g), terminal_distance_matrix(h)
        for key in sorted(a3):
            if a3[key] != b3[key]:
                mismatches.append({"pair": list(key), "input": _fmt(a3[key]), "output": _fmt(b3[key])})
        checked = len(a3)
    elif mode == "flow":
        if demands is None:
            rng = random.Random(seed)
            demands = [random_demand(g.terminal_list(), rng) for _ in range(n_demands)]
        for i, d in enumerate(demands):
            pg, _ = sparsest_cut(g, d)
            ph, _ = sparsest_cut(h, d)
            if pg != ph:
                mismatches.append({"demand": i, "input": _fmt(pg), "output": _fmt(ph)})
        checked = len(demands)
    else:
        raise GraphError(f"unknown mode {mode!r}")
    return EquivalenceReport(mode, not mismatches, checked, mismatches)


def sparsest_cut(g: TerminalGraph, d: Mapping[Tuple[int, int], Fraction], brute_cap: int = 16) -> Tuple[Fraction, FrozenSet[int]]:
    """Brute force when |V| is small enough, otherwise the terminal-cut formula."""
    if g.n <= brute_cap:
        return sparsest_cut_bruteforce(g, d)
    return sparsest_cut_via_terminal_cuts(g, d)
