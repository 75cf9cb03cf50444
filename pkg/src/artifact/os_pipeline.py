"""Exact cut/distance/flow sparsifiers for planar graphs with terminals on one face.

Stages:

1. optional vertex splitting (each high-degree vertex becomes a path joined
   by heavy edges: capacity C+1 in cut mode, length 0 in distance mode);
2. a node embedding into an N×N grid with every terminal on the grid
   boundary (a coordinate fast path, or a visibility-representation layout);
3. the node embedding of the N×N grid into the half-grid of size 4N−3;
4. the half-grid reduction down to the half-grid on the k′ diagonal
   terminals without diagonal edges, by exact local rewrites.

Unused grid elements are padded with capacity 0 (cut) or length D+1, where
D is the total edge length (distance), so they never carry a min cut or a
shortest path.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.algorithms.isomorphism import categorical_multiedge_match, categorical_node_match

from .graph_core import GraphError, TerminalGraph, format_weight, graph_stats, parse_weight
from .wye_delta import ReductionStep, Rewriter, RuleError, greedy_reduce, replay_steps, steps_to_text

__all__ = [
    "EdgeDrop",
    "EmbeddingError",
    "GridGraph",
    "HalfGrid",
    "NodeEmbedding",
    "PipelineLog",
    "StageRecord",
    "build_sparsifier_os",
    "compact_grid",
    "gitler_reduce",
    "grid_to_halfgrid",
    "orthogonal_grid_embed",
    "outer_face_embedding",
    "reduction_source",
    "replay_pipeline",
    "same_weighted_graph",
    "split_vertices",
]

log = logging.getLogger(__name__)

Point = Tuple[int, int]
PIPELINE_MODES = ("cut", "distance", "flow")
_NEEDS = {"cut": "cut", "flow": "cut", "distance": "length"}


class EmbeddingError(GraphError):
    """The requested embedding could not be built."""


def _rule_mode(g: TerminalGraph) -> str:
    if g.mode == "cut":
        return "cut"
    if g.mode == "length":
        return "distance"
    raise GraphError(f"graph mode {g.mode!r} carries no capacities or lengths")


def _total(g: TerminalGraph) -> Fraction:
    return sum((e.weight for _, e in g.edges()), Fraction(0))


def _heavy(g: TerminalGraph) -> Fraction:
    """Weight of an edge that must behave like an identified vertex pair."""
    return _total(g) + 1 if _rule_mode(g) == "cut" else Fraction(0)


def _pad(mode: str, total: Fraction) -> Fraction:
    """Weight of an edge that must never matter."""
    return Fraction(0) if mode == "cut" else total + 1


def _key(p: Point, q: Point) -> Tuple[Point, Point]:
    return (p, q) if p <= q else (q, p)


def _require_simple_undirected(g: TerminalGraph) -> None:
    if g.directed:
        raise GraphError("expects an undirected graph")
    if g.has_parallel_edges():
        raise GraphError("expects a graph without parallel edges")


# ---------------------------------------------------------------------------
# planar embedding with all terminals on one face


def outer_face_embedding(g: TerminalGraph) -> Tuple[nx.PlanarEmbedding, Dict[int, Optional[int]]]:
    """Planar embedding of ``g`` in which every terminal lies on one face.

    Returns the embedding and, for each terminal, the neighbour that
    follows the outer-face angle in clockwise order (``None`` for isolated
    terminals).  A new apex joined to all terminals certifies the face:
    the graph plus apex is planar exactly when the terminals share a face.
    """
    _require_simple_undirected(g)
    G = nx.Graph()
    G.add_nodes_from(g.vertices)
    G.add_edges_from((e.tail, e.head) for _, e in g.edges())
    ok, _ = nx.check_planarity(G)
    if not ok:
        raise EmbeddingError("input graph is not planar")
    apex = g.next_vertex_id()
    Ga = G.copy()
    Ga.add_edges_from((apex, t) for t in g.terminal_list())
    ok, emb_a = nx.check_planarity(Ga)
    if not ok:
        raise EmbeddingError("terminals do not lie on one face")
    after: Dict[int, Optional[int]] = {}
    for t in g.terminal_list():
        rot = list(emb_a.neighbors_cw_order(t))
        i = rot.index(apex)
        rest = rot[i + 1 :] + rot[:i]
        after[t] = rest[0] if rest else None
    emb_a.remove_node(apex)
    return emb_a, after


# ---------------------------------------------------------------------------
# vertex splitting


def split_vertices(g: TerminalGraph, embedding: Optional[nx.PlanarEmbedding] = None, max_degree: int = 3) -> TerminalGraph:
    """Replace every vertex of degree > ``max_degree`` by a path of copies.

    Copy i keeps the i-th edge in clockwise order starting after the
    outer-face angle; consecutive copies are joined by heavy edges
    (capacity C+1 with C the total capacity, or length 0).  The first copy
    keeps the original id and, for a terminal, the terminal flag.
    """
    _require_simple_undirected(g)
    if max_degree < 3:
        raise GraphError("max_degree must be at least 3")
    heavy = _heavy(g)
    emb, after = outer_face_embedding(g)
    if embedding is not None:
        emb = embedding
    h = TerminalGraph(directed=False, mode=g.mode)
    for v in g.vertices:
        h.add_vertex(v)
        if g.is_terminal(v):
            h.set_terminal(v)
    fresh = g.next_vertex_id()
    copy_of: Dict[Tuple[int, int], int] = {}
    for v in g.vertices:
        d = g.degree(v)
        if d <= max_degree:
            for u in g.neighbors(v):
                copy_of[(v, u)] = v
            continue
        rot = list(emb.neighbors_cw_order(v))
        start = after.get(v)
        if start is not None and start in rot:
            i = rot.index(start)
            rot = rot[i:] + rot[:i]
        copies = [v]
        for _ in rot[1:]:
            h.add_vertex(fresh)
            copies.append(fresh)
            fresh += 1
        for c, u in zip(copies, rot):
            copy_of[(v, u)] = c
        for a, b in zip(copies, copies[1:]):
            h.add_edge(a, b, heavy)
    for _, e in g.edges():
        h.add_edge(copy_of[(e.tail, e.head)], copy_of[(e.head, e.tail)], e.weight)
    return h.freeze()


# ---------------------------------------------------------------------------
# grids


def _diagonal_step(a: Point, b: Point) -> bool:
    """A half-grid diagonal edge (i,i)-(i+1,i+1)."""
    return a[0] == a[1] and b[0] == b[1] and abs(a[0] - b[0]) == 1


@dataclass
class NodeEmbedding:
    """Vertex → point and edge → point path maps of a node embedding."""

    vertex_map: Dict[object, Point] = field(default_factory=dict)
    edge_paths: Dict[object, List[Point]] = field(default_factory=dict)

    def check(self) -> List[str]:
        """Problems found: clashing vertex images, broken or overlapping paths."""
        problems: List[str] = []
        owner: Dict[Point, object] = {}
        for v, p in self.vertex_map.items():
            if p in owner:
                problems.append(f"vertices {owner[p]} and {v} share point {p}")
            owner[p] = v
        images = set(self.vertex_map.values())
        for e, path in self.edge_paths.items():
            for a, b in zip(path, path[1:]):
                if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1 and not _diagonal_step(a, b):
                    problems.append(f"edge {e}: path step {a}->{b} is not a grid edge")
            for p in path[1:-1]:
                if p in images:
                    problems.append(f"edge {e}: interior point {p} is a vertex image")
                elif p in owner:
                    problems.append(f"edges {owner[p]} and {e} share interior point {p}")
                owner[p] = e
        return problems


@dataclass
class GridGraph:
    """N×N grid (points (r, c) with 1 ≤ r, c ≤ N); absent edges are padding."""

    size: int
    mode: str
    weights: Dict[Tuple[Point, Point], Fraction] = field(default_factory=dict)
    terminals: Dict[Point, int] = field(default_factory=dict)

    def on_boundary(self, p: Point) -> bool:
        return p[0] in (1, self.size) or p[1] in (1, self.size)

    def validate(self) -> None:
        n = self.size
        for (p, q) in self.weights:
            if abs(p[0] - q[0]) + abs(p[1] - q[1]) != 1:
                raise GraphError(f"grid edge {p}-{q} joins non-adjacent points")
            for r, c in (p, q):
                if not (1 <= r <= n and 1 <= c <= n):
                    raise GraphError(f"grid point {(r, c)} outside the {n}x{n} grid")
        for p in self.terminals:
            if not self.on_boundary(p):
                raise GraphError(f"terminal at {p} is not on the grid boundary")

    def padding(self) -> Fraction:
        return _pad(self.mode, sum(self.weights.values(), Fraction(0)))

    def to_terminal_graph(self, full: bool = True) -> TerminalGraph:
        """Terminal graph on the grid; terminals keep their labels, other points get fresh ids."""
        n = self.size
        g = TerminalGraph(directed=False, mode="cut" if self.mode == "cut" else "length")
        ids: Dict[Point, int] = {}
        for p, t in sorted(self.terminals.items(), key=lambda kv: kv[1]):
            ids[p] = g.add_vertex(t, p)
            g.set_terminal(t)
        fresh = max(self.terminals.values(), default=-1) + 1
        for r in range(1, n + 1):
            for c in range(1, n + 1):
                if (r, c) not in ids:
                    ids[(r, c)] = g.add_vertex(fresh, (r, c))
                    fresh += 1
        pad = self.padding()
        for r in range(1, n + 1):
            for c in range(1, n + 1):
                for q in ((r, c + 1), (r + 1, c)):
                    if q[0] > n or q[1] > n:
                        continue
                    w = self.weights.get(((r, c), q))
                    if w is None and not full:
                        continue
                    g.add_edge(ids[(r, c)], ids[q], pad if w is None else w)
        return g.freeze()


def _edge_weights(path: Sequence[Point], w: Fraction, mode: str) -> Fraction:
    return w if mode == "cut" else w / (len(path) - 1)


_DIRS = ((-1, 0), (0, -1), (1, 0), (0, 1))


def _fast_path(g: TerminalGraph, mode: str) -> Optional[Tuple[GridGraph, NodeEmbedding]]:
    """Embed a graph whose vertices already sit on integer grid points.

    Edges must be axis-parallel straight segments.  Interior terminals are
    joined to the grid boundary by vertex-disjoint paths through free grid
    points (such a path can only run through the outer face).  Straight rays
    are tried first; otherwise disjoint paths come from a max-flow, first on
    the given coordinates, then with a free margin, then on scaled copies.
    """
    coords = g.coords()
    if g.n == 0 or any(coords.get(v) is None for v in g.vertices):
        return None
    raw = {v: (int(coords[v][0]), int(coords[v][1])) for v in g.vertices}
    if len(set(raw.values())) != g.n:
        return None
    rmin = min(p[0] for p in raw.values())
    cmin = min(p[1] for p in raw.values())
    for scale, margin in ((1, 0), (1, 1), (2, 1), (3, 1), (4, 1)):
        pts = {v: ((p[0] - rmin) * scale + 1 + margin, (p[1] - cmin) * scale + 1 + margin) for v, p in raw.items()}
        res = _coordinate_layout(g, mode, pts, margin)
        if res is not None:
            return res
        if scale == 1 and margin == 0 and not _segments_ok(g, pts):
            return None
    return None


def _segments_ok(g: TerminalGraph, pts: Dict[int, Point]) -> bool:
    return _edge_paths(g, pts) is not None


def _edge_paths(g: TerminalGraph, pts: Dict[int, Point]) -> Optional[Dict[object, List[Point]]]:
    occupied: Set[Point] = set(pts.values())
    paths: Dict[object, List[Point]] = {}
    for eid, e in g.edges():
        a, b = pts[e.tail], pts[e.head]
        if a[0] != b[0] and a[1] != b[1]:
            return None
        length = abs(a[0] - b[0]) + abs(a[1] - b[1])
        step = ((b[0] - a[0]) // length, (b[1] - a[1]) // length)
        path = [(a[0] + i * step[0], a[1] + i * step[1]) for i in range(length + 1)]
        if any(p in occupied for p in path[1:-1]):
            return None
        occupied.update(path[1:-1])
        paths[eid] = path
    return paths


def _coordinate_layout(
    g: TerminalGraph, mode: str, pts: Dict[int, Point], margin: int
) -> Optional[Tuple[GridGraph, NodeEmbedding]]:
    paths = _edge_paths(g, pts)
    if paths is None:
        return None
    emb = NodeEmbedding(vertex_map=dict(pts), edge_paths=dict(paths))
    occupied: Set[Point] = set(pts.values())
    for path in paths.values():
        occupied.update(path)
    N = max(max(p[0] for p in pts.values()), max(p[1] for p in pts.values())) + margin
    if g.k >= 2:
        N = max(N, 2)

    def boundary(p: Point) -> bool:
        return p[0] in (1, N) or p[1] in (1, N)

    ts = g.terminal_list()
    chosen = _straight_rays(ts, pts, occupied, N, boundary)
    if chosen is None:
        starts = {t: [] for t in ts}
        for eid, e in g.edges():
            path = paths[eid]
            if len(path) > 2:
                if e.tail in starts:
                    starts[e.tail].append(path[1])
                if e.head in starts:
                    starts[e.head].append(path[-2])
        chosen = _routed_rays(ts, pts, occupied, N, boundary, starts)
    if chosen is None:
        return None
    # a path leaving through the first interior point of an incident edge
    # turns that first segment into part of the terminal (heavy)
    via: Dict[object, Tuple[int, Point]] = {}
    for t in ts:
        ray = chosen[t]
        if ray and ray[0] not in occupied:
            continue
        if ray:
            for eid, path in paths.items():
                if ray[0] in path[1:-1]:
                    via[eid] = (t, ray[0])
    heavy = _heavy(g)
    grid = GridGraph(size=N, mode=mode)
    for eid, e in g.edges():
        path = emb.edge_paths[eid]
        if eid in via:
            t, x = via[eid]
            if path[0] != pts[t]:
                path = path[::-1]
            w = _edge_weights(path[1:], e.weight, mode)
            grid.weights[_key(path[0], path[1])] = heavy
            for a, b in zip(path[1:], path[2:]):
                grid.weights[_key(a, b)] = w
            continue
        w = _edge_weights(path, e.weight, mode)
        for a, b in zip(path, path[1:]):
            grid.weights[_key(a, b)] = w
    for t in ts:
        ray = chosen[t]
        path = ray if ray and ray[0] in occupied else [pts[t]] + ray
        for a, b in zip(path, path[1:]):
            grid.weights[_key(a, b)] = heavy
        grid.terminals[path[-1]] = t
        emb.edge_paths[("ray", t)] = path
    return grid, emb


def _straight_rays(ts, pts, occupied, N, boundary) -> Optional[Dict[int, List[Point]]]:
    def rays(p: Point) -> List[List[Point]]:
        if boundary(p):
            return [[]]
        out = []
        for dr, dc in _DIRS:
            ray, q = [], (p[0] + dr, p[1] + dc)
            while 1 <= q[0] <= N and 1 <= q[1] <= N and q not in occupied:
                ray.append(q)
                if boundary(q):
                    out.append(ray)
                    break
                q = (q[0] + dr, q[1] + dc)
        return sorted(out, key=len)

    options = {t: rays(pts[t]) for t in ts}
    order = sorted(ts, key=lambda t: (len(options[t]), t))
    chosen: Dict[int, List[Point]] = {}
    used: Set[Point] = set()

    def solve(i: int) -> bool:
        if i == len(order):
            return True
        t = order[i]
        for ray in options[t]:
            if used.isdisjoint(ray):
                chosen[t] = ray
                used.update(ray)
                if solve(i + 1):
                    return True
                used.difference_update(ray)
        return False

    return chosen if solve(0) else None


def _routed_rays(ts, pts, occupied, N, boundary, starts) -> Optional[Dict[int, List[Point]]]:
    """Vertex-disjoint paths from interior terminals to free boundary points.

    A path may also leave from ``starts[t]``, the first interior points of
    the edges at ``t``; it is then returned starting with that point.
    """
    inner = [t for t in ts if not boundary(pts[t])]
    chosen: Dict[int, List[Point]] = {t: [] for t in ts if boundary(pts[t])}
    if not inner:
        return chosen
    D = nx.DiGraph()
    src, snk = "src", "snk"
    free = [(r, c) for r in range(1, N + 1) for c in range(1, N + 1) if (r, c) not in occupied]
    free_set = set(free)
    for p in free:
        for dr, dc in _DIRS:
            q = (p[0] + dr, p[1] + dc)
            if q in free_set:
                D.add_edge(p, q)
        if boundary(p):
            D.add_edge(p, snk)
    for t in inner:
        D.add_edge(src, ("terminal", t))
        for p in [pts[t]] + starts.get(t, []):
            D.add_edge(("terminal", t), p)
            if boundary(p) and p != pts[t]:
                D.add_edge(p, snk)
            for dr, dc in _DIRS:
                q = (p[0] + dr, p[1] + dc)
                if q in free_set:
                    D.add_edge(p, q)
    if snk not in D:
        return None
    try:
        found = list(nx.node_disjoint_paths(D, src, snk))
    except nx.NetworkXNoPath:
        return None
    if len(found) < len(inner):
        return None
    for path in found:
        t = path[1][1]
        rest = list(path[2:-1])
        chosen[t] = rest[1:] if rest[0] == pts[t] else rest
    return chosen


def compact_grid(grid: GridGraph, emb: NodeEmbedding) -> Tuple[GridGraph, NodeEmbedding]:
    """Drop interior grid lines that only carry straight crossing segments.

    An interior row qualifies when no vertex image or terminal sits on it and
    none of its horizontal edges carries a weight; each vertical segment
    crossing it is merged in series (minimum of capacities, sum of lengths).
    Columns are treated alike.  Equal numbers of rows and columns are
    removed, so the grid stays square and terminals stay on its boundary.
    The result is exact: every min cut and every distance is unchanged.
    """
    n = grid.size
    if n <= 2:
        return grid, emb
    marked = set(emb.vertex_map.values()) | set(grid.terminals)

    def removable(axis: int) -> List[int]:
        out = []
        for r in range(2, n):
            line = [(r, c) if axis == 0 else (c, r) for c in range(1, n + 1)]
            if any(p in marked for p in line):
                continue
            if any(_key(a, b) in grid.weights for a, b in zip(line, line[1:])):
                continue
            out.append(r)
        return out

    rows, cols = removable(0), removable(1)
    t = min(len(rows), len(cols))
    if t == 0:
        return grid, emb
    drop_r, drop_c = set(rows[:t]), set(cols[:t])
    shift_r = [0] * (n + 2)
    shift_c = [0] * (n + 2)
    for i in range(1, n + 1):
        shift_r[i] = shift_r[i - 1] + (i in drop_r)
        shift_c[i] = shift_c[i - 1] + (i in drop_c)

    def keep(p: Point) -> bool:
        return p[0] not in drop_r and p[1] not in drop_c

    def move(p: Point) -> Point:
        return (p[0] - shift_r[p[0]], p[1] - shift_c[p[1]])

    series = min if grid.mode == "cut" else (lambda a, b: a + b)
    out = GridGraph(size=n - t, mode=grid.mode)
    for p in range(1, n + 1):
        for q in range(1, n + 1):
            a = (p, q)
            if not keep(a):
                continue
            for d in ((0, 1), (1, 0)):
                w, b = None, (p + d[0], q + d[1])
                prev = a
                while b[0] <= n and b[1] <= n:
                    x = grid.weights.get(_key(prev, b))
                    if x is None:
                        w = None
                        break
                    w = x if w is None else series(w, x)
                    if keep(b):
                        break
                    prev, b = b, (b[0] + d[0], b[1] + d[1])
                if w is not None and b[0] <= n and b[1] <= n and keep(b):
                    out.weights[_key(move(a), move(b))] = w
    out.terminals = {move(p): t_ for p, t_ in grid.terminals.items()}
    new_emb = NodeEmbedding(
        vertex_map={v: move(p) for v, p in emb.vertex_map.items()},
        edge_paths={e: [move(p) for p in path if keep(p)] for e, path in emb.edge_paths.items()},
    )
    return compact_grid(out, new_emb)


# -- general layout via a visibility representation --------------------------


def _st_numbering(G: nx.Graph, s: int, t: int) -> Dict[int, int]:
    """st-numbering of a biconnected graph (depth-first, sign-list method)."""
    pre: Dict[int, int] = {s: 0}
    parent: Dict[int, int] = {}
    low: Dict[int, int] = {}
    order = [s]
    adj = {v: sorted(G[v], key=lambda u: (u != t, u)) for v in G}
    stack = [(s, iter(adj[s]))]
    while stack:
        v, it = stack[-1]
        for w in it:
            if w not in pre:
                pre[w] = len(order)
                order.append(w)
                parent[w] = v
                stack.append((w, iter(adj[w])))
                break
        else:
            stack.pop()
            lv = v
            for w in adj[v]:
                if w == parent.get(v):
                    continue
                cand = low[w] if parent.get(w) == v else w
                if pre[cand] < pre[lv]:
                    lv = cand
            low[v] = lv
    if len(order) != G.number_of_nodes() or order[1] != t:
        raise EmbeddingError("st-numbering needs a connected graph with edge s-t")
    nxt: Dict[int, Optional[int]] = {s: t, t: None}
    prv: Dict[int, Optional[int]] = {s: None, t: s}
    sign = {s: -1}
    for v in order[2:]:
        p = parent[v]
        if sign[low[v]] == -1:
            a = prv[p]
            prv[v], nxt[v] = a, p
            prv[p] = v
            if a is None:
                raise EmbeddingError("graph is not biconnected")
            nxt[a] = v
            sign[p] = 1
        else:
            b = nxt[p]
            prv[v], nxt[v] = p, b
            nxt[p] = v
            if b is not None:
                prv[b] = v
            sign[p] = -1
    number, cur, i = {}, s, 0
    while cur is not None:
        number[cur] = i
        i += 1
        cur = nxt[cur]
    for v in G:
        if v in (s, t):
            continue
        nb = [number[u] for u in G[v]]
        if not (min(nb) < number[v] < max(nb)):
            raise EmbeddingError("graph is not biconnected")
    return number


def _biconnect(G: nx.Graph) -> List[Tuple[int, int]]:
    """Add edges between consecutive neighbours of cut vertices until biconnected."""
    added = []
    while not nx.is_biconnected(G):
        ok, emb = nx.check_planarity(G)
        assert ok
        block: Dict[frozenset, int] = {}
        for i, comp in enumerate(nx.biconnected_component_edges(G)):
            for a, b in comp:
                block[frozenset((a, b))] = i
        v = min(nx.articulation_points(G))
        rot = list(emb.neighbors_cw_order(v))
        for i in range(len(rot)):
            u, w = rot[i], rot[(i + 1) % len(rot)]
            if block[frozenset((v, u))] != block[frozenset((v, w))]:
                G.add_edge(u, w)
                added.append((u, w))
                break
        else:  # pragma: no cover - a cut vertex always has such a pair
            raise EmbeddingError("could not biconnect")
    return added


def _visibility_embed(g: TerminalGraph, mode: str) -> Tuple[GridGraph, NodeEmbedding]:
    """Grid embedding from a visibility representation of g plus an apex.

    The apex is joined to every terminal and numbered first; each vertex
    becomes a horizontal segment (its row is its st-number), each edge a
    vertical segment.  Dropping the apex row leaves every apex edge as a
    free vertical ray from its terminal to the top row, and the terminal
    is moved to the top of that ray.
    """
    G = nx.Graph()
    G.add_nodes_from(g.vertices)
    real = {frozenset((e.tail, e.head)): (eid, e) for eid, e in g.edges()}
    G.add_edges_from(tuple(k) for k in real)
    apex = g.next_vertex_id()
    ts = g.terminal_list()
    G.add_edges_from((apex, t) for t in ts)
    if not nx.check_planarity(G)[0]:
        raise GraphError("terminals do not lie on one face of a planar graph")
    _biconnect(G)
    ok, emb = nx.check_planarity(G)
    assert ok
    s, t = apex, ts[0]
    num = _st_numbering(G, s, t)
    # faces: id of the face to the right of each half-edge
    face_of: Dict[Tuple[int, int], int] = {}
    nfaces = 0
    for u, v in emb.edges():
        if (u, v) in face_of:
            continue
        for a, b in _face_half_edges(emb, u, v):
            face_of[(a, b)] = nfaces
        nfaces += 1

    def oriented(u: int, v: int) -> Tuple[int, int]:
        return (u, v) if num[u] < num[v] else (v, u)

    def left(u: int, v: int) -> int:
        return face_of[(v, u)]

    def right(u: int, v: int) -> int:
        return face_of[(u, v)]

    f_out = left(s, t)
    SRC, SNK = nfaces, nfaces + 1
    dual: Dict[int, Set[int]] = {f: set() for f in range(nfaces + 2)}
    left_of: Dict[frozenset, int] = {}
    for a, b in G.edges():
        u, v = oriented(a, b)
        lf, rf = left(u, v), right(u, v)
        lf = SRC if lf == f_out else lf
        rf = SNK if rf == f_out else rf
        dual[lf].add(rf)
        left_of[frozenset((u, v))] = lf
    X = _longest_paths(dual, SRC)
    xe = {k: X[f] for k, f in left_of.items()}
    # drawing on points (row, column) with row = st-number, column = x
    rows = {v: num[v] for v in G}
    extent = {}
    for v in G:
        if v == apex:
            continue
        xs = [xe[frozenset((v, u))] for u in G[v]]
        extent[v] = (min(xs), max(xs))
    emb_map = NodeEmbedding()
    grid_w: Dict[Tuple[Point, Point], Fraction] = {}
    heavy = _heavy(g)
    owner: Dict[Point, object] = {}

    def claim(p: Point, who: object) -> None:
        if p in owner and owner[p] != who:
            raise EmbeddingError(f"layout clash at {p} between {owner[p]} and {who}")
        owner[p] = who

    for v, (x0, x1) in extent.items():
        seg = [(rows[v], x) for x in range(x0, x1 + 1)]
        for p in seg:
            claim(p, ("v", v))
        for a, b in zip(seg, seg[1:]):
            grid_w[_key(a, b)] = heavy
    moved: Dict[int, Point] = {}
    for a, b in G.edges():
        u, v = oriented(a, b)
        x = xe[frozenset((u, v))]
        lo = rows[u] + 1 if u == apex else rows[u]
        path = [(r, x) for r in range(lo, rows[v] + 1)]
        for p in path[1:-1] if u != apex else path[:-1]:
            claim(p, ("e", u, v))
        key = frozenset((u, v))
        if u == apex:
            if v in g.terminals:
                for p, q in zip(path, path[1:]):
                    grid_w[_key(p, q)] = heavy
                moved[v] = path[0]
                emb_map.edge_paths[("ray", v)] = path[::-1]
            continue
        if key not in real:
            continue  # dummy edge: left as padding
        eid, e = real[key]
        w = _edge_weights(path, e.weight, mode)
        for p, q in zip(path, path[1:]):
            grid_w[_key(p, q)] = w
        emb_map.edge_paths[eid] = path if e.tail == u else path[::-1]
    for v in extent:
        x0, x1 = extent[v]
        emb_map.vertex_map[v] = (rows[v], x0)
    # shift to 1-based coordinates, apex row 0 disappears
    cols = 1 + max((x for _, x in owner), default=0)
    height = max(rows.values())
    N = max(cols, height, 2)

    def sh(p: Point) -> Point:
        return (p[0], p[1] + 1)

    grid = GridGraph(size=N, mode=mode)
    for (p, q), w in grid_w.items():
        grid.weights[_key(sh(p), sh(q))] = w
    for v, p in moved.items():
        grid.terminals[sh(p)] = v
    emb_map.vertex_map = {v: sh(p) for v, p in emb_map.vertex_map.items()}
    emb_map.edge_paths = {k: [sh(p) for p in path] for k, path in emb_map.edge_paths.items()}
    return grid, emb_map


def _face_half_edges(emb: nx.PlanarEmbedding, u: int, v: int) -> List[Tuple[int, int]]:
    out = []
    a, b = u, v
    while True:
        out.append((a, b))
        a, b = emb.next_face_half_edge(a, b)
        if (a, b) == (u, v):
            return out


def _longest_paths(dag: Dict[int, Set[int]], src: int) -> Dict[int, int]:
    indeg = {v: 0 for v in dag}
    for v, ws in dag.items():
        for w in ws:
            indeg[w] += 1
    order, queue = [], [v for v in sorted(dag) if indeg[v] == 0]
    while queue:
        v = queue.pop()
        order.append(v)
        for w in sorted(dag[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if len(order) != len(dag):
        raise EmbeddingError("dual graph is not acyclic")
    dist = {v: 0 for v in dag}
    for v in order:
        for w in dag[v]:
            dist[w] = max(dist[w], dist[v] + 1)
    return dist


def orthogonal_grid_embed(g: TerminalGraph, use_coords: bool = True) -> Tuple[GridGraph, NodeEmbedding]:
    """Node embedding of ``g`` into a square grid with all terminals on the boundary.

    With ``use_coords`` and integer grid coordinates on every vertex (edges
    drawn as straight axis-parallel segments) the drawing is taken as is and
    each interior terminal is extended along a free straight ray to the
    boundary.  Otherwise a visibility-representation layout is computed.
    Terminal extensions and vertex segments use heavy edges.
    """
    _require_simple_undirected(g)
    mode = _rule_mode(g)
    if g.n == 0:
        return GridGraph(size=0, mode=mode), NodeEmbedding()
    if use_coords:
        res = _fast_path(g, mode)
        if res is not None:
            return compact_grid(*res)
        log.info("coordinate fast path not applicable; computing a layout")
    if g.n == 1:
        v = g.vertices[0]
        grid = GridGraph(size=1, mode=mode)
        if g.is_terminal(v):
            grid.terminals[(1, 1)] = v
        return grid, NodeEmbedding(vertex_map={v: (1, 1)})
    if not g.terminals:
        raise EmbeddingError("layout needs at least one terminal")
    return compact_grid(*_visibility_embed(g, mode))


# ---------------------------------------------------------------------------
# half-grids


@dataclass
class HalfGrid:
    """Half-grid on points (i, j), 1 ≤ i ≤ j ≤ size, with diagonal terminals.

    ``weights`` holds every edge (grid edges and, if present, diagonal edges
    between (i,i) and (i+1,i+1)).  ``terminals`` maps diagonal points to
    labels; promoted terminals carry the label ``None``.
    """

    size: int
    mode: str
    weights: Dict[Tuple[Point, Point], Fraction] = field(default_factory=dict)
    terminals: Dict[Point, Optional[int]] = field(default_factory=dict)

    @property
    def points(self) -> List[Point]:
        n = self.size
        return [(i, j) for i in range(1, n + 1) for j in range(i, n + 1)]

    @property
    def has_diagonal(self) -> bool:
        return any(p[0] == p[1] and q[0] == q[1] for p, q in self.weights)

    def structure_problems(self, diagonal: Optional[bool] = None) -> List[str]:
        n = self.size
        pts = set(self.points)
        expected: Set[Tuple[Point, Point]] = set()
        for i, j in pts:
            for q in ((i, j + 1), (i + 1, j)):
                if q in pts:
                    expected.add(((i, j), q))
        diag = {((i, i), (i + 1, i + 1)) for i in range(1, n)}
        probs = []
        want = expected | diag if diagonal else expected
        got = set(self.weights)
        if diagonal is None:
            got -= diag
        for e in sorted(want - got):
            probs.append(f"missing edge {e}")
        for e in sorted(got - want):
            probs.append(f"unexpected edge {e}")
        for p in self.terminals:
            if p[0] != p[1] or p not in pts:
                probs.append(f"terminal at {p} is not a diagonal point")
        return probs

    def to_terminal_graph(self) -> Tuple[TerminalGraph, Dict[Point, int]]:
        g = TerminalGraph(directed=False, mode="cut" if self.mode == "cut" else "length")
        ids = {}
        for p in self.points:
            ids[p] = g.add_vertex(coord=p)
            if p in self.terminals:
                g.set_terminal(ids[p])
        for (p, q), w in sorted(self.weights.items()):
            g.add_edge(ids[p], ids[q], w)
        return g.freeze(), ids


def grid_to_halfgrid(grid: GridGraph) -> Tuple[HalfGrid, NodeEmbedding]:
    """Embed the n×n grid into the half-grid of size ℓ = 4n−3.

    Boundary vertices go to the diagonal in counter-clockwise order starting
    from (1,n); interior (i,j) goes to (n+i−1, 2n+j−2).  Each grid edge maps
    to a path, every path edge carrying the capacity (cut) or an equal share
    of the length (distance); all other half-grid edges are padding.
    """
    grid.validate()
    n = grid.size
    if n < 2:
        raise GraphError("grid_to_halfgrid needs n >= 2")
    ell = 4 * n - 3

    def image(p: Point) -> Point:
        i, j = p
        if i == 1 and j >= 2:
            d = n - j + 1
        elif j == 1 and i <= n - 1:
            d = n + i - 1
        elif i == n and j <= n - 1:
            d = 2 * n + j - 2
        elif j == n and i >= 2:
            d = 4 * n - i - 2
        else:
            return (n + i - 1, 2 * n + j - 2)
        return (d, d)

    def run(a: Point, b: Point) -> List[Point]:
        """Straight run of points from a to b inclusive."""
        if a[0] == b[0]:
            s = 1 if b[1] >= a[1] else -1
            return [(a[0], c) for c in range(a[1], b[1] + s, s)]
        s = 1 if b[0] >= a[0] else -1
        return [(r, a[1]) for r in range(a[0], b[0] + s, s)]

    def path_of(p: Point, q: Point) -> List[Point]:
        """Half-grid path for the grid edge p-q, oriented from image(p) to image(q)."""
        (i, j), (i2, j2) = p, q
        bp = i in (1, n) or j in (1, n)
        bq = i2 in (1, n) or j2 in (1, n)
        if {p, q} == {(1, n), (2, n)}:
            wrap = run((1, 1), (1, ell)) + run((2, ell), (ell - 1, ell)) + [(ell - 1, ell - 1)]
            return wrap if p == (1, n) else wrap[::-1]
        if bp and bq:
            return [image(p), image(q)]
        if not bp and not bq:
            return [image(p), image(q)]
        if bp:
            return path_of(q, p)[::-1]
        # p interior, q on the boundary
        a = image(p)
        if j2 == 1:  # ((i,2),(i,1)): leftwards along the row to the diagonal
            return run(a, (i + n - 1, i + n - 1))
        if i2 == n:  # ((n-1,j),(n,j)): downwards along the column to the diagonal
            return run(a, (2 * n + j - 2, 2 * n + j - 2))
        if i2 == 1:  # ((2,j),(1,j)): up, then left to the diagonal
            top = n - j + 1
            return run(a, (top, a[1])) + run((top, a[1] - 1), (top, top))
        if j2 == n:  # ((i,n-1),(i,n)): right, then down to the diagonal
            col = 4 * n - i - 2
            return run(a, (a[0], col)) + run((a[0] + 1, col), (col, col))
        raise AssertionError("unreachable")

    hg = HalfGrid(size=ell, mode=grid.mode)
    emb = NodeEmbedding()
    for r in range(1, n + 1):
        for c in range(1, n + 1):
            emb.vertex_map[(r, c)] = image((r, c))
    pad = grid.padding()
    for r in range(1, n + 1):
        for c in range(1, n + 1):
            for q in ((r, c + 1), (r + 1, c)):
                if q[0] > n or q[1] > n:
                    continue
                path = path_of((r, c), q)
                emb.edge_paths[((r, c), q)] = path
                w = grid.weights.get(((r, c), q))
                share = pad if w is None else _edge_weights(path, w, grid.mode)
                for a, b in zip(path, path[1:]):
                    k = _key(a, b)
                    if k in hg.weights:
                        raise AssertionError(f"half-grid edge {k} used twice")
                    hg.weights[k] = share
    for p in hg.points:
        nbrs = [(p[0], p[1] + 1), (p[0] + 1, p[1])]
        if p[0] == p[1]:
            nbrs.append((p[0] + 1, p[1] + 1))
        for q in nbrs:
            if q[1] > ell or q[0] > q[1]:
                continue
            hg.weights.setdefault(_key(p, q), pad)
    for p, t in grid.terminals.items():
        hg.terminals[image(p)] = t
    return hg, emb


# ---------------------------------------------------------------------------
# half-grid reduction


_NE, _NW, _SE = (-1, 1), (-1, -1), (1, 1)


class _HalfGridReducer:
    """Drives exact rewrites on a half-grid while tracking point coordinates."""

    def __init__(self, g: TerminalGraph, pos: Dict[Point, int], size: int, mode: str) -> None:
        self.rw = Rewriter(g, mode)
        self.pos = dict(pos)
        self.at = {v: p for p, v in pos.items()}
        self.size = size

    @property
    def g(self) -> TerminalGraph:
        return self.rw.g

    def _moved(self, old: int, new: int) -> None:
        p = self.at.pop(old)
        self.at[new] = p
        self.pos[p] = new

    def _gone(self, v: int) -> None:
        del self.pos[self.at.pop(v)]

    def push(self, pa: Point, pb: Point, direction: Point) -> None:
        """Move the extra edge between points pa, pb in ``direction`` until an edge deletion removes it."""
        g = self.g
        a, b = self.pos[pa], self.pos[pb]
        for _ in range(4 * self.size + 8):
            if len(g.edges_between(a, b)) != 1:
                return  # merged into an existing edge
            common = sorted(set(g.neighbors(a)) & set(g.neighbors(b)))
            cands = [y for y in common if not g.is_terminal(y) and len(g.neighbors(y)) == g.degree(y)]
            low = [y for y in cands if g.degree(y) in (2, 3)]
            if low:
                y = low[0]
                steps = self.rw.edge_deletion(y, a, b)
                self._moved(y, steps[0].new_vertex)
                return
            best = None
            pa, pb = self.at[a], self.at[b]
            mid = (pa[0] + pb[0], pa[1] + pb[1])
            for y in cands:
                if g.degree(y) != 4:
                    continue
                v, w = [u for u in g.neighbors(y) if u not in (a, b)]
                pv, pw = self.at[v], self.at[w]
                gain = (pv[0] + pw[0] - mid[0]) * direction[0] + (pv[1] + pw[1] - mid[1]) * direction[1]
                if gain > 0 and (best is None or gain > best[0]):
                    best = (gain, y, v, w)
            if best is None:
                raise RuleError(f"cannot push edge {self.at[a]}-{self.at[b]} towards {direction}")
            _, y, v, w = best
            steps = self.rw.edge_replacement(y, a, b)
            self._moved(y, steps[0].new_vertex)
            a, b = v, w
        raise RuleError("edge push did not reach the boundary")

    def remove_diagonal_edges(self) -> None:
        for i in range(1, self.size):
            if self.g.has_edge(self.pos[(i, i)], self.pos[(i + 1, i + 1)]):
                self.push((i, i), (i + 1, i + 1), _NE)

    def eliminate(self, l: int) -> None:
        """Remove non-terminal diagonal (l,l) with its column above and row to the right."""
        m = self.size
        P = self.pos
        x = P[(l, l)]
        if self.g.degree(x) <= 1:
            self.rw.degree_one(x)
            self._gone(x)
        else:
            self.rw.series(x)
            self._gone(x)
            self.push((l - 1, l), (l, l + 1), _NE)
        for r in range(l - 1, 0, -1):
            c = P[(r, l)]
            if self.g.degree(c) == 2:
                self.rw.series(c)
                self._gone(c)
                continue
            U, L, R = (r - 1, l), (r, l - 1), (r, l + 1)
            self.rw.wye_delta(c)
            self._gone(c)
            self.push(U, L, _NW)
            self.push(U, R, _NE)
        for s in range(l + 1, m + 1):
            d = P[(l, s)]
            if self.g.degree(d) == 2:
                self.rw.series(d)
                self._gone(d)
                continue
            U, D, R = (l - 1, s), (l + 1, s), (l, s + 1)
            self.rw.wye_delta(d)
            self._gone(d)
            self.push(U, R, _NE)
            self.push(D, R, _SE)
        # re-index: drop row and column l
        self.pos = {(i - (i > l), j - (j > l)): v for (i, j), v in self.pos.items()}
        self.at = {v: p for p, v in self.pos.items()}
        self.size -= 1

    def to_halfgrid(self, labels: Dict[int, Optional[int]]) -> HalfGrid:
        g = self.g
        hg = HalfGrid(size=self.size, mode="cut" if self.rw.mode == "cut" else "distance")
        for _, e in g.edges():
            p, q = self.at[e.tail], self.at[e.head]
            k = _key(p, q)
            if k in hg.weights:
                raise AssertionError(f"parallel edges left at {k}")
            hg.weights[k] = e.weight
        for v in g.terminal_list():
            hg.terminals[self.at[v]] = labels.get(v)
        return hg


@dataclass
class GitlerResult:
    halfgrid: HalfGrid
    steps: List[ReductionStep]
    source: TerminalGraph
    promoted: List[Point]
    ids: Dict[Point, int]
    reduced: TerminalGraph
    labels: Dict[int, Optional[int]]

    @property
    def k_prime(self) -> int:
        return self.halfgrid.size


def reduction_source(h: HalfGrid) -> Tuple[TerminalGraph, Dict[Point, int], Dict[int, Optional[int]], List[Point]]:
    """Terminal graph the half-grid reduction starts from.

    Returns the graph (with the corner diagonal points promoted to
    terminals), the point → vertex map, the vertex → terminal label map
    (``None`` for promoted points) and the promoted points.
    """
    n = h.size
    for p in h.terminals:
        if p[0] != p[1]:
            raise GraphError(f"terminal at {p} is not on the diagonal")
    g, ids = h.to_terminal_graph()
    promoted: List[Point] = []
    gm = g.thaw()
    for d in sorted({1, 2, n - 1, n} & set(range(1, n + 1))):
        if (d, d) not in h.terminals:
            gm.set_terminal(ids[(d, d)])
            promoted.append((d, d))
    labels: Dict[int, Optional[int]] = {ids[p]: t for p, t in h.terminals.items()}
    for p in promoted:
        labels[ids[p]] = None
    return gm.freeze(), ids, labels, promoted


def gitler_reduce(h: HalfGrid, mode: Optional[str] = None) -> GitlerResult:
    """Reduce a half-grid to the half-grid on its diagonal terminals, without diagonal edges.

    The points (1,1), (2,2), (n−1,n−1), (n,n) are made terminals first.
    Diagonal edges are pushed outwards by edge replacements and removed by
    an edge deletion at the boundary (top-left to bottom-right); then each
    non-terminal diagonal point is removed by a series reduction, followed
    by Wye-Delta eliminations of its column (bottom-up) and its row
    (left to right), every new edge again pushed out to the boundary.
    """
    mode = mode or ("cut" if h.mode == "cut" else "distance")
    n = h.size
    gm, ids, labels, promoted = reduction_source(h)
    red = _HalfGridReducer(gm, ids, n, mode)
    red.remove_diagonal_edges()
    while True:
        free = [d for d in range(1, red.size + 1) if not red.g.is_terminal(red.pos[(d, d)])]
        if not free:
            break
        red.eliminate(free[0])
    out = red.to_halfgrid(labels)
    probs = out.structure_problems(diagonal=False)
    if probs:
        raise AssertionError("half-grid reduction left a malformed graph: " + "; ".join(probs[:5]))
    return GitlerResult(out, red.rw.steps, gm, promoted, ids, red.g.freeze(), labels)


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass
class StageRecord:
    stage: str
    input: Dict[str, object]
    output: Dict[str, object]
    details: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"stage": self.stage, "input": self.input, "output": self.output, **self.details}, sort_keys=True, default=str)


@dataclass
class PipelineLog:
    mode: str
    stages: List[StageRecord] = field(default_factory=list)
    steps: List[ReductionStep] = field(default_factory=list)
    cleanup: List["CleanupEntry"] = field(default_factory=list)
    scaling: Fraction = Fraction(1)

    def add(self, stage: str, before: Dict[str, object], after: Dict[str, object], **details: object) -> None:
        self.stages.append(StageRecord(stage, before, after, dict(details)))

    def to_jsonl(self) -> str:
        """Stage records, then one ``{"step": i, "rule", "text"}`` line per reduction step
        and one ``{"cleanup": i, "rule", "text"}`` line per cleanup step."""
        lines = [s.to_json() for s in self.stages]
        lines += [json.dumps({"step": i, "rule": st.rule, "text": st.to_text()}) for i, st in enumerate(self.steps)]
        lines += [json.dumps({"cleanup": i, "rule": getattr(st, "rule", "drop"), "text": st.to_text()}) for i, st in enumerate(self.cleanup)]
        return "".join(line + "\n" for line in lines)

    @staticmethod
    def steps_from_jsonl(text: str, kind: str = "step") -> List[ReductionStep]:
        """Reduction steps (``kind="step"``) or cleanup entries (``kind="cleanup"``) of a log."""
        parse = _cleanup_entry if kind == "cleanup" else ReductionStep.from_text
        out = []
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                if kind in rec:
                    out.append(parse(rec["text"]))
        return out

    def steps_text(self) -> str:
        return steps_to_text(self.steps)


def _grid_stats(n: int, size: int, k: int) -> Dict[str, object]:
    return {"n": n, "size": size, "k": k}


def _merge_parallel(g: TerminalGraph) -> TerminalGraph:
    if not g.has_parallel_edges():
        return g
    rw = Rewriter(g)
    rw.parallel_pass(g.vertices)
    return rw.g.freeze()


def _drop_terminal_free_components(g: TerminalGraph) -> TerminalGraph:
    keep = set()
    for comp in nx.connected_components(g.to_networkx()):
        if comp & g.terminals:
            keep |= comp
    return g if len(keep) == g.n else g.subgraph(keep)


def _trivial_output(g: TerminalGraph) -> TerminalGraph:
    h = TerminalGraph(directed=False, mode=g.mode)
    for t in g.terminal_list():
        h.add_vertex(t)
        h.set_terminal(t)
    return h.freeze()


@dataclass(frozen=True)
class EdgeDrop:
    """Cleanup removal of an edge no cut or shortest path needs.

    Cut mode drops capacity-0 edges; distance mode drops an edge at least as
    long as the shortest path between its endpoints that avoids it.
    """

    u: int
    v: int
    weight: Fraction

    def to_text(self) -> str:
        return f"drop {self.u} {self.v} {format_weight(self.weight)}"

    @classmethod
    def from_text(cls, line: str) -> "EdgeDrop":
        tok = line.split()
        if len(tok) != 4 or tok[0] != "drop":
            raise RuleError(f"not a drop line: {line!r}")
        return cls(int(tok[1]), int(tok[2]), parse_weight(tok[3]))


CleanupEntry = object  # ReductionStep or EdgeDrop


def _cleanup_entry(text: str) -> CleanupEntry:
    return EdgeDrop.from_text(text) if text.startswith("drop ") else ReductionStep.from_text(text)


def _avoiding_distance(g: TerminalGraph, eid: int) -> Optional[Fraction]:
    e = g.edge(eid)
    G = nx.Graph()
    G.add_nodes_from(g.vertices)
    for fid, f in g.edges():
        if fid != eid and (not G.has_edge(f.tail, f.head) or G[f.tail][f.head]["w"] > f.weight):
            G.add_edge(f.tail, f.head, w=f.weight)
    try:
        return nx.dijkstra_path_length(G, e.tail, e.head, weight="w")
    except nx.NetworkXNoPath:
        return None


def _droppable(g: TerminalGraph, eid: int, mode: str) -> bool:
    w = g.edge(eid).weight
    if mode == "cut":
        return w == 0
    d = _avoiding_distance(g, eid)
    return d is not None and d <= w


def _drop(g: TerminalGraph, drop: EdgeDrop, mode: str) -> TerminalGraph:
    match = [eid for eid in g.edges_between(drop.u, drop.v) if g.edge(eid).weight == drop.weight]
    if not match or not _droppable(g, match[0], mode):
        raise RuleError(f"cleanup {drop.to_text()} does not apply")
    h = g.thaw()
    h.remove_edge(match[0])
    return h.freeze()


def _cleanup(
    reduced: TerminalGraph, labels: Dict[int, Optional[int]], mode: str, entries: Optional[Sequence[CleanupEntry]] = None
) -> Tuple[TerminalGraph, List[CleanupEntry]]:
    """Demote the promoted corner points and shrink the result exactly.

    Unneeded edges are dropped and the rules degree-one, series, parallel,
    Wye-Delta and edge deletion applied, alternately, until neither changes
    anything.  Every move keeps the graph planar.  With ``entries`` given,
    those logged moves are replayed and checked instead.
    """
    g = reduced.thaw()
    for v in reduced.terminal_list():
        if labels.get(v) is None:
            g.set_terminal(v, False)
    g = g.freeze()
    if entries is not None:
        batch: List[ReductionStep] = []
        for entry in list(entries) + [None]:
            if isinstance(entry, ReductionStep):
                batch.append(entry)
                continue
            g, batch = replay_steps(g, batch), []
            if entry is not None:
                g = _drop(g, entry, mode)
        return g, list(entries)
    log: List[CleanupEntry] = []
    while True:
        g, steps = greedy_reduce(g, mode, policy="with-deletion")
        log += steps
        eid = next((e for e in g.edge_ids() if _droppable(g, e, mode)), None)
        if eid is None:
            return g, log
        e = g.edge(eid)
        drop = EdgeDrop(e.tail, e.head, e.weight)
        g = _drop(g, drop, mode)
        log.append(drop)


def _relabel(red: TerminalGraph, labels: Dict[int, Optional[int]], src_mode: str) -> TerminalGraph:
    """Terminals get their input ids back, the rest fresh ids in vertex order."""
    out = TerminalGraph(directed=False, mode=src_mode)
    new: Dict[int, int] = {}
    for v in red.vertices:
        t = labels.get(v)
        if t is not None:
            new[v] = out.add_vertex(t)
            out.set_terminal(t)
    fresh = max(new.values(), default=-1) + 1
    for v in red.vertices:
        if v not in new:
            new[v] = out.add_vertex(fresh)
            fresh += 1
    for _, e in red.edges():
        out.add_edge(new[e.tail], new[e.head], e.weight)
    return out.freeze()


def _halfgrid_stage(g0: TerminalGraph, plog: PipelineLog, use_coords: bool) -> HalfGrid:
    res = _fast_path(g0, _rule_mode(g0)) if use_coords else None
    if res is not None:
        grid, emb = compact_grid(*res)
        rays = sum(1 for key, p in emb.edge_paths.items() if isinstance(key, tuple) and key[0] == "ray" and len(p) > 1)
        plog.add("grid-embed", graph_stats(g0), _grid_stats(g0.n, grid.size, len(grid.terminals)), path="coordinates", rays=rays, vertex_map=_vmap(emb))
    else:
        g1 = split_vertices(g0)
        plog.add("split", graph_stats(g0), graph_stats(g1))
        grid, emb = compact_grid(*_visibility_embed(g1, _rule_mode(g1)))
        plog.add("grid-embed", graph_stats(g1), _grid_stats(g1.n, grid.size, len(grid.terminals)), path="visibility", vertex_map=_vmap(emb))
    probs = emb.check()
    if probs:
        raise EmbeddingError("grid embedding is not a node embedding: " + "; ".join(probs[:3]))
    hg, _ = grid_to_halfgrid(grid)
    plog.add("half-grid", _grid_stats(grid.size**2, grid.size, len(grid.terminals)), _grid_stats(len(hg.points), hg.size, len(hg.terminals)), ell=hg.size)
    return hg


def _vmap(emb: NodeEmbedding) -> Dict[str, List[int]]:
    return {str(v): list(p) for v, p in sorted(emb.vertex_map.items())}


def _prepare(g: TerminalGraph, mode: str, plog: PipelineLog) -> TerminalGraph:
    if mode not in PIPELINE_MODES:
        raise GraphError(f"unknown mode {mode!r}")
    if g.directed:
        raise GraphError("expects an undirected graph")
    if g.mode != _NEEDS[mode]:
        raise GraphError(f"{mode} mode needs a graph with {_NEEDS[mode]} weights, got {g.mode!r}")
    g0 = _drop_terminal_free_components(_merge_parallel(g))
    plog.add("preprocess", graph_stats(g), graph_stats(g0), merged_parallel=g.has_parallel_edges())
    outer_face_embedding(g0)  # planarity and one-face certificate
    if mode == "distance":
        comps = [c for c in nx.connected_components(g0.to_networkx()) if c & g0.terminals]
        if len(comps) > 1:
            raise GraphError("distance mode needs all terminals in one connected component")
    return g0


def replay_pipeline(
    g: TerminalGraph,
    steps: Sequence[ReductionStep],
    mode: str = "cut",
    use_coords: bool = True,
    cleanup: Sequence["CleanupEntry"] = (),
) -> TerminalGraph:
    """Rebuild the half-grid from ``g`` and re-apply logged reduction steps and cleanup entries.

    Every step is checked against its recorded effect.  The result carries
    the input's terminal ids and fresh ids for the other vertices, exactly
    as the pipeline output does.
    """
    plog = PipelineLog(mode=mode)
    g0 = _prepare(g, mode, plog)
    if g0.k <= 1:
        if steps or cleanup:
            raise RuleError("a trivial instance has no reduction steps")
        return _trivial_output(g0)
    hg = _halfgrid_stage(g0, plog, use_coords)
    src, _, labels, _ = reduction_source(hg)
    red = replay_steps(src, steps)
    cleaned, _ = _cleanup(red, labels, _rule_mode(hg), cleanup)
    return _relabel(cleaned, labels, g.mode)


def _rule_mode(hg: HalfGrid) -> str:
    return "cut" if hg.mode == "cut" else "distance"


def same_weighted_graph(a: TerminalGraph, b: TerminalGraph) -> bool:
    """Isomorphic with terminal ids fixed and edge weights matched."""
    if a.terminals != b.terminals or a.n != b.n or a.m != b.m:
        return False

    def nxg(g: TerminalGraph) -> nx.MultiGraph:
        G = nx.MultiGraph()
        for v in g.vertices:
            G.add_node(v, label=v if g.is_terminal(v) else None)
        for _, e in g.edges():
            G.add_edge(e.tail, e.head, weight=e.weight)
        return G

    return nx.is_isomorphic(
        nxg(a),
        nxg(b),
        node_match=categorical_node_match("label", None),
        edge_match=categorical_multiedge_match("weight", None),
    )


def build_sparsifier_os(g: TerminalGraph, mode: str = "cut", use_coords: bool = True) -> Tuple[TerminalGraph, PipelineLog]:
    """Quality-1 cut, distance or flow sparsifier of a planar graph with terminals on one face.

    Flow mode is cut mode with the capacities scaled by 1 (the flow-cut gap
    of such graphs is 1); the log records that factor.
    """
    plog = PipelineLog(mode=mode)
    g0 = _prepare(g, mode, plog)
    if g0.k <= 1:
        out = _trivial_output(g0)
        plog.add("trivial", graph_stats(g0), graph_stats(out))
        return out, plog
    hg = _halfgrid_stage(g0, plog, use_coords)
    red = gitler_reduce(hg)
    plog.steps = red.steps
    plog.add(
        "reduce",
        _grid_stats(len(hg.points), hg.size, len(hg.terminals)),
        _grid_stats(len(red.halfgrid.points), red.halfgrid.size, len(red.halfgrid.terminals)),
        k_prime=red.k_prime,
        promoted=[list(p) for p in red.promoted],
        steps=len(red.steps),
    )
    cleaned, plog.cleanup = _cleanup(red.reduced, red.labels, _rule_mode(hg))
    plog.add("cleanup", graph_stats(red.reduced), graph_stats(cleaned), steps=len(plog.cleanup))
    out = _relabel(cleaned, red.labels, g.mode)
    plog.add("output", {}, graph_stats(out), scaling=str(plog.scaling), bound=(g.k + 4) * (g.k + 5) // 2)
    return out, plog
